use std::fmt::Write as _;

use super::AuthorList;

/// Escape `&`, `%` and `#` unless already escaped. Names are stored
/// TeX-ready, so backslashes and braces pass through.
fn tex_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut prev = '\0';
    for c in s.chars() {
        if matches!(c, '&' | '%' | '#') && prev != '\\' {
            out.push('\\');
        }
        out.push(c);
        prev = c;
    }
    out
}

pub(super) fn render(list: &AuthorList) -> String {
    let positions = list.institute_positions();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "% author list {} at {}",
        list.ref_code(),
        list.header.get(super::HEADER_REF_DATE).map_or("", String::as_str)
    );
    out.push_str("\\begin{flushleft}\n");
    let last = list.authors.len().saturating_sub(1);
    let mut any_deceased = false;
    for (i, a) in list.authors.iter().enumerate() {
        let mut marks: Vec<String> = a
            .affiliations
            .iter()
            .map(|id| positions[id.as_str()].to_string())
            .collect();
        if a.deceased {
            marks.push("\\dagger".into());
            any_deceased = true;
        }
        let initials = tex_escape(&a.initials);
        let family = tex_escape(&a.family_name);
        let name = if initials.is_empty() { family } else { format!("{initials}~{family}") };
        let sep = if i == last { "" } else { "," };
        let _ = writeln!(out, "{name}$^{{{}}}${sep}", marks.join(","));
    }
    out.push_str("\\end{flushleft}\n\n\\begin{flushleft}\n");
    for (i, inst) in list.institutes.iter().enumerate() {
        let _ = writeln!(out, "$^{{{}}}${}\\\\", i + 1, tex_escape(&inst.name));
    }
    if any_deceased {
        out.push_str("$^{\\dagger}$Deceased\\\\\n");
    }
    out.push_str("\\end{flushleft}\n");
    out
}
