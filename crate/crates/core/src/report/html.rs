//! Self-contained HTML rendering of a report.

use std::fmt::Write as _;

use super::{DiscrepancyReport, ReportEntry, CATEGORIES};

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn entries_table(out: &mut String, entries: &[ReportEntry]) {
    if entries.is_empty() {
        out.push_str("<p class=\"none\">None</p>\n");
        return;
    }
    out.push_str("<table>\n<tr><th>Reference</th><th>Printed</th><th>Distance</th><th>Detail</th></tr>\n");
    for e in entries {
        let _ = writeln!(
            out,
            "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
            escape(&e.reference),
            escape(e.printed.as_deref().unwrap_or("")),
            e.distance.map(|d| d.to_string()).unwrap_or_default(),
            escape(&e.detail)
        );
    }
    out.push_str("</table>\n");
}

/// One section per category with its count; skip lists sit in a collapsed
/// `details` element toggled by "Skipped +".
pub fn render_html(report: &DiscrepancyReport) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Proof check {}</title>\n\
         <style>body{{font-family:sans-serif}} .count{{font-weight:bold}} table{{border-collapse:collapse}} \
         td,th{{border:1px solid #ccc;padding:2px 6px}}</style>\n</head>\n<body>\n",
        escape(&report.name())
    );
    let _ = writeln!(out, "<h1>Proof check: {}</h1>", escape(&report.ref_code));
    out.push_str("<dl class=\"header\">\n");
    for (k, v) in [
        ("Reference date", report.ref_date.to_string()),
        ("Created", report.creation_date.format("%d-%b-%Y").to_string()),
        ("Publisher", report.publisher.clone()),
        ("Document", report.document.clone()),
        ("File", report.filename.clone()),
    ] {
        let _ = writeln!(out, "<dt>{k}</dt><dd>{}</dd>", escape(&v));
    }
    out.push_str("</dl>\n");
    for cat in CATEGORIES {
        let entries = report.list(cat.key).unwrap_or_default();
        let _ = writeln!(
            out,
            "<section id=\"{}\">\n<h2>{} <span class=\"count\" data-count=\"{}\">({})</span></h2>",
            cat.key,
            escape(cat.title),
            entries.len(),
            entries.len()
        );
        entries_table(&mut out, entries);
        if let Some(skip_key) = cat.skip_key {
            let skipped = report.list(skip_key).unwrap_or_default();
            let _ = writeln!(
                out,
                "<details class=\"skipped\" id=\"{skip_key}\">\n<summary>Skipped + <span class=\"count\" data-count=\"{}\">({})</span></summary>",
                skipped.len(),
                skipped.len()
            );
            entries_table(&mut out, skipped);
            out.push_str("</details>\n");
        }
        out.push_str("</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::super::{ReportEntry, ReportMeta};
    use super::*;
    use chrono::NaiveDate;

    fn empty() -> DiscrepancyReport {
        let d = NaiveDate::from_ymd_opt(2018, 7, 31).unwrap();
        DiscrepancyReport::empty(
            "EXOT-2017-24",
            d,
            ReportMeta {
                publisher: "APS".into(),
                document: "doc1053".into(),
                filename: "LY15578_proof_v2".into(),
                creation_date: NaiveDate::from_ymd_opt(2018, 10, 29).unwrap(),
            },
        )
    }

    #[test]
    fn empty_report_counts_zero() {
        let html = render_html(&empty());
        assert_eq!(html.matches("data-count=\"0\"").count(), 11);
        assert!(!html.contains("<details open"));
    }

    #[test]
    fn skipped_collapsed_with_count() {
        let mut r = empty();
        r.authors_missing_skip.push(ReportEntry::new("A", "x"));
        r.authors_missing_skip.push(ReportEntry::new("B", "y"));
        let html = render_html(&r);
        assert!(html.contains(
            "<details class=\"skipped\" id=\"authors_missing_skip\">\n<summary>Skipped + <span class=\"count\" data-count=\"2\">(2)</span>"
        ));
    }

    #[test]
    fn names_escaped() {
        let mut r = empty();
        r.authors_missing_list.push(ReportEntry::new("<script>", "a & b"));
        let html = render_html(&r);
        assert!(html.contains("&lt;script&gt;"));
        assert!(!html.contains("<script>"));
        assert!(html.contains("a &amp; b"));
    }
}
