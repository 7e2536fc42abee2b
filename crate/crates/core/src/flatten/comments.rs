//! Comment removal that respects escapes, `\verb` and verbatim-like
//! environments.

/// Environments whose bodies are copied untouched.
pub const DEFAULT_VERBATIM_ENVS: [&str; 2] = ["verbatim", "lstlisting"];

/// Byte offset of the comment-starting `%` in `line`, if any.
///
/// A `%` preceded by a backslash is escaped; `\\%` is an escaped backslash
/// followed by a comment. The body of `\verb<d>...<d>` is skipped.
pub fn comment_start(line: &str) -> Option<usize> {
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                if line[i..].starts_with("\\verb") {
                    let mut j = i + 5;
                    if bytes.get(j) == Some(&b'*') {
                        j += 1;
                    }
                    match line[j..].chars().next() {
                        Some(d) if !d.is_alphabetic() && !d.is_whitespace() => {
                            let body = j + d.len_utf8();
                            {
                                let end = line[body..].find(d)?;
                                i = body + end + d.len_utf8();
                                continue;
                            }
                        }
                        _ => {}
                    }
                }
                i += 2;
            }
            b'%' => return Some(i),
            _ => i += 1,
        }
    }
    None
}

fn opens_env<'a>(line: &str, envs: &[&'a str]) -> Option<(usize, &'a str)> {
    envs.iter()
        .filter_map(|e| line.find(&format!("\\begin{{{e}}}")).map(|p| (p, *e)))
        .min_by_key(|(p, _)| *p)
}

/// Remove comments with the default verbatim environments.
pub fn strip_comments(tex: &str) -> String {
    strip_comments_with(tex, &DEFAULT_VERBATIM_ENVS)
}

/// Remove comments. A line that is only a comment disappears entirely; a
/// `%` directly after non-space text is kept bare so the line join it
/// encodes survives; otherwise the comment and the whitespace before it go.
pub fn strip_comments_with(tex: &str, verbatim_envs: &[&str]) -> String {
    let mut out = String::with_capacity(tex.len());
    let mut in_verbatim: Option<String> = None;
    for raw in tex.split_inclusive('\n') {
        let (line, newline) = match raw.strip_suffix('\n') {
            Some(l) => (l, "\n"),
            None => (raw, ""),
        };
        if let Some(env) = &in_verbatim {
            out.push_str(raw);
            if line.contains(&format!("\\end{{{env}}}")) {
                in_verbatim = None;
            }
            continue;
        }
        // part of the line before a verbatim opening is ordinary text
        let (code, verb_tail) = match opens_env(line, verbatim_envs) {
            Some((pos, env)) => {
                let rest = &line[pos..];
                if !rest.contains(&format!("\\end{{{env}}}")) {
                    in_verbatim = Some(env.to_string());
                }
                (&line[..pos], rest)
            }
            None => (line, ""),
        };
        match comment_start(code) {
            None => {
                out.push_str(code);
                out.push_str(verb_tail);
                out.push_str(newline);
            }
            Some(pos) => {
                let before = &code[..pos];
                if before.trim().is_empty() && verb_tail.is_empty() {
                    continue;
                }
                if !before.is_empty() && !before.ends_with(char::is_whitespace) {
                    out.push_str(before);
                    out.push('%');
                } else {
                    out.push_str(before.trim_end());
                }
                if !verb_tail.is_empty() {
                    // the comment swallowed the verbatim opening
                    in_verbatim = None;
                }
                out.push_str(newline);
            }
        }
    }
    out
}
