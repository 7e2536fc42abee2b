use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Options for [`normalize_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalizeOptions {
    /// Drop combining marks after decomposition ("Università" == "Universita").
    pub fold_accents: bool,
}

/// Compatibility decomposition, whitespace collapsed to single spaces,
/// trimmed and case folded. Accents survive as combining marks.
pub fn normalize(s: &str) -> String {
    normalize_with(s, NormalizeOptions::default())
}

/// Same as [`normalize`] with combining marks removed.
pub fn normalize_folded(s: &str) -> String {
    normalize_with(s, NormalizeOptions { fold_accents: true })
}

pub fn normalize_with(s: &str, opts: NormalizeOptions) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.nfkd() {
        if opts.fold_accents && is_combining_mark(c) {
            continue;
        }
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(c.to_lowercase());
    }
    out
}

/// Strip accents without touching case or spacing. Used for collation keys.
pub fn fold_accents(s: &str) -> String {
    s.nfd().filter(|c| !is_combining_mark(*c)).collect()
}
