use serde::{Deserialize, Serialize};

/// Punctuation pattern of a given-name initials group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InitialsClass {
    /// `X.`
    Dot,
    /// `X.Y.` (and longer dotted chains)
    DotDot,
    /// `X.-Y.`
    DotHyphen,
    /// `X-Y.`
    HyphenDot,
    Other,
}

/// Class plus whether the group contained internal whitespace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialsShape {
    pub class: InitialsClass,
    pub spaced: bool,
}

/// Classify initials such as `J.-B.` or `J. B.`.
///
/// An initial is an uppercase letter optionally followed by lowercase letters
/// (`Ch.`, `Yu.`). Whitespace is ignored for classification and reported
/// through [`InitialsShape::spaced`].
pub fn classify_initials(initials: &str) -> InitialsShape {
    let trimmed = initials.trim();
    let spaced = trimmed.chars().any(char::is_whitespace);
    let compact: Vec<char> = trimmed.chars().filter(|c| !c.is_whitespace()).collect();
    InitialsShape {
        class: classify_compact(&compact),
        spaced,
    }
}

#[derive(Debug, PartialEq)]
enum Tok {
    Initial,
    Dot,
    Hyphen,
}

fn tokenize(chars: &[char]) -> Option<Vec<Tok>> {
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_uppercase() {
            i += 1;
            while i < chars.len() && chars[i].is_lowercase() {
                i += 1;
            }
            toks.push(Tok::Initial);
        } else if c == '.' {
            toks.push(Tok::Dot);
            i += 1;
        } else if c == '-' {
            toks.push(Tok::Hyphen);
            i += 1;
        } else {
            return None;
        }
    }
    Some(toks)
}

fn classify_compact(chars: &[char]) -> InitialsClass {
    use Tok::*;
    let Some(toks) = tokenize(chars) else {
        return InitialsClass::Other;
    };
    match toks.as_slice() {
        [Initial, Dot] => InitialsClass::Dot,
        [Initial, Dot, Initial, Dot] => InitialsClass::DotDot,
        [Initial, Dot, Hyphen, Initial, Dot] => InitialsClass::DotHyphen,
        [Initial, Hyphen, Initial, Dot] => InitialsClass::HyphenDot,
        longer if longer.len() > 4 && longer.chunks(2).all(|c| c == [Initial, Dot]) => {
            InitialsClass::DotDot
        }
        _ => InitialsClass::Other,
    }
}

/// Split a printed name into its leading initials and the remainder.
///
/// Leading tokens count as initials while they look like `X.`, `X.-Y.`,
/// `X-Y.` or a bare capital, and at least one token is left for the family
/// name.
pub fn split_printed_name(printed: &str) -> (String, String) {
    let tokens: Vec<&str> = printed.split_whitespace().collect();
    let mut n = 0;
    while n + 1 < tokens.len() && looks_like_initial(tokens[n]) {
        n += 1;
    }
    (tokens[..n].join(" "), tokens[n..].join(" "))
}

fn looks_like_initial(tok: &str) -> bool {
    let chars: Vec<char> = tok.chars().collect();
    if chars.len() == 1 {
        return chars[0].is_uppercase();
    }
    let has_punct = chars.iter().any(|c| *c == '.' || *c == '-');
    let letters = chars.iter().filter(|c| c.is_alphabetic()).count();
    has_punct
        && chars.first().is_some_and(|c| c.is_uppercase())
        && chars.iter().all(|c| c.is_alphabetic() || *c == '.' || *c == '-')
        && letters <= 4
        && (tok.ends_with('.') || tok.contains(".-"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(s: &str) -> (InitialsClass, bool) {
        let s = classify_initials(s);
        (s.class, s.spaced)
    }

    #[test]
    fn four_patterns() {
        assert_eq!(shape("J."), (InitialsClass::Dot, false));
        assert_eq!(shape("J.B."), (InitialsClass::DotDot, false));
        assert_eq!(shape("J.-B."), (InitialsClass::DotHyphen, false));
        assert_eq!(shape("J-B."), (InitialsClass::HyphenDot, false));
    }

    #[test]
    fn spacing_flag() {
        assert_eq!(shape("J. B."), (InitialsClass::DotDot, true));
        assert_eq!(shape("J. -B."), (InitialsClass::DotHyphen, true));
        assert_eq!(shape("  J.  "), (InitialsClass::Dot, false));
    }

    #[test]
    fn multi_letter_initials() {
        assert_eq!(shape("Ch."), (InitialsClass::Dot, false));
        assert_eq!(shape("Yu.M."), (InitialsClass::DotDot, false));
        assert_eq!(shape("A.B.C."), (InitialsClass::DotDot, false));
    }

    #[test]
    fn fallback() {
        assert_eq!(shape("Ω").0, InitialsClass::Other);
        assert_eq!(shape("J").0, InitialsClass::Other);
        assert_eq!(shape("").0, InitialsClass::Other);
        assert_eq!(shape("J..").0, InitialsClass::Other);
        assert_eq!(shape("j.").0, InitialsClass::Other);
    }

    #[test]
    fn split_names() {
        assert_eq!(
            split_printed_name("J.-B. De Vivie"),
            ("J.-B.".into(), "De Vivie".into())
        );
        assert_eq!(split_printed_name("J. B. Smith"), ("J. B.".into(), "Smith".into()));
        assert_eq!(split_printed_name("J Smith"), ("J".into(), "Smith".into()));
        assert_eq!(split_printed_name("Smith"), (String::new(), "Smith".into()));
        assert_eq!(split_printed_name("X. Nonamež ciž c"), ("X.".into(), "Nonamež ciž c".into()));
    }
}
