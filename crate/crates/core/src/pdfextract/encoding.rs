//! Single-byte base encodings and glyph-name lookup.

use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseEncoding {
    Standard,
    WinAnsi,
    MacRoman,
}

impl BaseEncoding {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "StandardEncoding" => Some(BaseEncoding::Standard),
            "WinAnsiEncoding" => Some(BaseEncoding::WinAnsi),
            "MacRomanEncoding" => Some(BaseEncoding::MacRoman),
            _ => None,
        }
    }

    pub fn decode(self, code: u8) -> Option<char> {
        match self {
            BaseEncoding::Standard => standard(code),
            BaseEncoding::WinAnsi => win_ansi(code),
            BaseEncoding::MacRoman => mac_roman(code),
        }
    }
}

/// Adobe StandardEncoding.
pub fn standard(code: u8) -> Option<char> {
    Some(match code {
        0x27 => '\u{2019}',
        0x60 => '\u{2018}',
        0x20..=0x7e => code as char,
        0xa1 => '¡',
        0xa2 => '¢',
        0xa3 => '£',
        0xa4 => '\u{2044}',
        0xa5 => '¥',
        0xa6 => 'ƒ',
        0xa7 => '§',
        0xa8 => '¤',
        0xa9 => '\'',
        0xaa => '\u{201c}',
        0xab => '«',
        0xac => '\u{2039}',
        0xad => '\u{203a}',
        0xae => '\u{fb01}',
        0xaf => '\u{fb02}',
        0xb1 => '\u{2013}',
        0xb2 => '\u{2020}',
        0xb3 => '\u{2021}',
        0xb4 => '·',
        0xb6 => '¶',
        0xb7 => '\u{2022}',
        0xb8 => '\u{201a}',
        0xb9 => '\u{201e}',
        0xba => '\u{201d}',
        0xbb => '»',
        0xbc => '\u{2026}',
        0xbd => '\u{2030}',
        0xbf => '¿',
        0xc1 => '`',
        0xc2 => '´',
        0xc3 => '\u{2c6}',
        0xc4 => '\u{2dc}',
        0xc5 => '¯',
        0xc6 => '\u{2d8}',
        0xc7 => '\u{2d9}',
        0xc8 => '¨',
        0xca => '\u{2da}',
        0xcb => '¸',
        0xcd => '\u{2dd}',
        0xce => '\u{2db}',
        0xcf => '\u{2c7}',
        0xd0 => '\u{2014}',
        0xe1 => 'Æ',
        0xe3 => 'ª',
        0xe8 => 'Ł',
        0xe9 => 'Ø',
        0xea => 'Œ',
        0xeb => 'º',
        0xf1 => 'æ',
        0xf5 => 'ı',
        0xf8 => 'ł',
        0xf9 => 'ø',
        0xfa => 'œ',
        0xfb => 'ß',
        _ => return None,
    })
}

const WIN_ANSI_HIGH: [Option<char>; 32] = [
    Some('€'), None, Some('‚'), Some('ƒ'), Some('„'), Some('…'), Some('†'), Some('‡'),
    Some('ˆ'), Some('‰'), Some('Š'), Some('‹'), Some('Œ'), None, Some('Ž'), None,
    None, Some('‘'), Some('’'), Some('“'), Some('”'), Some('•'), Some('–'), Some('—'),
    Some('˜'), Some('™'), Some('š'), Some('›'), Some('œ'), None, Some('ž'), Some('Ÿ'),
];

pub fn win_ansi(code: u8) -> Option<char> {
    match code {
        0x20..=0x7e | 0xa0..=0xff => Some(code as char),
        0x80..=0x9f => WIN_ANSI_HIGH[usize::from(code - 0x80)],
        _ => None,
    }
}

const MAC_ROMAN_HIGH: &str = "ÄÅÇÉÑÖÜáàâäãåçéèêëíìîïñóòôöõúùûü†°¢£§•¶ß®©™´¨≠ÆØ∞±≤≥¥µ∂∑∏π∫ªºΩæø¿¡¬√ƒ≈∆«»… ÀÃÕŒœ–—“”‘’÷◊ÿŸ⁄€‹›ﬁﬂ‡·‚„‰ÂÊÁËÈÍÎÏÌÓÔ\u{f8ff}ÒÚÛÙıˆ˜¯˘˙˚¸˝˛ˇ";

pub fn mac_roman(code: u8) -> Option<char> {
    match code {
        0x20..=0x7e => Some(code as char),
        0x80..=0xff => MAC_ROMAN_HIGH.chars().nth(usize::from(code - 0x80)),
        _ => None,
    }
}

const ACCENTS: [(&str, char); 13] = [
    ("acute", '\u{301}'),
    ("grave", '\u{300}'),
    ("circumflex", '\u{302}'),
    ("dieresis", '\u{308}'),
    ("tilde", '\u{303}'),
    ("caron", '\u{30c}'),
    ("cedilla", '\u{327}'),
    ("ring", '\u{30a}'),
    ("macron", '\u{304}'),
    ("breve", '\u{306}'),
    ("ogonek", '\u{328}'),
    ("dotaccent", '\u{307}'),
    ("hungarumlaut", '\u{30b}'),
];

const NAMED: [(&str, &str); 44] = [
    ("space", " "),
    ("exclam", "!"),
    ("quotedbl", "\""),
    ("numbersign", "#"),
    ("dollar", "$"),
    ("percent", "%"),
    ("ampersand", "&"),
    ("quoteright", "\u{2019}"),
    ("quoteleft", "\u{2018}"),
    ("quotesingle", "'"),
    ("parenleft", "("),
    ("parenright", ")"),
    ("asterisk", "*"),
    ("plus", "+"),
    ("comma", ","),
    ("hyphen", "-"),
    ("period", "."),
    ("slash", "/"),
    ("colon", ":"),
    ("semicolon", ";"),
    ("less", "<"),
    ("equal", "="),
    ("greater", ">"),
    ("question", "?"),
    ("at", "@"),
    ("bracketleft", "["),
    ("backslash", "\\"),
    ("bracketright", "]"),
    ("underscore", "_"),
    ("braceleft", "{"),
    ("bar", "|"),
    ("braceright", "}"),
    ("asciitilde", "~"),
    ("dagger", "\u{2020}"),
    ("daggerdbl", "\u{2021}"),
    ("endash", "\u{2013}"),
    ("emdash", "\u{2014}"),
    ("fi", "fi"),
    ("fl", "fl"),
    ("ff", "ff"),
    ("ffi", "ffi"),
    ("dotlessi", "ı"),
    ("germandbls", "ß"),
    ("bullet", "\u{2022}"),
];

const DIGITS: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

/// Unicode text for a glyph name: `uniXXXX`, `uXXXX`, plain letters,
/// digit names, common punctuation and letter+accent names (`ccaron`).
pub fn glyph_to_unicode(name: &str) -> Option<String> {
    let base = name.split('.').next().unwrap_or(name);
    if let Some(hex) = base.strip_prefix("uni") {
        if hex.len() >= 4 && hex.len() % 4 == 0 {
            let units: Option<Vec<u16>> = hex
                .as_bytes()
                .chunks(4)
                .map(|c| u16::from_str_radix(std::str::from_utf8(c).ok()?, 16).ok())
                .collect();
            return String::from_utf16(&units?).ok();
        }
    }
    if let Some(hex) = base.strip_prefix('u') {
        if (4..=6).contains(&hex.len()) && hex.chars().all(|c| c.is_ascii_hexdigit()) {
            return u32::from_str_radix(hex, 16)
                .ok()
                .and_then(char::from_u32)
                .map(String::from);
        }
    }
    let mut chars = base.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_ascii_alphabetic() {
            return Some(c.to_string());
        }
    }
    if let Some(d) = DIGITS.iter().position(|d| *d == base) {
        return Some(d.to_string());
    }
    if let Some((_, s)) = NAMED.iter().find(|(n, _)| *n == base) {
        return Some((*s).to_string());
    }
    if matches!(base, "AE" | "OE" | "ae" | "oe") {
        return Some(match base {
            "AE" => "Æ",
            "OE" => "Œ",
            "ae" => "æ",
            _ => "œ",
        }
        .to_string());
    }
    for (accent, mark) in ACCENTS {
        if let Some(letter) = base.strip_suffix(accent) {
            let mut lc = letter.chars();
            if let (Some(l), None) = (lc.next(), lc.next()) {
                if l.is_ascii_alphabetic() {
                    return Some([l, mark].iter().collect::<String>().nfc().collect());
                }
            }
            if letter.is_empty() {
                return None;
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_encoding() {
        assert_eq!(standard(b'A'), Some('A'));
        assert_eq!(standard(0x27), Some('’'));
        assert_eq!(standard(0xcf), Some('ˇ'));
        assert_eq!(standard(0xb2), Some('†'));
        assert_eq!(standard(0x80), None);
    }

    #[test]
    fn win_ansi_and_mac() {
        assert_eq!(win_ansi(0xe8), Some('è'));
        assert_eq!(win_ansi(0x9e), Some('ž'));
        assert_eq!(win_ansi(0x81), None);
        assert_eq!(mac_roman(0x80), Some('Ä'));
        assert_eq!(mac_roman(0xff), Some('ˇ'));
        assert_eq!(MAC_ROMAN_HIGH.chars().count(), 128);
    }

    #[test]
    fn glyph_names() {
        assert_eq!(glyph_to_unicode("A").as_deref(), Some("A"));
        assert_eq!(glyph_to_unicode("ccaron").as_deref(), Some("č"));
        assert_eq!(glyph_to_unicode("zcaron").as_deref(), Some("ž"));
        assert_eq!(glyph_to_unicode("Eacute").as_deref(), Some("É"));
        assert_eq!(glyph_to_unicode("uni017E").as_deref(), Some("ž"));
        assert_eq!(glyph_to_unicode("u1F600").as_deref(), Some("😀"));
        assert_eq!(glyph_to_unicode("seven").as_deref(), Some("7"));
        assert_eq!(glyph_to_unicode("dagger").as_deref(), Some("†"));
        assert_eq!(glyph_to_unicode("a.sc").as_deref(), Some("a"));
        assert_eq!(glyph_to_unicode("caron"), None);
        assert_eq!(glyph_to_unicode("unknownglyph"), None);
    }
}
