//! ToUnicode CMaps and per-font decoding.

use std::collections::BTreeMap;

use super::encoding::{glyph_to_unicode, BaseEncoding};
use super::lexer::{Lexer, Token};

/// Code-to-text mapping of one font resource.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FontMap {
    pub font_resource_name: String,
    pub code_to_unicode: BTreeMap<Vec<u8>, String>,
    /// `(low, high)` code ranges; both ends have the same byte length.
    pub codespace: Vec<(Vec<u8>, Vec<u8>)>,
}

impl FontMap {
    pub fn new(font_resource_name: impl Into<String>) -> Self {
        FontMap {
            font_resource_name: font_resource_name.into(),
            ..Default::default()
        }
    }

    pub fn insert(&mut self, code: impl Into<Vec<u8>>, text: impl Into<String>) -> &mut Self {
        self.code_to_unicode.insert(code.into(), text.into());
        self
    }

    /// Byte length of the code starting at `bytes[0]`.
    pub fn code_len(&self, bytes: &[u8]) -> usize {
        if !self.codespace.is_empty() {
            let mut lens: Vec<usize> = self.codespace.iter().map(|(lo, _)| lo.len()).collect();
            lens.sort_unstable();
            lens.dedup();
            for n in lens {
                if n > bytes.len() {
                    continue;
                }
                let code = &bytes[..n];
                let fits = self.codespace.iter().any(|(lo, hi)| {
                    lo.len() == n && code.iter().zip(lo.iter().zip(hi)).all(|(c, (l, h))| l <= c && c <= h)
                });
                if fits {
                    return n;
                }
            }
            return 1;
        }
        let mut key_lens = self.code_to_unicode.keys().map(Vec::len);
        match key_lens.next() {
            Some(first) if key_lens.all(|l| l == first) => first.max(1),
            _ => {
                // mixed widths without a codespace: longest key that matches
                self.code_to_unicode
                    .keys()
                    .filter(|k| bytes.starts_with(k))
                    .map(Vec::len)
                    .max()
                    .unwrap_or(1)
            }
        }
    }

    /// Parse a ToUnicode CMap stream (`bfchar`, `bfrange`, codespace ranges).
    pub fn parse_cmap(font_resource_name: &str, data: &[u8]) -> FontMap {
        let mut map = FontMap::new(font_resource_name);
        let mut lx = Lexer::new(data);
        let mut operands: Vec<Token> = Vec::new();
        while let Some(tok) = lx.next_token() {
            match tok {
                Token::Keyword(k) => {
                    match k.as_str() {
                        "begincodespacerange" => {
                            while let Some(Token::Str(lo)) = lx.next_token() {
                                if let Some(Token::Str(hi)) = lx.next_token() {
                                    if lo.len() == hi.len() && !lo.is_empty() {
                                        map.codespace.push((lo, hi));
                                    }
                                }
                            }
                        }
                        "beginbfchar" => {
                            while let Some(Token::Str(src)) = lx.next_token() {
                                match lx.next_token() {
                                    Some(Token::Str(dst)) => {
                                        map.code_to_unicode.insert(src, utf16be(&dst));
                                    }
                                    Some(Token::Name(glyph)) => {
                                        if let Some(text) = glyph_to_unicode(&glyph) {
                                            map.code_to_unicode.insert(src, text);
                                        }
                                    }
                                    _ => break,
                                }
                            }
                        }
                        "beginbfrange" => {
                            while let Some(Token::Str(lo)) = lx.next_token() {
                                let Some(Token::Str(hi)) = lx.next_token() else { break };
                                match lx.next_token() {
                                    Some(Token::Str(dst)) => map.insert_range(&lo, &hi, |offset| {
                                        let mut units = utf16_units(&dst);
                                        if let Some(last) = units.last_mut() {
                                            *last = last.wrapping_add(offset as u16);
                                        }
                                        String::from_utf16_lossy(&units)
                                    }),
                                    Some(Token::ArrayOpen) => {
                                        let mut dsts = Vec::new();
                                        while let Some(Token::Str(d)) = lx.next_token() {
                                            dsts.push(utf16be(&d));
                                        }
                                        map.insert_range(&lo, &hi, |offset| {
                                            dsts.get(offset as usize).cloned().unwrap_or_default()
                                        });
                                    }
                                    _ => break,
                                }
                            }
                        }
                        _ => {}
                    }
                    operands.clear();
                }
                other => operands.push(other),
            }
        }
        map.code_to_unicode.retain(|_, v| !v.is_empty());
        map
    }

    fn insert_range(&mut self, lo: &[u8], hi: &[u8], dst: impl Fn(u32) -> String) {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 4 {
            return;
        }
        let as_u32 = |b: &[u8]| b.iter().fold(0u32, |acc, x| acc << 8 | u32::from(*x));
        let (start, end) = (as_u32(lo), as_u32(hi));
        if end < start || end - start > 0xffff {
            return;
        }
        for code in start..=end {
            let bytes = code.to_be_bytes()[4 - lo.len()..].to_vec();
            self.code_to_unicode.insert(bytes, dst(code - start));
        }
    }
}

fn utf16_units(bytes: &[u8]) -> Vec<u16> {
    bytes
        .chunks(2)
        .map(|c| u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]))
        .collect()
}

fn utf16be(bytes: &[u8]) -> String {
    String::from_utf16_lossy(&utf16_units(bytes))
}

/// Everything needed to turn shown strings of one font into text.
#[derive(Debug, Clone)]
#[derive(Default)]
pub struct FontDecoder {
    pub to_unicode: Option<FontMap>,
    pub base: Option<BaseEncoding>,
    pub differences: BTreeMap<u8, String>,
    /// Type0 fonts default to two-byte codes.
    pub two_byte: bool,
}


impl FontDecoder {
    /// Mapped text, then the font's encoding, then StandardEncoding, then
    /// U+FFFD.
    pub fn decode(&self, bytes: &[u8]) -> String {
        let mut out = String::new();
        let mut i = 0;
        while i < bytes.len() {
            let n = match &self.to_unicode {
                Some(map) if !map.code_to_unicode.is_empty() || !map.codespace.is_empty() => {
                    map.code_len(&bytes[i..])
                }
                _ if self.two_byte => 2,
                _ => 1,
            }
            .min(bytes.len() - i);
            let code = &bytes[i..i + n];
            i += n;
            if let Some(text) = self.to_unicode.as_ref().and_then(|m| m.code_to_unicode.get(code)) {
                out.push_str(text);
                continue;
            }
            if n == 1 {
                let b = code[0];
                if let Some(text) = self.differences.get(&b) {
                    out.push_str(text);
                    continue;
                }
                let fallback = self
                    .base
                    .and_then(|e| e.decode(b))
                    .or_else(|| BaseEncoding::Standard.decode(b));
                if let Some(c) = fallback {
                    out.push(c);
                    continue;
                }
            }
            out.push('\u{fffd}');
        }
        out
    }
}
