//! Positioned text lines from a constrained PDF subset, plus a plain-text
//! fixture format.
//!
//! Supported: unencrypted PDF 1.4-1.7 with classic xref tables, Flate or
//! uncompressed content streams, `Tj`/`TJ`/`'`/`"` text operators,
//! `Td`/`TD`/`Tm`/`T*` positioning, ToUnicode CMaps with `bfchar`/`bfrange`.
//! Anything else is a named error.

mod cmap;
mod content;
mod encoding;
mod lexer;
pub mod writer;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;

use flate2::read::ZlibDecoder;
use thiserror::Error;

pub use cmap::{FontDecoder, FontMap};
pub use encoding::BaseEncoding;
use lexer::{find, Dict, Lexer, Object, Token};

#[derive(Debug, Error, PartialEq)]
pub enum ExtractError {
    #[error("unsupported container")]
    UnsupportedContainer,
    #[error("encryption unsupported")]
    Encrypted,
    #[error("unsupported stream filter: {0}")]
    UnsupportedFilter(String),
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("corrupt stream in object {0}: {1}")]
    CorruptStream(u32, String),
    #[error("no page tree found")]
    NoPages,
    #[error("line {line}: malformed y prefix {prefix:?}")]
    MalformedPrefix { line: usize, prefix: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextLine {
    pub y: f64,
    pub text: String,
}

/// One page of recovered text, lines top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct PageText {
    pub page_number: u32,
    pub lines: Vec<TextLine>,
}

impl PageText {
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().map(|l| l.text.as_str())
    }
}

/// Rounding quantum for merging fragments into one line.
pub const Y_QUANTUM: f64 = 0.5;

fn y_key(y: f64) -> i64 {
    (y / Y_QUANTUM).round() as i64
}

/// Group `(x, y, text)` fragments by rounded y; within a line, order by x
/// (stable) and join with single spaces. Lines come out top to bottom.
fn assemble(fragments: impl IntoIterator<Item = (f64, f64, String)>) -> Vec<TextLine> {
    let mut groups: BTreeMap<i64, Vec<(f64, f64, String)>> = BTreeMap::new();
    for (x, y, text) in fragments {
        groups.entry(y_key(y)).or_default().push((x, y, text));
    }
    groups
        .into_iter()
        .rev()
        .map(|(_, mut frags)| {
            frags.sort_by(|a, b| a.0.total_cmp(&b.0));
            let y = frags[0].1;
            let text = frags
                .iter()
                .map(|f| f.2.trim())
                .filter(|t| !t.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            TextLine { y, text }
        })
        .filter(|l| !l.text.is_empty())
        .collect()
}

struct Document {
    objects: HashMap<u32, Object>,
    trailer: Dict,
}

impl Document {
    fn parse(bytes: &[u8]) -> Result<Self, ExtractError> {
        let head = &bytes[..bytes.len().min(1024)];
        let start = find(head, b"%PDF-", 0).ok_or(ExtractError::UnsupportedContainer)?;

        let mut objects = HashMap::new();
        let mut trailer = Dict::new();
        let mut lx = Lexer::at(bytes, start + 5);
        // skip version token
        lx.next_token();

        loop {
            let before = lx.pos;
            let Some(tok) = lx.next_token() else { break };
            match tok {
                Token::Int(num) => {
                    let save = lx.pos;
                    let header = (lx.next_token(), lx.next_token());
                    if let (Some(Token::Int(_)), Some(Token::Keyword(k))) = header {
                        if k == "obj" {
                            let obj = Self::parse_indirect(&mut lx, num as u32)?;
                            objects.insert(num as u32, obj);
                            continue;
                        }
                    }
                    lx.pos = save;
                }
                Token::Keyword(k) if k == "xref" => {
                    // classic table; offsets are not needed since the body was scanned
                    match find(bytes, b"trailer", lx.pos) {
                        Some(p) => lx.pos = p,
                        None => break,
                    }
                }
                Token::Keyword(k) if k == "trailer" => {
                    if let Some(Object::Dict(d)) = lx.parse_object() {
                        for (k, v) in d {
                            trailer.insert(k, v);
                        }
                    }
                }
                _ => {}
            }
            if lx.pos == before {
                lx.pos += 1;
            }
        }

        let encrypted = trailer.contains_key("Encrypt")
            || objects.values().any(|o| {
                o.as_dict().is_some_and(|d| {
                    d.get("Type").and_then(Object::as_name) == Some("XRef") && d.contains_key("Encrypt")
                })
            });
        if encrypted {
            return Err(ExtractError::Encrypted);
        }
        Ok(Document { objects, trailer })
    }

    fn parse_indirect(lx: &mut Lexer<'_>, num: u32) -> Result<Object, ExtractError> {
        let obj = lx.parse_object().unwrap_or(Object::Null);
        let save = lx.pos;
        match (lx.next_token(), obj) {
            (Some(Token::Keyword(k)), Object::Dict(dict)) if k == "stream" => {
                let data = lx.data();
                let mut p = lx.pos;
                if data.get(p) == Some(&b'\r') {
                    p += 1;
                }
                if data.get(p) == Some(&b'\n') {
                    p += 1;
                }
                let declared = match dict.get("Length") {
                    Some(Object::Int(n)) if *n >= 0 => Some(*n as usize),
                    _ => None,
                };
                let end = declared
                    .filter(|n| {
                        let e = p + n;
                        e <= data.len() && {
                            let mut tail = Lexer::at(data, e);
                            tail.skip_ws();
                            data[tail.pos..].starts_with(b"endstream")
                        }
                    })
                    .map(|n| p + n)
                    .or_else(|| {
                        find(data, b"endstream", p).map(|e| {
                            let mut e = e;
                            if e > p && data[e - 1] == b'\n' {
                                e -= 1;
                            }
                            if e > p && data[e - 1] == b'\r' {
                                e -= 1;
                            }
                            e
                        })
                    })
                    .ok_or_else(|| ExtractError::CorruptStream(num, "missing endstream".into()))?;
                let raw = data[p..end].to_vec();
                lx.pos = find(data, b"endstream", end).map_or(data.len(), |e| e + 9);
                if dict.get("Type").and_then(Object::as_name) == Some("ObjStm") {
                    return Err(ExtractError::Unsupported("compressed object streams".into()));
                }
                Ok(Object::Stream(dict, raw))
            }
            (_, obj) => {
                lx.pos = save;
                Ok(obj)
            }
        }
    }

    fn resolve<'a>(&'a self, obj: &'a Object) -> &'a Object {
        let mut cur = obj;
        for _ in 0..32 {
            match cur {
                Object::Ref(n, _) => match self.objects.get(n) {
                    Some(o) => cur = o,
                    None => return &Object::Null,
                },
                other => return other,
            }
        }
        &Object::Null
    }

    fn get<'a>(&'a self, dict: &'a Dict, key: &str) -> Option<&'a Object> {
        dict.get(key).map(|o| self.resolve(o)).filter(|o| **o != Object::Null)
    }

    fn decode_stream(&self, obj: &Object) -> Result<Vec<u8>, ExtractError> {
        let (dict, raw) = match obj {
            Object::Stream(d, r) => (d, r),
            _ => return Ok(Vec::new()),
        };
        let filters: Vec<String> = match self.get(dict, "Filter") {
            None => Vec::new(),
            Some(Object::Name(n)) => vec![n.clone()],
            Some(Object::Array(a)) => a
                .iter()
                .filter_map(|f| self.resolve(f).as_name().map(str::to_string))
                .collect(),
            Some(_) => return Err(ExtractError::UnsupportedFilter("non-name filter".into())),
        };
        let mut data = raw.clone();
        for f in filters {
            match f.as_str() {
                "FlateDecode" | "Fl" => {
                    let predictor = self
                        .get(dict, "DecodeParms")
                        .and_then(Object::as_dict)
                        .and_then(|p| p.get("Predictor"))
                        .and_then(Object::as_f64)
                        .unwrap_or(1.0);
                    if predictor > 1.0 {
                        return Err(ExtractError::UnsupportedFilter("FlateDecode with predictor".into()));
                    }
                    let mut out = Vec::new();
                    ZlibDecoder::new(&data[..])
                        .read_to_end(&mut out)
                        .map_err(|e| ExtractError::CorruptStream(0, e.to_string()))?;
                    data = out;
                }
                other => return Err(ExtractError::UnsupportedFilter(other.to_string())),
            }
        }
        Ok(data)
    }

    fn catalog(&self) -> Option<&Dict> {
        if let Some(root) = self.get(&self.trailer, "Root").and_then(Object::as_dict) {
            return Some(root);
        }
        let mut nums: Vec<&u32> = self.objects.keys().collect();
        nums.sort();
        nums.into_iter()
            .filter_map(|n| self.objects[n].as_dict())
            .find(|d| d.get("Type").and_then(Object::as_name) == Some("Catalog"))
    }

    /// Leaf pages in document order, each with its effective resources.
    fn pages(&self) -> Result<Vec<(&Dict, Option<&Dict>)>, ExtractError> {
        let catalog = self.catalog().ok_or(ExtractError::NoPages)?;
        let root = catalog.get("Pages").ok_or(ExtractError::NoPages)?;
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        self.walk(root, None, &mut out, &mut seen);
        Ok(out)
    }

    fn walk<'a>(
        &'a self,
        node: &'a Object,
        inherited: Option<&'a Dict>,
        out: &mut Vec<(&'a Dict, Option<&'a Dict>)>,
        seen: &mut HashSet<u32>,
    ) {
        if let Object::Ref(n, _) = node {
            if !seen.insert(*n) {
                return;
            }
        }
        let Some(dict) = self.resolve(node).as_dict() else { return };
        let resources = self.get(dict, "Resources").and_then(Object::as_dict).or(inherited);
        let kids = self.get(dict, "Kids");
        match (dict.get("Type").and_then(Object::as_name), kids) {
            (Some("Pages"), Some(Object::Array(kids))) | (None, Some(Object::Array(kids))) => {
                for kid in kids {
                    self.walk(kid, resources, out, seen);
                }
            }
            _ => out.push((dict, resources)),
        }
    }

    fn font_decoders(&self, resources: Option<&Dict>) -> Result<HashMap<String, FontDecoder>, ExtractError> {
        let mut fonts = HashMap::new();
        let Some(font_dict) = resources
            .and_then(|r| self.get(r, "Font"))
            .and_then(Object::as_dict)
        else {
            return Ok(fonts);
        };
        for (name, font_ref) in font_dict {
            let Some(font) = self.resolve(font_ref).as_dict() else { continue };
            let mut dec = FontDecoder {
                two_byte: font.get("Subtype").and_then(Object::as_name) == Some("Type0"),
                ..Default::default()
            };
            if let Some(stream) = self.get(font, "ToUnicode") {
                let data = self.decode_stream(stream)?;
                dec.to_unicode = Some(FontMap::parse_cmap(name, &data));
            }
            match self.get(font, "Encoding") {
                Some(Object::Name(n)) => dec.base = BaseEncoding::from_name(n),
                Some(Object::Dict(enc)) => {
                    dec.base = self
                        .get(enc, "BaseEncoding")
                        .and_then(Object::as_name)
                        .and_then(BaseEncoding::from_name);
                    if let Some(Object::Array(diffs)) = self.get(enc, "Differences") {
                        let mut code: i64 = 0;
                        for item in diffs {
                            match self.resolve(item) {
                                Object::Int(c) => code = *c,
                                Object::Name(glyph) => {
                                    if let (Ok(c), Some(text)) =
                                        (u8::try_from(code), encoding::glyph_to_unicode(glyph))
                                    {
                                        dec.differences.insert(c, text);
                                    }
                                    code += 1;
                                }
                                _ => {}
                            }
                        }
                    }
                }
                _ => {}
            }
            fonts.insert(name.clone(), dec);
        }
        Ok(fonts)
    }

    fn page_content(&self, page: &Dict) -> Result<Vec<u8>, ExtractError> {
        let mut data = Vec::new();
        let parts: Vec<&Object> = match page.get("Contents").map(|c| (c, self.resolve(c))) {
            None => Vec::new(),
            Some((_, Object::Array(items))) => items.iter().map(|i| self.resolve(i)).collect(),
            Some((_, obj)) => vec![obj],
        };
        for part in parts {
            data.extend(self.decode_stream(part)?);
            data.push(b'\n');
        }
        Ok(data)
    }
}

/// Text lines per page, in page-tree order.
pub fn extract_text(pdf_bytes: &[u8]) -> Result<Vec<PageText>, ExtractError> {
    let doc = Document::parse(pdf_bytes)?;
    let mut out = Vec::new();
    for (i, (page, resources)) in doc.pages()?.into_iter().enumerate() {
        let fonts = doc.font_decoders(resources)?;
        let content = doc.page_content(page)?;
        let fragments = content::interpret(&content, &fonts);
        out.push(PageText {
            page_number: i as u32 + 1,
            lines: assemble(fragments.into_iter().map(|f| (f.x, f.y, f.text))),
        });
    }
    Ok(out)
}

/// True when the bytes start like a PDF file.
pub fn looks_like_pdf(bytes: &[u8]) -> bool {
    find(&bytes[..bytes.len().min(1024)], b"%PDF-", 0).is_some()
}

const SYNTHETIC_TOP: f64 = 1000.0;
const SYNTHETIC_STEP: f64 = 12.0;

/// Parse the fixture format: pages separated by a line holding a single form
/// feed, each line optionally prefixed `y=<number>|`. Unprefixed lines are
/// placed 12 units below the previous line.
pub fn load_pretokenized(text: &str) -> Result<Vec<PageText>, ExtractError> {
    let mut pages = Vec::new();
    let mut current: Vec<(f64, f64, String)> = Vec::new();
    let mut last_y = SYNTHETIC_TOP + SYNTHETIC_STEP;
    let mut seq = 0.0;

    let flush = |current: &mut Vec<(f64, f64, String)>, pages: &mut Vec<PageText>| {
        pages.push(PageText {
            page_number: pages.len() as u32 + 1,
            lines: assemble(current.drain(..)),
        });
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim_matches(' ') == "\u{c}" {
            flush(&mut current, &mut pages);
            last_y = SYNTHETIC_TOP + SYNTHETIC_STEP;
            continue;
        }
        let (y, body) = match line.strip_prefix("y=") {
            Some(rest) => {
                let (num, body) = rest.split_once('|').ok_or_else(|| ExtractError::MalformedPrefix {
                    line: idx + 1,
                    prefix: line.chars().take(16).collect(),
                })?;
                let y: f64 = num.trim().parse().map_err(|_| ExtractError::MalformedPrefix {
                    line: idx + 1,
                    prefix: format!("y={num}|"),
                })?;
                if !y.is_finite() {
                    return Err(ExtractError::MalformedPrefix {
                        line: idx + 1,
                        prefix: format!("y={num}|"),
                    });
                }
                (y, body)
            }
            None => (last_y - SYNTHETIC_STEP, line),
        };
        if body.trim().is_empty() {
            continue;
        }
        last_y = y;
        // input order stands in for x
        current.push((seq, y, body.to_string()));
        seq += 1.0;
    }
    if !current.is_empty() || pages.is_empty() {
        flush(&mut current, &mut pages);
    }
    Ok(pages)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pretokenized_plain_lines() {
        let pages = load_pretokenized("first\nsecond\n").unwrap();
        assert_eq!(pages.len(), 1);
        assert_eq!(pages[0].lines.len(), 2);
        assert!(pages[0].lines[0].y > pages[0].lines[1].y);
        assert_eq!(pages[0].lines[0].text, "first");
    }

    #[test]
    fn pretokenized_same_y_merges() {
        let pages = load_pretokenized("y=700|A\ny=700|B").unwrap();
        assert_eq!(pages[0].lines.len(), 1);
        assert_eq!(pages[0].lines[0].text, "A B");
    }

    #[test]
    fn pretokenized_quantum() {
        let pages = load_pretokenized("y=700|A\ny=700.2|B\ny=699|C").unwrap();
        let texts: Vec<&str> = pages[0].texts().collect();
        assert_eq!(texts, ["A B", "C"]);
    }

    #[test]
    fn pretokenized_form_feed_pages() {
        let pages = load_pretokenized("a\n\u{c}\nb\n").unwrap();
        assert_eq!(pages.len(), 2);
        assert_eq!(pages[1].page_number, 2);
        assert_eq!(pages[1].lines[0].text, "b");
    }

    #[test]
    fn pretokenized_bad_prefix() {
        let err = load_pretokenized("ok\ny=abc|x").unwrap_err();
        assert_eq!(
            err,
            ExtractError::MalformedPrefix {
                line: 2,
                prefix: "y=abc|".into()
            }
        );
        assert!(load_pretokenized("y=12 no bar").is_err());
    }

    #[test]
    fn pretokenized_sorted_top_down() {
        let pages = load_pretokenized("y=100|low\ny=500|high").unwrap();
        let texts: Vec<&str> = pages[0].texts().collect();
        assert_eq!(texts, ["high", "low"]);
    }

    #[test]
    fn rejects_non_pdf() {
        assert_eq!(extract_text(b"not a pdf").unwrap_err(), ExtractError::UnsupportedContainer);
    }
}
