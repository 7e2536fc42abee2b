//! Minimal PDF writer for fixtures: text placed with `Td`, strings encoded
//! through an inverted [`FontMap`] and a matching ToUnicode CMap.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;

use flate2::write::ZlibEncoder;
use flate2::Compression;
use thiserror::Error;

use super::cmap::FontMap;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WriteError {
    #[error("font {font:?} cannot encode {ch:?}")]
    Unmappable { font: String, ch: char },
    #[error("unknown font resource {0:?}")]
    UnknownFont(String),
}

/// Resource name of the built-in font that writes printable ASCII as-is and
/// carries no ToUnicode map.
pub const BUILTIN_FONT: &str = "F0";

/// One positioned string.
#[derive(Debug, Clone, PartialEq)]
pub struct TextRun {
    pub font: String,
    pub x: f64,
    pub y: f64,
    pub text: String,
    /// Text rise (`Ts`), used for superscripts.
    pub rise: f64,
}

impl TextRun {
    pub fn new(font: &str, x: f64, y: f64, text: impl Into<String>) -> Self {
        TextRun {
            font: font.to_string(),
            x,
            y,
            text: text.into(),
            rise: 0.0,
        }
    }

    pub fn raised(mut self, rise: f64) -> Self {
        self.rise = rise;
        self
    }
}

/// Builder for small synthetic documents.
#[derive(Debug, Clone, Default)]
pub struct SyntheticPdf {
    fonts: Vec<FontMap>,
    pages: Vec<Vec<TextRun>>,
    compress: bool,
    nested_tree: bool,
    encrypt: bool,
    filter_override: Option<String>,
}

struct Encoder<'a> {
    name: &'a str,
    /// text -> shortest code, longest texts tried first
    inverse: Vec<(Vec<char>, Vec<u8>)>,
}

impl<'a> Encoder<'a> {
    fn new(map: &'a FontMap) -> Self {
        let mut best: BTreeMap<&str, &Vec<u8>> = BTreeMap::new();
        for (code, text) in &map.code_to_unicode {
            let slot = best.entry(text.as_str()).or_insert(code);
            if code.len() < slot.len() {
                *slot = code;
            }
        }
        let mut inverse: Vec<(Vec<char>, Vec<u8>)> = best
            .into_iter()
            .map(|(t, c)| (t.chars().collect(), c.clone()))
            .collect();
        inverse.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Encoder {
            name: &map.font_resource_name,
            inverse,
        }
    }

    fn can_encode(&self, c: char) -> bool {
        self.inverse.iter().any(|(t, _)| t.as_slice() == [c])
    }

    fn encode(&self, text: &str) -> Result<Vec<u8>, WriteError> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        'outer: while i < chars.len() {
            for (t, code) in &self.inverse {
                if !t.is_empty() && chars[i..].starts_with(t) {
                    out.extend(code);
                    i += t.len();
                    continue 'outer;
                }
            }
            return Err(WriteError::Unmappable {
                font: self.name.to_string(),
                ch: chars[i],
            });
        }
        Ok(out)
    }
}

fn encode_builtin(text: &str) -> Result<Vec<u8>, WriteError> {
    text.chars()
        .map(|c| match c {
            ' '..='~' if c != '\'' && c != '`' => Ok(c as u8),
            _ => Err(WriteError::Unmappable {
                font: BUILTIN_FONT.to_string(),
                ch: c,
            }),
        })
        .collect()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02X}")).collect()
}

fn utf16_hex(text: &str) -> String {
    text.encode_utf16().map(|u| format!("{u:04X}")).collect()
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

/// Serialize a font map as a ToUnicode CMap.
pub fn write_cmap(map: &FontMap) -> String {
    let mut s = String::from(
        "/CIDInit /ProcSet findresource begin\n12 dict begin\nbegincmap\n\
         /CMapName /Synthetic def\n/CMapType 2 def\n",
    );
    let ranges: Vec<(Vec<u8>, Vec<u8>)> = if map.codespace.is_empty() {
        let mut lens: Vec<usize> = map.code_to_unicode.keys().map(Vec::len).collect();
        lens.sort_unstable();
        lens.dedup();
        lens.into_iter().map(|n| (vec![0u8; n], vec![0xffu8; n])).collect()
    } else {
        map.codespace.clone()
    };
    let _ = writeln!(s, "{} begincodespacerange", ranges.len());
    for (lo, hi) in &ranges {
        let _ = writeln!(s, "<{}> <{}>", hex(lo), hex(hi));
    }
    s.push_str("endcodespacerange\n");
    let entries: Vec<_> = map.code_to_unicode.iter().collect();
    for chunk in entries.chunks(100) {
        let _ = writeln!(s, "{} beginbfchar", chunk.len());
        for (code, text) in chunk {
            let _ = writeln!(s, "<{}> <{}>", hex(code), utf16_hex(text));
        }
        s.push_str("endbfchar\n");
    }
    s.push_str("endcmap\nCMapName currentdict /CMap defineresource pop\nend\nend\n");
    s
}

impl SyntheticPdf {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a font; runs refer to it by `font_resource_name`.
    pub fn font(mut self, map: FontMap) -> Self {
        self.fonts.push(map);
        self
    }

    pub fn page(mut self, runs: Vec<TextRun>) -> Self {
        self.pages.push(runs);
        self
    }

    /// Flate-compress content streams.
    pub fn compress(mut self, on: bool) -> Self {
        self.compress = on;
        self
    }

    /// Put pages under an intermediate `Pages` node and the fonts on the
    /// root node, so they are reached through inheritance.
    pub fn nested_tree(mut self, on: bool) -> Self {
        self.nested_tree = on;
        self
    }

    /// Add an `/Encrypt` entry to the trailer.
    pub fn encrypted(mut self, on: bool) -> Self {
        self.encrypt = on;
        self
    }

    /// Declare content streams with this filter name; data is left as is.
    pub fn declared_filter(mut self, filter: &str) -> Self {
        self.filter_override = Some(filter.to_string());
        self
    }

    fn content(&self, runs: &[TextRun]) -> Result<Vec<u8>, WriteError> {
        let encoders: BTreeMap<&str, Encoder<'_>> = self
            .fonts
            .iter()
            .map(|f| (f.font_resource_name.as_str(), Encoder::new(f)))
            .collect();
        let mut s = String::new();
        for run in runs {
            let show = if run.font == BUILTIN_FONT {
                format!("<{}> Tj", hex(&encode_builtin(&run.text)?))
            } else {
                let enc = encoders
                    .get(run.font.as_str())
                    .ok_or_else(|| WriteError::UnknownFont(run.font.clone()))?;
                if run.text.contains(' ') && !enc.can_encode(' ') {
                    // words separated by a wide kern instead of a space glyph
                    let mut parts = Vec::new();
                    for word in run.text.split(' ').filter(|w| !w.is_empty()) {
                        parts.push(format!("<{}>", hex(&enc.encode(word)?)));
                    }
                    format!("[{}] TJ", parts.join(" -300 "))
                } else {
                    format!("<{}> Tj", hex(&enc.encode(&run.text)?))
                }
            };
            let _ = writeln!(
                s,
                "BT /{} 10 Tf {} Ts {} {} Td {} ET",
                run.font,
                fmt_num(run.rise),
                fmt_num(run.x),
                fmt_num(run.y),
                show
            );
        }
        Ok(s.into_bytes())
    }

    pub fn build(&self) -> Result<Vec<u8>, WriteError> {
        let mut objects: BTreeMap<u32, Vec<u8>> = BTreeMap::new();
        let mut next = 3u32;
        let mut alloc = || {
            let n = next;
            next += 1;
            n
        };

        // fonts
        let mut font_entries = format!("/{BUILTIN_FONT} << /Type /Font /Subtype /Type1 /BaseFont /Helvetica >>");
        for f in &self.fonts {
            let cmap_id = alloc();
            let font_id = alloc();
            let cmap = write_cmap(f);
            objects.insert(cmap_id, stream_object("", cmap.as_bytes()));
            let two_byte = f.code_to_unicode.keys().any(|k| k.len() > 1)
                || f.codespace.iter().any(|(lo, _)| lo.len() > 1);
            let subtype = if two_byte {
                "/Subtype /Type0 /Encoding /Identity-H"
            } else {
                "/Subtype /Type3"
            };
            objects.insert(
                font_id,
                format!(
                    "<< /Type /Font {subtype} /BaseFont /Synthetic{font_id} /ToUnicode {cmap_id} 0 R >>"
                )
                .into_bytes(),
            );
            let _ = write!(font_entries, " /{} {font_id} 0 R", f.font_resource_name);
        }
        let resources = format!("<< /Font << {font_entries} >> >>");

        // pages
        let mid_id = if self.nested_tree { Some(alloc()) } else { None };
        let parent = mid_id.unwrap_or(2);
        let mut page_ids = Vec::new();
        for runs in &self.pages {
            let content_id = alloc();
            let page_id = alloc();
            let data = self.content(runs)?;
            let (extra, body) = match (&self.filter_override, self.compress) {
                (Some(f), _) => (format!("/Filter /{f}"), data),
                (None, true) => {
                    let mut z = ZlibEncoder::new(Vec::new(), Compression::default());
                    z.write_all(&data).expect("in-memory write");
                    ("/Filter /FlateDecode".to_string(), z.finish().expect("in-memory write"))
                }
                (None, false) => (String::new(), data),
            };
            objects.insert(content_id, stream_object(&extra, &body));
            let res = if self.nested_tree {
                String::new()
            } else {
                format!(" /Resources {resources}")
            };
            objects.insert(
                page_id,
                format!(
                    "<< /Type /Page /Parent {parent} 0 R /MediaBox [0 0 612 792]{res} /Contents {content_id} 0 R >>"
                )
                .into_bytes(),
            );
            page_ids.push(page_id);
        }
        let kids = |ids: &[u32]| ids.iter().map(|i| format!("{i} 0 R")).collect::<Vec<_>>().join(" ");
        let count = page_ids.len();
        match mid_id {
            Some(mid) => {
                objects.insert(
                    mid,
                    format!("<< /Type /Pages /Parent 2 0 R /Kids [{}] /Count {count} >>", kids(&page_ids))
                        .into_bytes(),
                );
                objects.insert(
                    2,
                    format!("<< /Type /Pages /Kids [{mid} 0 R] /Count {count} /Resources {resources} >>")
                        .into_bytes(),
                );
            }
            None => {
                objects.insert(
                    2,
                    format!("<< /Type /Pages /Kids [{}] /Count {count} >>", kids(&page_ids)).into_bytes(),
                );
            }
        }
        objects.insert(1, b"<< /Type /Catalog /Pages 2 0 R >>".to_vec());
        let encrypt_id = if self.encrypt {
            let id = alloc();
            objects.insert(id, b"<< /Filter /Standard /V 1 /R 2 /O <00> /U <00> /P -4 >>".to_vec());
            Some(id)
        } else {
            None
        };

        let mut out: Vec<u8> = b"%PDF-1.7\n%\xE2\xE3\xCF\xD3\n".to_vec();
        let mut offsets = BTreeMap::new();
        for (id, body) in &objects {
            offsets.insert(*id, out.len());
            out.extend(format!("{id} 0 obj\n").as_bytes());
            out.extend(body);
            out.extend(b"\nendobj\n");
        }
        let size = objects.keys().max().copied().unwrap_or(0) + 1;
        let xref_at = out.len();
        let mut xref = format!("xref\n0 {size}\n0000000000 65535 f \n");
        for id in 1..size {
            match offsets.get(&id) {
                Some(off) => {
                    let _ = writeln!(xref, "{off:010} 00000 n ");
                }
                None => xref.push_str("0000000000 65535 f \n"),
            }
        }
        out.extend(xref.as_bytes());
        let enc = encrypt_id.map_or(String::new(), |id| format!(" /Encrypt {id} 0 R"));
        out.extend(format!("trailer\n<< /Size {size} /Root 1 0 R{enc} >>\nstartxref\n{xref_at}\n%%EOF\n").as_bytes());
        Ok(out)
    }
}

fn stream_object(extra_dict: &str, data: &[u8]) -> Vec<u8> {
    let sep = if extra_dict.is_empty() { "" } else { " " };
    let mut v = format!("<< /Length {}{sep}{extra_dict} >>\nstream\n", data.len()).into_bytes();
    v.extend(data);
    v.extend(b"\nendstream");
    v
}

#[cfg(test)]
mod tests {
    use super::super::{extract_text, ExtractError};
    use super::*;

    fn czech_map() -> FontMap {
        let mut m = FontMap::new("F1");
        m.insert(vec![0x01], "ž").insert(vec![0x02], "č");
        for c in "NonameiXAB. ".chars() {
            m.insert(vec![c as u8], c.to_string());
        }
        m
    }

    #[test]
    fn round_trip_single_byte_map() {
        let pdf = SyntheticPdf::new()
            .font(czech_map())
            .page(vec![TextRun::new("F1", 72.0, 700.0, "X. Nonamežčič")])
            .build()
            .unwrap();
        let pages = extract_text(&pdf).unwrap();
        assert_eq!(pages.len(), 1);
        assert_eq!(pages[0].lines[0].text, "X. Nonamežčič");
    }

    #[test]
    fn two_byte_compressed_nested() {
        let mut m = FontMap::new("F2");
        for (i, c) in "Hello wrd😀ł".chars().enumerate() {
            m.insert(vec![0x10, i as u8], c.to_string());
        }
        m.insert(vec![0x20, 0x00], "ffi");
        let pdf = SyntheticPdf::new()
            .font(m)
            .page(vec![TextRun::new("F2", 10.0, 500.0, "Hello 😀")])
            .page(vec![TextRun::new("F2", 10.0, 500.0, "łffi")])
            .compress(true)
            .nested_tree(true)
            .build()
            .unwrap();
        let pages = extract_text(&pdf).unwrap();
        assert_eq!(pages.len(), 2);
        assert_eq!(pages[0].lines[0].text, "Hello 😀");
        assert_eq!(pages[1].lines[0].text, "łffi");
    }

    #[test]
    fn superscript_merges_into_line() {
        let pdf = SyntheticPdf::new()
            .page(vec![
                TextRun::new(BUILTIN_FONT, 72.0, 700.0, "A. Aa"),
                TextRun::new(BUILTIN_FONT, 110.0, 700.0, "1,2").raised(4.0),
                TextRun::new(BUILTIN_FONT, 72.0, 686.0, "B. Bb"),
            ])
            .build()
            .unwrap();
        let pages = extract_text(&pdf).unwrap();
        let texts: Vec<&str> = pages[0].texts().collect();
        assert_eq!(texts, ["A. Aa 1,2", "B. Bb"]);
    }

    #[test]
    fn kerned_words_without_space_glyph() {
        let mut m = FontMap::new("F3");
        for c in "abc".chars() {
            m.insert(vec![c as u8], c.to_string());
        }
        let pdf = SyntheticPdf::new()
            .font(m)
            .page(vec![TextRun::new("F3", 0.0, 10.0, "ab c")])
            .build()
            .unwrap();
        assert_eq!(extract_text(&pdf).unwrap()[0].lines[0].text, "ab c");
    }

    #[test]
    fn error_cases() {
        let enc = SyntheticPdf::new()
            .page(vec![TextRun::new(BUILTIN_FONT, 0.0, 0.0, "x")])
            .encrypted(true)
            .build()
            .unwrap();
        assert_eq!(extract_text(&enc).unwrap_err(), ExtractError::Encrypted);
        let lzw = SyntheticPdf::new()
            .page(vec![TextRun::new(BUILTIN_FONT, 0.0, 0.0, "x")])
            .declared_filter("LZWDecode")
            .build()
            .unwrap();
        assert_eq!(
            extract_text(&lzw).unwrap_err(),
            ExtractError::UnsupportedFilter("LZWDecode".into())
        );
        assert!(matches!(
            SyntheticPdf::new()
                .font(czech_map())
                .page(vec![TextRun::new("F1", 0.0, 0.0, "q")])
                .build(),
            Err(WriteError::Unmappable { ch: 'q', .. })
        ));
    }
}
