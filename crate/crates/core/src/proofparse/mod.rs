//! Segmentation of extracted proof text into author, institute and funding
//! blocks.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcher::normalize;
use crate::pdfextract::{PageText, TextLine};

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("author block undetected")]
    AuthorBlockUndetected,
    #[error("reading profile {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("profile JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("watermark pattern {pattern:?}: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },
}

fn default_markers() -> Vec<String> {
    vec!["\u{2020}".to_string(), "*".to_string()]
}

/// Per-publisher layout markers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublisherProfile {
    /// Collaboration banner preceding the author block.
    pub banner: String,
    /// Heading that introduces the funding text.
    pub ack_heading: String,
    /// Regular expressions matched against whole trimmed lines.
    #[serde(default)]
    pub watermarks: Vec<String>,
    #[serde(default = "default_markers")]
    pub deceased_markers: Vec<String>,
}

impl Default for PublisherProfile {
    fn default() -> Self {
        PublisherProfile {
            banner: "The ATLAS Collaboration".to_string(),
            ack_heading: "Acknowledgements".to_string(),
            watermarks: Vec::new(),
            deceased_markers: default_markers(),
        }
    }
}

impl PublisherProfile {
    pub fn from_json(text: &str) -> Result<Self, ProofError> {
        let p: PublisherProfile = serde_json::from_str(text)?;
        p.watermark_regexes()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, ProofError> {
        let text = fs::read_to_string(path).map_err(|source| ProofError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn watermark_regexes(&self) -> Result<Vec<Regex>, ProofError> {
        self.watermarks
            .iter()
            .map(|p| {
                Regex::new(&format!("^(?:{p})$")).map_err(|source| ProofError::Pattern {
                    pattern: p.clone(),
                    source,
                })
            })
            .collect()
    }
}

/// An author as printed in the proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofAuthor {
    pub name: String,
    pub affiliation_indices: Vec<u32>,
    pub deceased_marker: bool,
}

/// An indexed institute line of the proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofInstitute {
    pub index: u32,
    pub name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofSegments {
    pub authors: Vec<ProofAuthor>,
    pub institutes: Vec<ProofInstitute>,
    pub funding_text: String,
    pub diagnostics: Vec<String>,
}

/// Pages with artifacts removed, plus one diagnostic per removal.
#[derive(Debug, Clone, PartialEq)]
pub struct Stripped {
    pub pages: Vec<PageText>,
    pub diagnostics: Vec<String>,
}

/// Fraction of pages a line must appear on to count as a running header.
pub const HEADER_PAGE_FRACTION: f64 = 0.8;

fn leading_integer(text: &str) -> Option<(u32, &str)> {
    let t = text.trim_start();
    let digits = t.len() - t.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    let rest = &t[digits..];
    if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
        return None;
    }
    t[..digits].parse().ok().map(|n| (n, rest.trim_start()))
}

fn is_standalone_integer(text: &str) -> bool {
    let t = text.trim();
    !t.is_empty() && t.chars().all(|c| c.is_ascii_digit())
}

/// Remove page numbers, proof line numbers, watermarks and running headers.
///
/// Line numbers are chains of lines, in document order, whose leading
/// integers increase by one. A chain starting at 1 is an institute list and
/// is kept.
pub fn strip_artifacts(pages: &[PageText], profile: &PublisherProfile) -> Result<Stripped, ProofError> {
    let watermarks = profile.watermark_regexes()?;
    let mut diagnostics = Vec::new();
    let mut pages: Vec<PageText> = pages.to_vec();

    for page in &mut pages {
        let pn = page.page_number;
        page.lines.retain(|l| {
            let t = l.text.trim();
            if is_standalone_integer(t) {
                diagnostics.push(format!("page {pn}: removed standalone number {t:?}"));
                return false;
            }
            if watermarks.iter().any(|re| re.is_match(t)) {
                diagnostics.push(format!("page {pn}: removed watermark {t:?}"));
                return false;
            }
            true
        });
    }

    if pages.len() >= 2 {
        let mut seen_on: HashMap<String, usize> = HashMap::new();
        for page in &pages {
            let distinct: HashSet<&str> = page.lines.iter().map(|l| l.text.trim()).collect();
            for t in distinct {
                *seen_on.entry(t.to_string()).or_default() += 1;
            }
        }
        let needed = (HEADER_PAGE_FRACTION * pages.len() as f64).ceil() as usize;
        let headers: HashSet<String> = seen_on
            .into_iter()
            .filter(|(_, n)| *n >= needed.max(2))
            .map(|(t, _)| t)
            .collect();
        for page in &mut pages {
            let pn = page.page_number;
            page.lines.retain(|l| {
                let t = l.text.trim();
                if headers.contains(t) {
                    diagnostics.push(format!("page {pn}: removed running header {t:?}"));
                    return false;
                }
                true
            });
        }
    }

    // chains of leading integers across the document
    let positions: Vec<(usize, usize, u32)> = pages
        .iter()
        .enumerate()
        .flat_map(|(p, page)| {
            page.lines
                .iter()
                .enumerate()
                .filter_map(move |(i, l)| leading_integer(&l.text).map(|(n, _)| (p, i, n)))
        })
        .collect();
    let mut chains: Vec<Vec<(usize, usize, u32)>> = Vec::new();
    for pos in positions {
        match chains.last_mut() {
            Some(chain) if chain.last().is_some_and(|last| pos.2 == last.2 + 1) => chain.push(pos),
            _ => chains.push(vec![pos]),
        }
    }
    let mut strip: HashSet<(usize, usize)> = HashSet::new();
    for chain in chains.iter().filter(|c| c.len() >= 2 && c[0].2 != 1) {
        strip.extend(chain.iter().map(|&(p, i, _)| (p, i)));
    }
    for (p, page) in pages.iter_mut().enumerate() {
        let pn = page.page_number;
        for (i, line) in page.lines.iter_mut().enumerate() {
            if strip.contains(&(p, i)) {
                let (n, rest) = leading_integer(&line.text).expect("chain member has a leading integer");
                diagnostics.push(format!("page {pn}: removed line number {n}"));
                line.text = rest.to_string();
            }
        }
        page.lines.retain(|l| !l.text.trim().is_empty());
    }

    Ok(Stripped { pages, diagnostics })
}

fn institute_line(text: &str) -> Option<(u32, String)> {
    let (n, rest) = leading_integer(text)?;
    let rest = rest.trim();
    if rest.is_empty() || rest.starts_with(|c: char| c.is_ascii_digit()) {
        return None;
    }
    Some((n, rest.to_string()))
}

/// How far past a wrapped institute line to look for the next index.
const INSTITUTE_WRAP_LOOKAHEAD: usize = 3;

/// Split artifact-free pages into author, institute and funding blocks.
pub fn segment_proof(pages: &[PageText], profile: &PublisherProfile) -> Result<ProofSegments, ProofError> {
    let lines: Vec<&TextLine> = pages.iter().flat_map(|p| p.lines.iter()).collect();
    let banner = normalize(&profile.banner);
    let ack = normalize(&profile.ack_heading);
    let mut diagnostics = Vec::new();

    let banner_at = lines
        .iter()
        .position(|l| !banner.is_empty() && normalize(&l.text).contains(&banner))
        .ok_or(ProofError::AuthorBlockUndetected)?;
    let ack_at = lines
        .iter()
        .enumerate()
        .skip(banner_at + 1)
        .find(|(_, l)| !ack.is_empty() && normalize(&l.text).starts_with(&ack))
        .map(|(i, _)| i);
    let limit = ack_at.unwrap_or(lines.len());
    let inst_start = (banner_at + 1..limit).find(|&i| institute_line(&lines[i].text).is_some_and(|(n, _)| n == 1));
    let author_end = inst_start.unwrap_or(limit);

    let author_lines: Vec<&str> = lines[banner_at + 1..author_end].iter().map(|l| l.text.as_str()).collect();
    let authors = parse_authors(&author_lines, &profile.deceased_markers, &mut diagnostics);
    if authors.is_empty() {
        return Err(ProofError::AuthorBlockUndetected);
    }

    let mut institutes: Vec<ProofInstitute> = Vec::new();
    if let Some(start) = inst_start {
        let mut i = start;
        while i < limit {
            if let Some((n, name)) = institute_line(&lines[i].text) {
                if let Some(prev) = institutes.last() {
                    if n != prev.index + 1 {
                        diagnostics.push(format!(
                            "non-monotonic institute index {n} after {}",
                            prev.index
                        ));
                    }
                }
                if institutes.iter().any(|p| p.index == n) {
                    diagnostics.push(format!("duplicate institute index {n}"));
                } else {
                    institutes.push(ProofInstitute { index: n, name });
                }
                i += 1;
                continue;
            }
            let resumes = (i + 1..limit.min(i + 1 + INSTITUTE_WRAP_LOOKAHEAD))
                .find(|&j| institute_line(&lines[j].text).is_some());
            match (resumes, institutes.last_mut()) {
                (Some(j), Some(last)) => {
                    for line in &lines[i..j] {
                        last.name.push(' ');
                        last.name.push_str(line.text.trim());
                    }
                    i = j;
                }
                _ => break,
            }
        }
    } else {
        diagnostics.push("institute block undetected".to_string());
    }

    let funding_text = match ack_at {
        Some(a) => {
            let heading_rest = lines[a].text.trim()[..]
                .get(profile.ack_heading.trim().len()..)
                .unwrap_or("")
                .trim();
            std::iter::once(heading_rest)
                .chain(lines[a + 1..].iter().map(|l| l.text.trim()))
                .filter(|t| !t.is_empty())
                .collect::<Vec<_>>()
                .join(" ")
        }
        None => {
            diagnostics.push("acknowledgements heading not found".to_string());
            String::new()
        }
    };

    Ok(ProofSegments {
        authors,
        institutes,
        funding_text,
        diagnostics,
    })
}

/// Strip artifacts, then segment; diagnostics of both steps are kept.
pub fn parse_proof(pages: &[PageText], profile: &PublisherProfile) -> Result<ProofSegments, ProofError> {
    let stripped = strip_artifacts(pages, profile)?;
    let mut seg = segment_proof(&stripped.pages, profile)?;
    let mut diagnostics = stripped.diagnostics;
    diagnostics.append(&mut seg.diagnostics);
    seg.diagnostics = diagnostics;
    Ok(seg)
}

struct Suffix {
    indices: Vec<u32>,
    deceased: bool,
    has_any: bool,
}

/// Split a token into name and trailing index/marker group.
fn split_suffix<'a>(token: &'a str, markers: &[String]) -> (&'a str, Suffix) {
    let mut cut = token.len();
    loop {
        let head = &token[..cut];
        let trimmed = head.trim_end();
        if trimmed.len() != head.len() {
            cut = trimmed.len();
            continue;
        }
        if let Some(m) = markers.iter().find(|m| !m.is_empty() && trimmed.ends_with(m.as_str())) {
            cut -= m.len();
            continue;
        }
        match trimmed.chars().last() {
            Some(c) if c.is_ascii_digit() => cut -= 1,
            _ => break,
        }
    }
    let suffix = &token[cut..];
    let mut indices = Vec::new();
    let mut cur = String::new();
    let mut deceased = false;
    let mut rest = suffix;
    while let Some(c) = rest.chars().next() {
        if c.is_ascii_digit() {
            cur.push(c);
            rest = &rest[1..];
            continue;
        }
        if !cur.is_empty() {
            indices.extend(cur.parse::<u32>().ok());
            cur.clear();
        }
        if let Some(m) = markers.iter().find(|m| !m.is_empty() && rest.starts_with(m.as_str())) {
            deceased = true;
            rest = &rest[m.len()..];
        } else {
            rest = &rest[c.len_utf8()..];
        }
    }
    if !cur.is_empty() {
        indices.extend(cur.parse::<u32>().ok());
    }
    let has_any = !suffix.trim().is_empty();
    (
        token[..cut].trim(),
        Suffix {
            indices,
            deceased,
            has_any,
        },
    )
}

fn parse_authors(lines: &[&str], markers: &[String], diagnostics: &mut Vec<String>) -> Vec<ProofAuthor> {
    // (token, followed by a line break)
    let mut tokens: Vec<(String, bool)> = Vec::new();
    for line in lines {
        let parts: Vec<&str> = line.split(',').collect();
        let last = parts.len() - 1;
        for (i, p) in parts.iter().enumerate() {
            let p = p.trim();
            let p = p.strip_prefix("and ").unwrap_or(p).trim();
            if !p.is_empty() {
                tokens.push((p.to_string(), i == last));
            } else if i == last {
                if let Some(prev) = tokens.last_mut() {
                    prev.1 = false;
                }
            }
        }
    }

    let mut authors: Vec<ProofAuthor> = Vec::new();
    let mut pending: Option<String> = None;
    for (token, at_line_end) in tokens {
        let token = match pending.take() {
            Some(p) => format!("{p} {token}"),
            None => token,
        };
        let (name, suffix) = split_suffix(&token, markers);
        if name.is_empty() {
            match authors.last_mut() {
                Some(a) => {
                    a.affiliation_indices.extend(suffix.indices);
                    a.deceased_marker |= suffix.deceased;
                }
                None => diagnostics.push(format!("index group {token:?} before any author")),
            }
            continue;
        }
        if !suffix.has_any {
            if at_line_end {
                pending = Some(name.to_string());
            } else {
                diagnostics.push(format!("author {name:?} has no affiliation index"));
                authors.push(ProofAuthor {
                    name: name.to_string(),
                    affiliation_indices: Vec::new(),
                    deceased_marker: false,
                });
            }
            continue;
        }
        authors.push(ProofAuthor {
            name: name.to_string(),
            affiliation_indices: suffix.indices,
            deceased_marker: suffix.deceased,
        });
    }
    if let Some(p) = pending {
        diagnostics.push(format!("author {p:?} has no affiliation index"));
        authors.push(ProofAuthor {
            name: p,
            affiliation_indices: Vec::new(),
            deceased_marker: false,
        });
    }
    authors
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdfextract::load_pretokenized;

    fn profile() -> PublisherProfile {
        PublisherProfile {
            banner: "The ATLAS Collaboration".into(),
            ack_heading: "Acknowledgements".into(),
            watermarks: vec!["DRAFT".into()],
            deceased_markers: default_markers(),
        }
    }

    fn pages(text: &str) -> Vec<PageText> {
        load_pretokenized(text).unwrap()
    }

    #[test]
    fn line_numbers_removed() {
        let s = strip_artifacts(&pages("117 J. Smith\n118 A. Doe\n"), &profile()).unwrap();
        let texts: Vec<&str> = s.pages[0].texts().collect();
        assert_eq!(texts, ["J. Smith", "A. Doe"]);
        assert_eq!(s.diagnostics.len(), 2);
        assert!(s.diagnostics.iter().all(|d| d.contains("line number")));
    }

    #[test]
    fn institute_chain_kept() {
        let s = strip_artifacts(&pages("1 Univ A\n2 Univ B\n"), &profile()).unwrap();
        assert_eq!(s.pages[0].lines[0].text, "1 Univ A");
        assert!(s.diagnostics.is_empty());
    }

    #[test]
    fn watermark_and_identity() {
        let s = strip_artifacts(&pages("DRAFT\nkeep me\n"), &profile()).unwrap();
        assert_eq!(s.pages[0].texts().collect::<Vec<_>>(), ["keep me"]);
        let clean = pages("a\nb\n");
        let s = strip_artifacts(&clean, &profile()).unwrap();
        assert_eq!(s.pages, clean);
        assert!(s.diagnostics.is_empty());
    }

    #[test]
    fn running_header_removed() {
        let s = strip_artifacts(&pages("Phys. Rev. D\nfirst\n\u{c}\nPhys. Rev. D\nsecond\n"), &profile()).unwrap();
        assert_eq!(s.pages[0].texts().collect::<Vec<_>>(), ["first"]);
        assert_eq!(s.pages[1].texts().collect::<Vec<_>>(), ["second"]);
    }

    const PROOF: &str = "Title\nThe ATLAS Collaboration\nA. Aa 1,2, B. Bb 2,\nC. Cc \u{2020}1\n1 Univ One\n2 Univ Two,\nCity\n\u{2020} Deceased\nAcknowledgements\nWe thank CERN. And DOE.\n";

    #[test]
    fn segments_fixture() {
        let seg = segment_proof(&pages(PROOF), &profile()).unwrap();
        assert_eq!(seg.authors.len(), 3);
        assert_eq!(seg.authors[0].affiliation_indices, [1, 2]);
        assert_eq!(seg.authors[1].name, "B. Bb");
        assert_eq!(seg.authors[2].name, "C. Cc");
        assert!(seg.authors[2].deceased_marker);
        assert!(!seg.authors[0].deceased_marker);
        assert_eq!(seg.institutes.len(), 2);
        assert_eq!(seg.institutes[1].name, "Univ Two,");
        assert_eq!(seg.funding_text, "We thank CERN. And DOE.");
    }

    #[test]
    fn line_number_glued_index() {
        let seg = segment_proof(&pages("The ATLAS Collaboration\nA. Aa 171\n1 Univ\n"), &profile()).unwrap();
        assert_eq!(seg.authors[0].affiliation_indices, [171]);
    }

    #[test]
    fn wrapped_name_and_institute() {
        let seg = segment_proof(
            &pages("The ATLAS Collaboration\nA. Very\nLongname 1, B. Bb 2\n1 First part\nsecond part\n2 Other\n"),
            &profile(),
        )
        .unwrap();
        assert_eq!(seg.authors[0].name, "A. Very Longname");
        assert_eq!(seg.institutes[0].name, "First part second part");
    }

    #[test]
    fn no_author_block() {
        assert!(matches!(
            segment_proof(&[], &profile()),
            Err(ProofError::AuthorBlockUndetected)
        ));
    }

    #[test]
    fn non_monotonic_diagnosed() {
        let seg = segment_proof(&pages("The ATLAS Collaboration\nA. Aa 1\n1 X\n3 Y\n"), &profile()).unwrap();
        assert!(seg.diagnostics.iter().any(|d| d.contains("non-monotonic")));
        assert_eq!(seg.institutes.len(), 2);
    }
}
