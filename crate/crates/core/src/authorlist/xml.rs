//! XML dialect:
//!
//! ```xml
//! <authorlist>
//!   <header><field name="ref_code">...</field></header>
//!   <institutes>
//!     <institute id="A" inspire="..." country="..."><name>...</name></institute>
//!   </institutes>
//!   <authors>
//!     <author inspire_id="..." orcid="..." deceased="false" start="..." end="">
//!       <family>...</family><initials>...</initials><foaf>...</foaf>
//!       <affiliation ref="A"/>
//!     </author>
//!   </authors>
//! </authorlist>
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use chrono::NaiveDate;
use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{Author, AuthorList, AuthorListError, Institute};

pub(super) fn render(list: &AuthorList) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<authorlist>\n  <header>\n");
    for (k, v) in &list.header {
        let _ = writeln!(out, "    <field name=\"{}\">{}</field>", escape(k.as_str()), escape(v.as_str()));
    }
    out.push_str("  </header>\n  <institutes>\n");
    for inst in &list.institutes {
        let _ = writeln!(
            out,
            "    <institute id=\"{}\" inspire=\"{}\" country=\"{}\">\n      <name>{}</name>\n    </institute>",
            escape(inst.id.as_str()),
            escape(inst.inspire_ref.as_str()),
            escape(inst.country.as_str()),
            escape(inst.name.as_str()),
        );
    }
    out.push_str("  </institutes>\n  <authors>\n");
    for a in &list.authors {
        let _ = writeln!(
            out,
            "    <author inspire_id=\"{}\" orcid=\"{}\" deceased=\"{}\" start=\"{}\" end=\"{}\">",
            escape(a.inspire_id.as_str()),
            escape(a.orcid.as_deref().unwrap_or("")),
            a.deceased,
            a.membership_start,
            a.membership_end.map(|d| d.to_string()).unwrap_or_default(),
        );
        let _ = writeln!(out, "      <family>{}</family>", escape(a.family_name.as_str()));
        let _ = writeln!(out, "      <initials>{}</initials>", escape(a.initials.as_str()));
        let _ = writeln!(out, "      <foaf>{}</foaf>", escape(a.foaf_name.as_str()));
        for aff in &a.affiliations {
            let _ = writeln!(out, "      <affiliation ref=\"{}\"/>", escape(aff.as_str()));
        }
        out.push_str("    </author>\n");
    }
    out.push_str("  </authors>\n</authorlist>\n");
    out
}

/// Parsed list plus warnings about ignored elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAuthorList {
    pub list: AuthorList,
    pub warnings: Vec<String>,
}

struct Parser<'a> {
    reader: Reader<&'a [u8]>,
    path: Vec<String>,
    warnings: Vec<String>,
}

enum Node<'a> {
    Open(BytesStart<'a>),
    Empty(BytesStart<'a>),
    Close,
    Text(String),
    Eof,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let mut reader = Reader::from_str(text);
        reader.config_mut().trim_text(false);
        Parser {
            reader,
            path: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn here(&self) -> String {
        if self.path.is_empty() {
            "/".to_string()
        } else {
            format!("/{}", self.path.join("/"))
        }
    }

    fn err(&self, message: impl Into<String>) -> AuthorListError {
        AuthorListError::Parse {
            path: self.here(),
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<Node<'a>, AuthorListError> {
        loop {
            let ev = self
                .reader
                .read_event()
                .map_err(|e| self.err(format!("malformed XML: {e}")))?;
            return Ok(match ev {
                Event::Start(s) => Node::Open(s),
                Event::Empty(s) => Node::Empty(s),
                Event::End(_) => Node::Close,
                Event::Text(t) => Node::Text(
                    t.unescape()
                        .map_err(|e| self.err(format!("bad text: {e}")))?
                        .into_owned(),
                ),
                Event::CData(c) => Node::Text(String::from_utf8_lossy(&c).into_owned()),
                Event::Eof => Node::Eof,
                Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => continue,
            });
        }
    }

    /// Next element start, skipping whitespace text. `None` at the parent's
    /// closing tag.
    fn next_child(&mut self) -> Result<Option<(BytesStart<'a>, bool)>, AuthorListError> {
        loop {
            match self.next()? {
                Node::Open(s) => return Ok(Some((s, false))),
                Node::Empty(s) => return Ok(Some((s, true))),
                Node::Close | Node::Eof => return Ok(None),
                Node::Text(t) if t.trim().is_empty() => continue,
                Node::Text(t) => {
                    let msg = format!("{}: stray text {:?} ignored", self.here(), t.trim());
                    self.warnings.push(msg);
                }
            }
        }
    }

    /// Concatenated text content up to the closing tag.
    fn text_content(&mut self) -> Result<String, AuthorListError> {
        let mut out = String::new();
        loop {
            match self.next()? {
                Node::Text(t) => out.push_str(&t),
                Node::Close => return Ok(out),
                Node::Eof => return Err(self.err("unexpected end of document")),
                Node::Open(s) | Node::Empty(s) => {
                    return Err(self.err(format!("unexpected element <{}> in text", name(&s))))
                }
            }
        }
    }

    fn skip(&mut self, start: &BytesStart<'a>, empty: bool) -> Result<(), AuthorListError> {
        let msg = format!("{}: unknown element <{}> ignored", self.here(), name(start));
        self.warnings.push(msg);
        if !empty {
            let end = start.to_end().into_owned();
            self.reader
                .read_to_end(end.name())
                .map_err(|e| self.err(format!("malformed XML: {e}")))?;
        }
        Ok(())
    }

    fn attr(&self, start: &BytesStart<'_>, key: &str) -> Result<Option<String>, AuthorListError> {
        for attr in start.attributes() {
            let attr = attr.map_err(|e| self.err(format!("bad attribute: {e}")))?;
            if attr.key.as_ref() == key.as_bytes() {
                let v = attr
                    .unescape_value()
                    .map_err(|e| self.err(format!("bad attribute {key}: {e}")))?;
                return Ok(Some(v.into_owned()));
            }
        }
        Ok(None)
    }

    fn required_attr(&self, start: &BytesStart<'_>, key: &str) -> Result<String, AuthorListError> {
        self.attr(start, key)?
            .ok_or_else(|| self.err(format!("missing attribute {key:?}")))
    }
}

fn name(s: &BytesStart<'_>) -> String {
    String::from_utf8_lossy(s.name().as_ref()).into_owned()
}

fn parse_date(p: &Parser<'_>, raw: &str, what: &str) -> Result<NaiveDate, AuthorListError> {
    raw.parse()
        .map_err(|_| p.err(format!("{what} {raw:?} is not an ISO date")))
}

/// Inverse of the XML rendering. Unknown elements are skipped with a warning;
/// missing blocks, duplicate institute ids and dangling affiliations are
/// errors carrying the element path.
pub fn parse_author_list(xml_text: &str) -> Result<ParsedAuthorList, AuthorListError> {
    let mut p = Parser::new(xml_text);

    let root = loop {
        match p.next()? {
            Node::Open(s) if s.name().as_ref() == b"authorlist" => break s,
            Node::Open(s) => return Err(p.err(format!("unexpected root element <{}>", name(&s)))),
            Node::Eof => {
                return Err(AuthorListError::Parse {
                    path: "/".into(),
                    message: "missing Header block".into(),
                })
            }
            Node::Text(_) => continue,
            Node::Empty(_) | Node::Close => return Err(p.err("missing Header block")),
        }
    };
    drop(root);
    p.path.push("authorlist".into());

    let mut header: Option<BTreeMap<String, String>> = None;
    let mut institutes: Option<Vec<Institute>> = None;
    let mut authors: Option<Vec<Author>> = None;

    while let Some((start, empty)) = p.next_child()? {
        match start.name().as_ref() {
            b"header" => {
                if institutes.is_some() || authors.is_some() {
                    return Err(p.err("Header block must come first"));
                }
                header = Some(if empty { BTreeMap::new() } else { parse_header(&mut p)? });
            }
            b"institutes" => {
                if header.is_none() {
                    return Err(p.err("missing Header block"));
                }
                if authors.is_some() {
                    return Err(p.err("Institutes block must precede Authors"));
                }
                institutes = Some(if empty { Vec::new() } else { parse_institutes(&mut p)? });
            }
            b"authors" => {
                if header.is_none() {
                    return Err(p.err("missing Header block"));
                }
                let Some(insts) = &institutes else {
                    return Err(p.err("missing Institutes block"));
                };
                let ids: HashSet<String> = insts.iter().map(|i| i.id.clone()).collect();
                authors = Some(if empty { Vec::new() } else { parse_authors(&mut p, &ids)? });
            }
            _ => p.skip(&start, empty)?,
        }
    }

    let header = header.ok_or_else(|| p.err("missing Header block"))?;
    let institutes = institutes.ok_or_else(|| p.err("missing Institutes block"))?;
    let authors = authors.ok_or_else(|| p.err("missing Authors block"))?;
    Ok(ParsedAuthorList {
        list: AuthorList {
            header,
            institutes,
            authors,
        },
        warnings: p.warnings,
    })
}

fn parse_header(p: &mut Parser<'_>) -> Result<BTreeMap<String, String>, AuthorListError> {
    p.path.push("header".into());
    let mut header = BTreeMap::new();
    let mut i = 0;
    while let Some((start, empty)) = p.next_child()? {
        if start.name().as_ref() != b"field" {
            p.skip(&start, empty)?;
            continue;
        }
        i += 1;
        p.path.push(format!("field[{i}]"));
        let key = p.required_attr(&start, "name")?;
        let value = if empty { String::new() } else { p.text_content()? };
        if header.insert(key.clone(), value).is_some() {
            return Err(p.err(format!("duplicate header field {key:?}")));
        }
        p.path.pop();
    }
    p.path.pop();
    Ok(header)
}

fn parse_institutes(p: &mut Parser<'_>) -> Result<Vec<Institute>, AuthorListError> {
    p.path.push("institutes".into());
    let mut out: Vec<Institute> = Vec::new();
    let mut seen = HashSet::new();
    while let Some((start, empty)) = p.next_child()? {
        if start.name().as_ref() != b"institute" {
            p.skip(&start, empty)?;
            continue;
        }
        p.path.push(format!("institute[{}]", out.len() + 1));
        let id = p.required_attr(&start, "id")?;
        if !seen.insert(id.clone()) {
            return Err(p.err(format!("duplicate institute id {id:?}")));
        }
        let inspire_ref = p.attr(&start, "inspire")?.unwrap_or_default();
        let country = p.attr(&start, "country")?.unwrap_or_default();
        let mut inst_name = None;
        if !empty {
            while let Some((child, child_empty)) = p.next_child()? {
                if child.name().as_ref() == b"name" {
                    inst_name = Some(if child_empty { String::new() } else { p.text_content()? });
                } else {
                    p.skip(&child, child_empty)?;
                }
            }
        }
        let name = inst_name.ok_or_else(|| p.err("institute without <name>"))?;
        out.push(Institute {
            id,
            name,
            inspire_ref,
            country,
        });
        p.path.pop();
    }
    p.path.pop();
    Ok(out)
}

fn parse_authors(p: &mut Parser<'_>, ids: &HashSet<String>) -> Result<Vec<Author>, AuthorListError> {
    p.path.push("authors".into());
    let mut out = Vec::new();
    while let Some((start, empty)) = p.next_child()? {
        if start.name().as_ref() != b"author" {
            p.skip(&start, empty)?;
            continue;
        }
        p.path.push(format!("author[{}]", out.len() + 1));
        let inspire_id = p.attr(&start, "inspire_id")?.unwrap_or_default();
        let orcid = p.attr(&start, "orcid")?.filter(|s| !s.is_empty());
        let deceased = match p.attr(&start, "deceased")?.as_deref() {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => return Err(p.err(format!("deceased must be true or false, got {other:?}"))),
        };
        let start_raw = p.required_attr(&start, "start")?;
        let membership_start = parse_date(p, &start_raw, "start")?;
        let membership_end = match p.attr(&start, "end")?.filter(|s| !s.is_empty()) {
            Some(raw) => Some(parse_date(p, &raw, "end")?),
            None => None,
        };

        let (mut family, mut initials, mut foaf) = (None, None, String::new());
        let mut affiliations = Vec::new();
        if !empty {
            while let Some((child, child_empty)) = p.next_child()? {
                match child.name().as_ref() {
                    b"family" => family = Some(if child_empty { String::new() } else { p.text_content()? }),
                    b"initials" => initials = Some(if child_empty { String::new() } else { p.text_content()? }),
                    b"foaf" => foaf = if child_empty { String::new() } else { p.text_content()? },
                    b"affiliation" => {
                        let r = p.required_attr(&child, "ref")?;
                        if !ids.contains(&r) {
                            return Err(p.err(format!("dangling affiliation {r:?}")));
                        }
                        affiliations.push(r);
                        if !child_empty {
                            p.text_content()?;
                        }
                    }
                    _ => p.skip(&child, child_empty)?,
                }
            }
        }
        out.push(Author {
            family_name: family.ok_or_else(|| p.err("author without <family>"))?,
            initials: initials.unwrap_or_default(),
            foaf_name: foaf,
            inspire_id,
            orcid,
            affiliations,
            deceased,
            membership_start,
            membership_end,
        });
        p.path.pop();
    }
    p.path.pop();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AuthorList {
        let mut header = BTreeMap::new();
        header.insert("ref_code".into(), "EXOT-2017-24".into());
        header.insert("ref_date".into(), "2018-07-31".into());
        header.insert("title".into(), "Search for <new> & \"exotic\" states".into());
        AuthorList {
            header,
            institutes: vec![Institute {
                id: "A".into(),
                name: "Università di Roma & INFN".into(),
                inspire_ref: "903031".into(),
                country: "Italy".into(),
            }],
            authors: vec![
                Author {
                    family_name: "Aad".into(),
                    initials: "G.".into(),
                    foaf_name: "Georges Aad".into(),
                    inspire_id: "INSPIRE-00210391".into(),
                    orcid: Some("0000-0002-6665-4934".into()),
                    affiliations: vec!["A".into()],
                    deceased: false,
                    membership_start: "2010-01-01".parse().unwrap(),
                    membership_end: None,
                },
                Author {
                    family_name: "B\\\"ub".into(),
                    initials: "A.".into(),
                    foaf_name: "A Bub".into(),
                    inspire_id: "INSPIRE-00000000".into(),
                    orcid: None,
                    affiliations: vec!["A".into()],
                    deceased: true,
                    membership_start: "2011-01-01".parse().unwrap(),
                    membership_end: Some("2019-01-01".parse().unwrap()),
                },
            ],
        }
    }

    #[test]
    fn structure() {
        let xml = render(&sample());
        assert_eq!(xml.matches("<institute ").count(), 1);
        assert_eq!(xml.matches("<author ").count(), 2);
        assert_eq!(xml.matches("inspire_id=").count(), 2);
        assert_eq!(xml.matches("orcid=").count(), 2);
        let h = xml.find("<header>").unwrap();
        let i = xml.find("<institutes>").unwrap();
        let a = xml.find("<authors>").unwrap();
        assert!(h < i && i < a);
    }

    #[test]
    fn round_trip() {
        let list = sample();
        let parsed = parse_author_list(&render(&list)).unwrap();
        assert_eq!(parsed.list, list);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn empty_document() {
        let err = parse_author_list("").unwrap_err();
        assert!(err.to_string().contains("missing Header block"), "{err}");
    }

    #[test]
    fn dangling_affiliation() {
        let xml = render(&sample()).replacen("ref=\"A\"", "ref=\"Z9\"", 1);
        let err = parse_author_list(&xml).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Z9"), "{msg}");
        assert!(msg.contains("/authorlist/authors/author[1]"), "{msg}");
    }

    #[test]
    fn duplicate_institute() {
        let xml = render(&sample()).replace(
            "  </institutes>",
            "    <institute id=\"A\"><name>again</name></institute>\n  </institutes>",
        );
        let err = parse_author_list(&xml).unwrap_err();
        assert!(err.to_string().contains("duplicate institute id \"A\""), "{err}");
    }

    #[test]
    fn missing_blocks() {
        let err = parse_author_list("<authorlist><header/></authorlist>").unwrap_err();
        assert!(err.to_string().contains("missing Institutes block"));
        let err = parse_author_list("<authorlist><header/><institutes/></authorlist>").unwrap_err();
        assert!(err.to_string().contains("missing Authors block"));
        let err = parse_author_list("<authorlist><institutes/></authorlist>").unwrap_err();
        assert!(err.to_string().contains("missing Header block"));
    }

    #[test]
    fn unknown_elements_warn() {
        let xml = render(&sample())
            .replace("  <institutes>", "  <journal_hint>PRL</journal_hint>\n  <institutes>")
            .replacen("<foaf>", "<nickname>x</nickname><foaf>", 1);
        let parsed = parse_author_list(&xml).unwrap();
        assert_eq!(parsed.list, sample());
        assert_eq!(parsed.warnings.len(), 2);
        assert!(parsed.warnings[0].contains("journal_hint"));
    }
}
