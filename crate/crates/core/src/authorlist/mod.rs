//! Collaboration author list: member snapshot at a reference date, XML/TeX
//! rendering, XML parsing and the acknowledgements block.

mod ack;
mod tex;
mod xml;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcher::fold_accents;

pub use ack::{render_acknowledgements, Acknowledgements, AGENCIES_PLACEHOLDER};
pub use xml::{parse_author_list, ParsedAuthorList};

#[derive(Debug, Error)]
pub enum AuthorListError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed member database: {0}")]
    MemberDb(#[from] serde_json::Error),
    #[error("member {member:?} references unknown institute {institute:?}")]
    UnknownInstitute { member: String, institute: String },
    #[error("no qualified authors at {0}")]
    NoQualifiedAuthors(NaiveDate),
    #[error("unsupported author list format {0:?}")]
    UnsupportedFormat(String),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid author list: {0}")]
    Invalid(String),
    #[error("acknowledgements template has no {AGENCIES_PLACEHOLDER} placeholder")]
    MissingPlaceholder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Institute {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub inspire_ref: String,
    #[serde(default)]
    pub country: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Author {
    pub family_name: String,
    pub initials: String,
    #[serde(default)]
    pub foaf_name: String,
    #[serde(default)]
    pub inspire_id: String,
    #[serde(default)]
    pub orcid: Option<String>,
    pub affiliations: Vec<String>,
    #[serde(default)]
    pub deceased: bool,
    pub membership_start: NaiveDate,
    #[serde(default)]
    pub membership_end: Option<NaiveDate>,
}

impl Author {
    /// Name as a journal prints it: `X.-Y. Family`.
    pub fn printed_name(&self) -> String {
        if self.initials.is_empty() {
            self.family_name.clone()
        } else {
            format!("{} {}", self.initials, self.family_name)
        }
    }

    /// Membership interval contains `date`; both ends inclusive.
    pub fn qualified_at(&self, date: NaiveDate) -> bool {
        self.membership_start <= date && self.membership_end.is_none_or(|end| date <= end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FundingAgency {
    pub name: String,
    pub active_from: NaiveDate,
    #[serde(default)]
    pub active_to: Option<NaiveDate>,
}

impl FundingAgency {
    pub fn active_at(&self, date: NaiveDate) -> bool {
        self.active_from <= date && self.active_to.is_none_or(|end| date <= end)
    }
}

/// Load a JSON array of funding agencies.
pub fn load_agencies(path: &Path) -> Result<Vec<FundingAgency>, AuthorListError> {
    let text = read(path)?;
    let agencies: Vec<FundingAgency> = serde_json::from_str(&text)?;
    let mut seen = HashSet::new();
    for a in &agencies {
        if !seen.insert(crate::matcher::normalize(&a.name)) {
            return Err(AuthorListError::Invalid(format!(
                "funding agency {:?} listed twice",
                a.name
            )));
        }
    }
    Ok(agencies)
}

pub const HEADER_TITLE: &str = "title";
pub const HEADER_REF_CODE: &str = "ref_code";
pub const HEADER_REF_DATE: &str = "ref_date";

/// Header, institutes and authors, in that order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorList {
    pub header: BTreeMap<String, String>,
    pub institutes: Vec<Institute>,
    pub authors: Vec<Author>,
}

fn orcid_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\d{4}-\d{4}-\d{4}-\d{3}[\dX]$").unwrap())
}

impl AuthorList {
    pub fn ref_code(&self) -> &str {
        self.header.get(HEADER_REF_CODE).map_or("", String::as_str)
    }

    pub fn ref_date(&self) -> Result<NaiveDate, AuthorListError> {
        let raw = self
            .header
            .get(HEADER_REF_DATE)
            .ok_or_else(|| AuthorListError::Invalid("header has no ref_date".into()))?;
        raw.parse()
            .map_err(|_| AuthorListError::Invalid(format!("ref_date {raw:?} is not an ISO date")))
    }

    /// 1-based position of each institute id.
    pub fn institute_positions(&self) -> HashMap<&str, usize> {
        self.institutes
            .iter()
            .enumerate()
            .map(|(i, inst)| (inst.id.as_str(), i + 1))
            .collect()
    }

    pub fn validate(&self) -> Result<(), AuthorListError> {
        self.ref_date()?;
        let mut ids = HashSet::new();
        for inst in &self.institutes {
            if inst.id.is_empty() {
                return Err(AuthorListError::Invalid("institute with empty id".into()));
            }
            if !ids.insert(inst.id.as_str()) {
                return Err(AuthorListError::Invalid(format!("duplicate institute id {:?}", inst.id)));
            }
            if inst.name.split_whitespace().next().is_none() {
                return Err(AuthorListError::Invalid(format!("institute {:?} has an empty name", inst.id)));
            }
        }
        for author in &self.authors {
            if author.affiliations.is_empty() {
                return Err(AuthorListError::Invalid(format!(
                    "author {:?} has no affiliation",
                    author.printed_name()
                )));
            }
            if let Some(missing) = author.affiliations.iter().find(|a| !ids.contains(a.as_str())) {
                return Err(AuthorListError::UnknownInstitute {
                    member: author.printed_name(),
                    institute: missing.clone(),
                });
            }
            if let Some(orcid) = &author.orcid {
                if !orcid_pattern().is_match(orcid) {
                    return Err(AuthorListError::Invalid(format!(
                        "author {:?} has malformed ORCID {orcid:?}",
                        author.printed_name()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Member database fixture standing in for the collaboration database.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberDb {
    pub institutes: Vec<Institute>,
    pub members: Vec<Author>,
}

impl MemberDb {
    pub fn from_json(text: &str) -> Result<Self, AuthorListError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, AuthorListError> {
        Self::from_json(&read(path)?)
    }
}

fn read(path: &Path) -> Result<String, AuthorListError> {
    fs::read_to_string(path).map_err(|source| AuthorListError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Collation key: accents folded, then compared by code point. Raw strings
/// break ties so the order is total.
fn sort_key(a: &Author) -> (String, String, String, String) {
    (
        fold_accents(&a.family_name),
        fold_accents(&a.initials),
        a.family_name.clone(),
        a.initials.clone(),
    )
}

/// Authors qualified at `reference_date`, sorted by family name and initials.
/// Institutes keep database order, restricted to those referenced.
pub fn snapshot_author_list(
    db: &MemberDb,
    reference_date: NaiveDate,
    header: &BTreeMap<String, String>,
) -> Result<AuthorList, AuthorListError> {
    let known: HashSet<&str> = db.institutes.iter().map(|i| i.id.as_str()).collect();
    for m in &db.members {
        if let Some(bad) = m.affiliations.iter().find(|a| !known.contains(a.as_str())) {
            return Err(AuthorListError::UnknownInstitute {
                member: m.printed_name(),
                institute: bad.clone(),
            });
        }
    }

    let mut authors: Vec<Author> = db
        .members
        .iter()
        .filter(|m| m.qualified_at(reference_date))
        .cloned()
        .collect();
    if authors.is_empty() {
        return Err(AuthorListError::NoQualifiedAuthors(reference_date));
    }
    authors.sort_by_cached_key(sort_key);

    let used: HashSet<&str> = authors
        .iter()
        .flat_map(|a| a.affiliations.iter().map(String::as_str))
        .collect();
    let institutes = db
        .institutes
        .iter()
        .filter(|i| used.contains(i.id.as_str()))
        .cloned()
        .collect();

    let mut header = header.clone();
    header.insert(HEADER_REF_DATE.to_string(), reference_date.to_string());
    let list = AuthorList {
        header,
        institutes,
        authors,
    };
    list.validate()?;
    Ok(list)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Xml,
    Tex,
}

impl std::str::FromStr for Format {
    type Err = AuthorListError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xml" => Ok(Format::Xml),
            "tex" => Ok(Format::Tex),
            _ => Err(AuthorListError::UnsupportedFormat(s.to_string())),
        }
    }
}

pub fn render_author_list(list: &AuthorList, format: Format) -> Result<String, AuthorListError> {
    list.validate()?;
    Ok(match format {
        Format::Xml => xml::render(list),
        Format::Tex => tex::render(list),
    })
}
