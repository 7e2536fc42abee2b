use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::normalize;

#[derive(Debug, Error)]
pub enum SynonymError {
    #[error("reading synonyms: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed synonyms JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{kind} entry {index}: original is empty")]
    EmptyOriginal { kind: SynonymKind, index: usize },
    #[error("{kind} entry {original:?}: duplicate synonym {synonym:?}")]
    DuplicateSynonym {
        kind: SynonymKind,
        original: String,
        synonym: String,
    },
    #[error("{kind} entries: {original:?} appears more than once")]
    DuplicateOriginal { kind: SynonymKind, original: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynonymKind {
    Institute,
    Author,
    Agency,
}

impl std::fmt::Display for SynonymKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SynonymKind::Institute => "institute",
            SynonymKind::Author => "author",
            SynonymKind::Agency => "agency",
        })
    }
}

impl std::str::FromStr for SynonymKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "institute" => Ok(SynonymKind::Institute),
            "author" => Ok(SynonymKind::Author),
            "agency" => Ok(SynonymKind::Agency),
            other => Err(format!("unknown synonym kind {other:?}")),
        }
    }
}

/// One accepted set of alternative spellings.
///
/// Institute entries carry `id`; author entries carry `inspire` and
/// `foafName`. The JSON layout follows the production synonym file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub original: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inspire: Option<String>,
    #[serde(
        rename = "foafName",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub foaf_name: Option<String>,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

impl SynonymEntry {
    pub fn new(original: impl Into<String>) -> Self {
        SynonymEntry {
            id: None,
            original: original.into(),
            inspire: None,
            foaf_name: None,
            synonyms: Vec::new(),
        }
    }

    pub fn with_synonym(mut self, synonym: impl Into<String>) -> Self {
        self.synonyms.push(synonym.into());
        self
    }

    fn spellings(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.original.as_str()).chain(self.synonyms.iter().map(String::as_str))
    }
}

/// True iff `printed` equals, after normalization, the entry's original or one
/// of its synonyms.
pub fn apply_synonyms(printed: &str, entry: &SynonymEntry) -> bool {
    let printed = normalize(printed);
    entry.spellings().any(|s| normalize(s) == printed)
}

/// Synonym lists, split by kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymDb {
    #[serde(default)]
    pub institutes: Vec<SynonymEntry>,
    #[serde(default)]
    pub authors: Vec<SynonymEntry>,
    /// Funding agency spellings. Not part of the original two-list layout, so
    /// it is omitted from the file when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agencies: Vec<SynonymEntry>,
}

/// Outcome of [`SynonymDb::add_synonym`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AddOutcome {
    Appended { index: usize },
    Created { index: usize },
}

impl SynonymDb {
    pub fn from_json(text: &str) -> Result<Self, SynonymError> {
        let db: SynonymDb = serde_json::from_str(text)?;
        db.validate()?;
        Ok(db)
    }

    pub fn load(path: &Path) -> Result<Self, SynonymError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("synonym db serializes");
        s.push('\n');
        s
    }

    pub fn list(&self, kind: SynonymKind) -> &[SynonymEntry] {
        match kind {
            SynonymKind::Institute => &self.institutes,
            SynonymKind::Author => &self.authors,
            SynonymKind::Agency => &self.agencies,
        }
    }

    fn list_mut(&mut self, kind: SynonymKind) -> &mut Vec<SynonymEntry> {
        match kind {
            SynonymKind::Institute => &mut self.institutes,
            SynonymKind::Author => &mut self.authors,
            SynonymKind::Agency => &mut self.agencies,
        }
    }

    pub fn validate(&self) -> Result<(), SynonymError> {
        for kind in [SynonymKind::Institute, SynonymKind::Author, SynonymKind::Agency] {
            let mut originals = HashSet::new();
            for (index, entry) in self.list(kind).iter().enumerate() {
                if entry.original.trim().is_empty() {
                    return Err(SynonymError::EmptyOriginal { kind, index });
                }
                if !originals.insert(normalize(&entry.original)) {
                    return Err(SynonymError::DuplicateOriginal {
                        kind,
                        original: entry.original.clone(),
                    });
                }
                let mut seen = HashSet::new();
                for syn in &entry.synonyms {
                    if !seen.insert(normalize(syn)) {
                        return Err(SynonymError::DuplicateSynonym {
                            kind,
                            original: entry.original.clone(),
                            synonym: syn.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Entry whose normalized original equals `original`.
    pub fn find(&self, kind: SynonymKind, original: &str) -> Option<&SynonymEntry> {
        let key = normalize(original);
        self.list(kind).iter().find(|e| normalize(&e.original) == key)
    }

    /// Institute entry by registry id or by original spelling.
    pub fn find_institute(&self, name: &str, ids: &[&str]) -> Option<&SynonymEntry> {
        self.find(SynonymKind::Institute, name).or_else(|| {
            self.institutes
                .iter()
                .find(|e| e.id.as_deref().is_some_and(|id| ids.contains(&id)))
        })
    }

    /// Author entry by printed name, INSPIRE id or FOAF name.
    pub fn find_author(&self, printed: &str, inspire: &str, foaf: &str) -> Option<&SynonymEntry> {
        self.find(SynonymKind::Author, printed).or_else(|| {
            self.authors.iter().find(|e| {
                (!inspire.is_empty() && e.inspire.as_deref() == Some(inspire))
                    || (!foaf.is_empty()
                        && e.foaf_name.as_deref().map(normalize) == Some(normalize(foaf)))
            })
        })
    }

    /// Case-insensitive substring search over originals and synonyms.
    pub fn search(&self, query: &str) -> Vec<(SynonymKind, &SynonymEntry)> {
        let q = normalize(query);
        let mut hits = Vec::new();
        for kind in [SynonymKind::Institute, SynonymKind::Author, SynonymKind::Agency] {
            for entry in self.list(kind) {
                if entry.spellings().any(|s| normalize(s).contains(&q)) {
                    hits.push((kind, entry));
                }
            }
        }
        hits
    }

    /// Record `synonym` for the entry whose original is `original`, creating
    /// the entry when absent. Returns `None` when the spelling is already
    /// known for that entry.
    pub fn add_synonym(
        &mut self,
        kind: SynonymKind,
        original: &str,
        synonym: &str,
    ) -> Option<AddOutcome> {
        let key = normalize(original);
        let list = self.list_mut(kind);
        if let Some(index) = list.iter().position(|e| normalize(&e.original) == key) {
            let entry = &mut list[index];
            let syn = normalize(synonym);
            if entry.spellings().any(|s| normalize(s) == syn) {
                return None;
            }
            entry.synonyms.push(synonym.to_string());
            return Some(AddOutcome::Appended { index });
        }
        if normalize(synonym) == key {
            return None;
        }
        let mut entry = SynonymEntry::new(original).with_synonym(synonym);
        if kind == SynonymKind::Institute {
            let next = list
                .iter()
                .filter_map(|e| e.id.as_deref()?.parse::<u64>().ok())
                .max()
                .map_or(1, |m| m + 1);
            entry.id = Some(next.to_string());
        }
        list.push(entry);
        Some(AddOutcome::Created {
            index: list.len() - 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAPER_LISTINGS: &str = r#"{
        "institutes": [{
            "id": "2",
            "original": "Department of Physics, University of Alberta, Edmonton AB, Canada",
            "synonyms": ["Department of Physics, University of Alberta, Edmonton, Alberta, Canada"]
        }],
        "authors": [{
            "original": "A. B\\\"ub",
            "inspire": "INSPIRE-00000000",
            "foafName": "A Bub",
            "synonyms": ["A. Bòb", "A. B¨ b"]
        }]
    }"#;

    #[test]
    fn parses_both_listings() {
        let db = SynonymDb::from_json(PAPER_LISTINGS).unwrap();
        assert_eq!(db.institutes[0].id.as_deref(), Some("2"));
        assert_eq!(db.authors[0].original, "A. B\\\"ub");
        assert_eq!(db.authors[0].foaf_name.as_deref(), Some("A Bub"));
        assert_eq!(db.authors[0].synonyms[0], "A. Bòb");
    }

    #[test]
    fn alberta_synonym_applies() {
        let db = SynonymDb::from_json(PAPER_LISTINGS).unwrap();
        assert!(apply_synonyms(
            "Department of Physics, University of Alberta, Edmonton, Alberta, Canada",
            &db.institutes[0]
        ));
        assert!(!apply_synonyms("Department of Physics, McGill University", &db.institutes[0]));
    }

    #[test]
    fn author_synonym_applies() {
        let db = SynonymDb::from_json(PAPER_LISTINGS).unwrap();
        assert!(apply_synonyms("A. Bòb", &db.authors[0]));
        assert!(apply_synonyms("  a.  bòb ", &db.authors[0]));
        assert!(!apply_synonyms("Z. Zed", &db.authors[0]));
    }

    #[test]
    fn serialization_keeps_listing_keys() {
        let db = SynonymDb::from_json(PAPER_LISTINGS).unwrap();
        let json = db.to_json();
        assert!(json.contains("\"foafName\""));
        assert!(!json.contains("agencies"));
        assert_eq!(SynonymDb::from_json(&json).unwrap(), db);
    }

    #[test]
    fn rejects_duplicate_synonyms() {
        let err = SynonymDb::from_json(
            r#"{"institutes":[{"original":"X","synonyms":["Y","  y "]}],"authors":[]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, SynonymError::DuplicateSynonym { .. }));
    }

    #[test]
    fn rejects_duplicate_originals() {
        let err = SynonymDb::from_json(
            r#"{"authors":[{"original":"A. B"},{"original":"a.  b"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, SynonymError::DuplicateOriginal { .. }));
    }

    #[test]
    fn add_synonym_appends_creates_and_rejects() {
        let mut db = SynonymDb::from_json(PAPER_LISTINGS).unwrap();
        let alberta = db.institutes[0].original.clone();
        assert_eq!(
            db.add_synonym(SynonymKind::Institute, &alberta, "Univ. of Alberta"),
            Some(AddOutcome::Appended { index: 0 })
        );
        assert_eq!(db.add_synonym(SynonymKind::Institute, &alberta, "univ. of alberta"), None);
        assert_eq!(
            db.add_synonym(SynonymKind::Institute, "New Place", "New  Place, Earth"),
            Some(AddOutcome::Created { index: 1 })
        );
        assert_eq!(db.institutes[1].id.as_deref(), Some("3"));
        db.validate().unwrap();
    }

    #[test]
    fn search_spans_kinds() {
        let db = SynonymDb::from_json(PAPER_LISTINGS).unwrap();
        let hits = db.search("alberta");
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, SynonymKind::Institute);
        assert_eq!(hits[0].1.id.as_deref(), Some("2"));
        assert_eq!(db.search("BÒB").len(), 1);
    }
}
