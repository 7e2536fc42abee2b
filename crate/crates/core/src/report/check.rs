//! One proof-check run from files on disk, and the inputs record that lets
//! a report be regenerated later with updated synonyms.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Local, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DiscrepancyReport, ReportMeta};
use crate::authorlist::{load_agencies, parse_author_list, AuthorListError};
use crate::matcher::{compare, MatchThresholds, SynonymDb};
use crate::pdfextract::{extract_text, load_pretokenized, looks_like_pdf, ExtractError, PageText};
use crate::proofparse::{parse_proof, ProofError, PublisherProfile};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("author list: {0}")]
    AuthorList(#[from] AuthorListError),
    #[error("proof text: {0}")]
    Extract(#[from] ExtractError),
    #[error("proof layout: {0}")]
    Proof(#[from] ProofError),
    #[error("publisher profile {0:?} is neither a file nor a bundled profile")]
    UnknownPublisher(String),
    #[error("inputs record: {0}")]
    Inputs(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckError + '_ {
    move |source| CheckError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// How to read the proof file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProofFormat {
    /// PDF when the file starts with the PDF signature, text otherwise.
    #[default]
    Auto,
    Pdf,
    Text,
}

impl std::str::FromStr for ProofFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(ProofFormat::Auto),
            "pdf" => Ok(ProofFormat::Pdf),
            "text" | "txt" => Ok(ProofFormat::Text),
            other => Err(format!("unknown proof format {other:?} (expected auto, pdf or text)")),
        }
    }
}

/// Everything a check needs besides the synonym database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckInputs {
    /// Author list XML sent to the journal.
    pub author_list: PathBuf,
    pub proof: PathBuf,
    #[serde(default)]
    pub proof_format: ProofFormat,
    /// Bundled profile name (`aps`, `elsevier`) or a profile JSON path.
    pub publisher: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agencies: Option<PathBuf>,
    #[serde(default)]
    pub thresholds: MatchThresholds,
    #[serde(default)]
    pub document: String,
    /// Fixed report date; today when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creation_date: Option<NaiveDate>,
}

/// `<report>.inputs.json` next to a report file.
pub fn inputs_path(report: &Path) -> PathBuf {
    report.with_extension("inputs.json")
}

impl CheckInputs {
    pub fn load(path: &Path) -> Result<Self, CheckError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("inputs serialize");
        s.push('\n');
        s
    }

    /// Copy with relative paths anchored at `base`.
    pub fn resolved(&self, base: &Path) -> CheckInputs {
        let anchor = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let publisher_path = base.join(&self.publisher);
        CheckInputs {
            author_list: anchor(&self.author_list),
            proof: anchor(&self.proof),
            publisher: if Path::new(&self.publisher).is_relative() && publisher_path.is_file() {
                publisher_path.display().to_string()
            } else {
                self.publisher.clone()
            },
            agencies: self.agencies.as_deref().map(anchor),
            ..self.clone()
        }
    }
}

/// The profile and the publisher name shown in reports.
pub fn resolve_publisher(spec: &str) -> Result<(PublisherProfile, String), CheckError> {
    let path = Path::new(spec);
    if path.is_file() {
        let profile = PublisherProfile::load(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_uppercase())
            .unwrap_or_default();
        return Ok((profile, name));
    }
    let text = crate::template::bundled_profile(spec).ok_or_else(|| CheckError::UnknownPublisher(spec.to_string()))?;
    Ok((PublisherProfile::from_json(text)?, spec.to_uppercase()))
}

/// Read proof pages according to `format`.
pub fn load_proof_pages(path: &Path, format: ProofFormat) -> Result<Vec<PageText>, CheckError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let pdf = match format {
        ProofFormat::Pdf => true,
        ProofFormat::Text => false,
        ProofFormat::Auto => looks_like_pdf(&bytes),
    };
    if pdf {
        Ok(extract_text(&bytes)?)
    } else {
        Ok(load_pretokenized(&String::from_utf8_lossy(&bytes))?)
    }
}

/// Run the whole check: parse the author list, read and segment the proof,
/// compare.
pub fn run_check(inputs: &CheckInputs, synonyms: &SynonymDb) -> Result<DiscrepancyReport, CheckError> {
    let xml = fs::read_to_string(&inputs.author_list).map_err(io_err(&inputs.author_list))?;
    let list = parse_author_list(&xml)?.list;
    let (profile, publisher) = resolve_publisher(&inputs.publisher)?;
    let pages = load_proof_pages(&inputs.proof, inputs.proof_format)?;
    let segments = parse_proof(&pages, &profile)?;
    let agencies = match &inputs.agencies {
        Some(p) => load_agencies(p)?,
        None => Vec::new(),
    };
    let filename = inputs
        .proof
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let meta = ReportMeta {
        publisher,
        document: inputs.document.clone(),
        filename,
        creation_date: inputs.creation_date.unwrap_or_else(|| Local::now().date_naive()),
    };
    Ok(compare(&list, &segments, synonyms, &agencies, &inputs.thresholds, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_publishers() {
        let (p, name) = resolve_publisher("aps").unwrap();
        assert_eq!(name, "APS");
        assert_eq!(p.ack_heading, "Acknowledgements");
        assert!(matches!(resolve_publisher("nature"), Err(CheckError::UnknownPublisher(_))));
    }

    #[test]
    fn inputs_sidecar_name() {
        assert_eq!(
            inputs_path(Path::new("/r/ANA_x.json")),
            PathBuf::from("/r/ANA_x.inputs.json")
        );
    }
}
