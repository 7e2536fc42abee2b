//! Proof-check report: JSON layout, HTML rendering and the HTTP service.

mod html;
pub mod check;
pub mod server;

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::ser::PrettyFormatter;

pub use html::render_html;

/// One finding. `extra` holds data the UI does not show.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub reference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub printed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<usize>,
    pub detail: String,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl ReportEntry {
    pub fn new(reference: impl Into<String>, detail: impl Into<String>) -> Self {
        ReportEntry {
            reference: reference.into(),
            printed: None,
            distance: None,
            detail: detail.into(),
            extra: serde_json::Map::new(),
        }
    }

    pub fn printed(mut self, printed: impl Into<String>) -> Self {
        self.printed = Some(printed.into());
        self
    }

    pub fn distance(mut self, distance: usize) -> Self {
        self.distance = Some(distance);
        self
    }

    pub fn extra(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.extra.insert(key.to_string(), value.into());
        self
    }
}

mod creation_date_format {
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    const FORMAT: &str = "%d-%b-%Y";

    pub fn serialize<S: Serializer>(d: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&d.format(FORMAT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
        let s = String::deserialize(d)?;
        NaiveDate::parse_from_str(&s, FORMAT).map_err(serde::de::Error::custom)
    }
}

/// Comparison outcome. Field order and spelling are the on-disk contract,
/// including `authors_puntuation_list` and `founding_agencies_*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscrepancyReport {
    pub ref_code: String,
    pub ref_date: NaiveDate,
    #[serde(with = "creation_date_format")]
    pub creation_date: NaiveDate,
    pub publisher: String,
    pub document: String,
    pub filename: String,
    pub authors_missing_skip: Vec<ReportEntry>,
    pub authors_missing_list: Vec<ReportEntry>,
    pub authors_puntuation_list: Vec<ReportEntry>,
    pub institutes_missing_pdf_list: Vec<ReportEntry>,
    pub institutes_missing_pdf_skip: Vec<ReportEntry>,
    pub authors_mismatched_list: Vec<ReportEntry>,
    pub authors_not_deceased_list: Vec<ReportEntry>,
    pub authors_deceased_list: Vec<ReportEntry>,
    pub institutes_close_matches_list: Vec<ReportEntry>,
    pub founding_agencies_missing: Vec<ReportEntry>,
    pub founding_agencies_wrong: Vec<ReportEntry>,
}

/// Serialized key order.
pub const REPORT_KEYS: [&str; 17] = [
    "ref_code",
    "ref_date",
    "creation_date",
    "publisher",
    "document",
    "filename",
    "authors_missing_skip",
    "authors_missing_list",
    "authors_puntuation_list",
    "institutes_missing_pdf_list",
    "institutes_missing_pdf_skip",
    "authors_mismatched_list",
    "authors_not_deceased_list",
    "authors_deceased_list",
    "institutes_close_matches_list",
    "founding_agencies_missing",
    "founding_agencies_wrong",
];

/// Header values that do not come from the author list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub publisher: String,
    pub document: String,
    pub filename: String,
    pub creation_date: NaiveDate,
}

/// A report category, in display order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Category {
    pub key: &'static str,
    pub title: &'static str,
    /// Key of the skip list shown collapsed under this category.
    pub skip_key: Option<&'static str>,
}

pub const CATEGORIES: [Category; 9] = [
    Category { key: "authors_missing_list", title: "Authors missing from the proof", skip_key: Some("authors_missing_skip") },
    Category { key: "authors_puntuation_list", title: "Author initials punctuation", skip_key: None },
    Category { key: "institutes_missing_pdf_list", title: "Institutes missing from the proof", skip_key: Some("institutes_missing_pdf_skip") },
    Category { key: "institutes_close_matches_list", title: "Institutes with close matches", skip_key: None },
    Category { key: "authors_mismatched_list", title: "Authors with mismatched affiliations", skip_key: None },
    Category { key: "authors_deceased_list", title: "Deceased authors not marked in the proof", skip_key: None },
    Category { key: "authors_not_deceased_list", title: "Authors wrongly marked deceased", skip_key: None },
    Category { key: "founding_agencies_missing", title: "Funding agencies missing", skip_key: None },
    Category { key: "founding_agencies_wrong", title: "Funding text naming no known agency", skip_key: None },
];

impl DiscrepancyReport {
    pub fn empty(ref_code: impl Into<String>, ref_date: NaiveDate, meta: ReportMeta) -> Self {
        DiscrepancyReport {
            ref_code: ref_code.into(),
            ref_date,
            creation_date: meta.creation_date,
            publisher: meta.publisher,
            document: meta.document,
            filename: meta.filename,
            authors_missing_skip: Vec::new(),
            authors_missing_list: Vec::new(),
            authors_puntuation_list: Vec::new(),
            institutes_missing_pdf_list: Vec::new(),
            institutes_missing_pdf_skip: Vec::new(),
            authors_mismatched_list: Vec::new(),
            authors_not_deceased_list: Vec::new(),
            authors_deceased_list: Vec::new(),
            institutes_close_matches_list: Vec::new(),
            founding_agencies_missing: Vec::new(),
            founding_agencies_wrong: Vec::new(),
        }
    }

    /// The list stored under a serialized key.
    pub fn list(&self, key: &str) -> Option<&[ReportEntry]> {
        Some(match key {
            "authors_missing_skip" => &self.authors_missing_skip,
            "authors_missing_list" => &self.authors_missing_list,
            "authors_puntuation_list" => &self.authors_puntuation_list,
            "institutes_missing_pdf_list" => &self.institutes_missing_pdf_list,
            "institutes_missing_pdf_skip" => &self.institutes_missing_pdf_skip,
            "authors_mismatched_list" => &self.authors_mismatched_list,
            "authors_not_deceased_list" => &self.authors_not_deceased_list,
            "authors_deceased_list" => &self.authors_deceased_list,
            "institutes_close_matches_list" => &self.institutes_close_matches_list,
            "founding_agencies_missing" => &self.founding_agencies_missing,
            "founding_agencies_wrong" => &self.founding_agencies_wrong,
            _ => return None,
        })
    }

    /// `(key, count)` for the eleven lists in serialized order.
    pub fn counts(&self) -> Vec<(&'static str, usize)> {
        REPORT_KEYS[6..]
            .iter()
            .map(|k| (*k, self.list(k).map_or(0, <[_]>::len)))
            .collect()
    }

    /// Number of entries outside the skip lists.
    pub fn findings(&self) -> usize {
        self.counts()
            .into_iter()
            .filter(|(k, _)| !k.ends_with("_skip"))
            .map(|(_, n)| n)
            .sum()
    }

    /// `<ref_code>_<filename>`, the report's file stem.
    pub fn name(&self) -> String {
        format!("{}_{}", self.ref_code, self.filename)
    }

    pub fn path_in(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.json", self.name()))
    }
}

/// Canonical JSON: four-space indentation, fixed key order, trailing newline.
pub fn write_report(report: &DiscrepancyReport) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PrettyFormatter::with_indent(b"    "));
    report.serialize(&mut ser).expect("report serializes");
    let mut s = String::from_utf8(buf).expect("serde_json emits UTF-8");
    s.push('\n');
    s
}

pub fn parse_report(json: &str) -> Result<DiscrepancyReport, serde_json::Error> {
    serde_json::from_str(json)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> ReportMeta {
        ReportMeta {
            publisher: "APS".into(),
            document: "doc1053".into(),
            filename: "LY15578_proof_v2".into(),
            creation_date: NaiveDate::from_ymd_opt(2018, 10, 29).unwrap(),
        }
    }

    fn sample() -> DiscrepancyReport {
        DiscrepancyReport::empty("EXOT-2017-24", NaiveDate::from_ymd_opt(2018, 7, 31).unwrap(), meta())
    }

    #[test]
    fn empty_report_header_values() {
        let json = write_report(&sample());
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["ref_code"], "EXOT-2017-24");
        assert_eq!(v["ref_date"], "2018-07-31");
        assert_eq!(v["creation_date"], "29-Oct-2018");
        assert_eq!(v["publisher"], "APS");
        assert_eq!(v["filename"], "LY15578_proof_v2");
        let arrays = v.as_object().unwrap().values().filter(|x| x.is_array()).count();
        assert_eq!(arrays, 11);
    }

    #[test]
    fn key_order_is_fixed() {
        let json = write_report(&sample());
        let mut last = 0;
        for key in REPORT_KEYS {
            let pos = json.find(&format!("\"{key}\"")).unwrap();
            assert!(pos >= last, "{key} out of order");
            last = pos;
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let mut r = sample();
        r.authors_missing_list.push(ReportEntry::new("X. Nonamečič", "no proof author within distance 2").printed("X. Nonamež ciž c").distance(4));
        r.institutes_close_matches_list
            .push(ReportEntry::new("Università di Roma", "close").extra("similarity", 0.95));
        let json = write_report(&r);
        let back = parse_report(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(write_report(&back), json);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&write_report(&sample())).unwrap();
        v["authors_punctuation_list"] = serde_json::json!([]);
        assert!(parse_report(&v.to_string()).is_err());
    }

    #[test]
    fn counts_and_findings() {
        let mut r = sample();
        r.authors_missing_skip.push(ReportEntry::new("a", "b"));
        r.founding_agencies_wrong.push(ReportEntry::new("c", "d"));
        assert_eq!(r.findings(), 1);
        assert_eq!(r.counts().len(), 11);
        assert_eq!(r.name(), "EXOT-2017-24_LY15578_proof_v2");
    }
}
