//! Analysis reference codes such as `ANA-SUSY-2019-04-PAPER`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("reference code {code:?} does not match ANA-GROUP-YEAR-NN[-SUFFIX]")]
pub struct RefCodeError {
    pub code: String,
}

/// Document kind carried by the optional suffix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DocumentKind {
    Paper,
    /// Internal note with its number.
    Int(u32),
    Conf,
    Pub,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefCode {
    pub group: String,
    pub year: u16,
    pub number: u8,
    pub document: Option<DocumentKind>,
}

fn grammar() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^ANA-([A-Z]{4})-([0-9]{4})-([0-9]{2})(?:-(PAPER|INT([0-9]+)|CONF|PUB))?$")
            .expect("valid pattern")
    })
}

impl RefCode {
    /// The analysis part without document suffix.
    pub fn analysis(&self) -> String {
        format!("ANA-{}-{:04}-{:02}", self.group, self.year, self.number)
    }

    /// The same analysis with a different document suffix.
    pub fn with_document(&self, document: DocumentKind) -> RefCode {
        RefCode {
            document: Some(document),
            ..self.clone()
        }
    }
}

impl FromStr for RefCode {
    type Err = RefCodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || RefCodeError { code: s.to_string() };
        let caps = grammar().captures(s).ok_or_else(err)?;
        let document = match caps.get(4).map(|m| m.as_str()) {
            None => None,
            Some("PAPER") => Some(DocumentKind::Paper),
            Some("CONF") => Some(DocumentKind::Conf),
            Some("PUB") => Some(DocumentKind::Pub),
            Some(_) => Some(DocumentKind::Int(caps[5].parse().map_err(|_| err())?)),
        };
        Ok(RefCode {
            group: caps[1].to_string(),
            year: caps[2].parse().map_err(|_| err())?,
            number: caps[3].parse().map_err(|_| err())?,
            document,
        })
    }
}

impl fmt::Display for RefCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.analysis())?;
        match self.document {
            None => Ok(()),
            Some(DocumentKind::Paper) => f.write_str("-PAPER"),
            Some(DocumentKind::Int(n)) => write!(f, "-INT{n}"),
            Some(DocumentKind::Conf) => f.write_str("-CONF"),
            Some(DocumentKind::Pub) => f.write_str("-PUB"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_grammar() {
        let c: RefCode = "ANA-SUSY-2019-04".parse().unwrap();
        assert_eq!((c.group.as_str(), c.year, c.number, c.document), ("SUSY", 2019, 4, None));
        let p: RefCode = "ANA-EXOT-2017-24-PAPER".parse().unwrap();
        assert_eq!(p.document, Some(DocumentKind::Paper));
        let i: RefCode = "ANA-HIGG-2020-01-INT2".parse().unwrap();
        assert_eq!(i.document, Some(DocumentKind::Int(2)));
        assert_eq!(i.to_string(), "ANA-HIGG-2020-01-INT2");
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["ANA-SUSY-19-4", "ANA-SUS-2019-04", "ana-susy-2019-04", "ANA-SUSY-2019-04-DRAFT", ""] {
            assert!(bad.parse::<RefCode>().is_err(), "{bad}");
        }
    }
}
