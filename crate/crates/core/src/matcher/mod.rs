//! Fuzzy reconciliation of the canonical author list with a proof.

mod compare;
mod initials;
mod levenshtein;
mod normalize;
mod synonyms;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compare::{compare, compare_with_results, Comparison};
pub use initials::{classify_initials, split_printed_name, InitialsClass, InitialsShape};
pub use levenshtein::{levenshtein, similarity};
pub use normalize::{fold_accents, normalize, normalize_folded, normalize_with, NormalizeOptions};
pub use synonyms::{apply_synonyms, AddOutcome, SynonymDb, SynonymEntry, SynonymError, SynonymKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    #[error("no candidates to match against")]
    NoCandidates,
}

/// Cutoffs for counting a pair as matched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchThresholds {
    /// Largest normalized author-name distance still counted as a match.
    pub author_distance: usize,
    /// Smallest institute-name similarity still counted as a match.
    pub close_similarity: f64,
}

impl Default for MatchThresholds {
    fn default() -> Self {
        MatchThresholds {
            author_distance: 2,
            close_similarity: 0.80,
        }
    }
}

/// Pairing of one reference entry with a proof entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub reference_index: usize,
    pub target_index: Option<usize>,
    pub distance: usize,
    pub similarity: f64,
    pub suppressed_by_synonym: bool,
}

/// Candidate closest to `query` after normalization; ties go to the smallest
/// index.
pub fn best_match<S: AsRef<str>>(query: &str, candidates: &[S]) -> Result<(usize, usize), MatchError> {
    let q: Vec<char> = normalize(query).chars().collect();
    candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let c: Vec<char> = normalize(c.as_ref()).chars().collect();
            (i, levenshtein::levenshtein_chars(&q, &c))
        })
        .min_by_key(|&(i, d)| (d, i))
        .ok_or(MatchError::NoCandidates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_match_examples() {
        assert_eq!(best_match("race", &["raise", "racer"]), Ok((1, 1)));
        assert_eq!(best_match("b", &["a", "b", "c"]), Ok((1, 0)));
        assert_eq!(best_match("x", &["a", "b", "c"]), Ok((0, 1)));
        assert_eq!(best_match::<&str>("x", &[]), Err(MatchError::NoCandidates));
    }

    #[test]
    fn thresholds_json() {
        let t: MatchThresholds = serde_json::from_str(r#"{"author_distance": 3, "close_similarity": 0.9}"#).unwrap();
        assert_eq!(t.author_distance, 3);
        assert_eq!(MatchThresholds::default().author_distance, 2);
    }
}
