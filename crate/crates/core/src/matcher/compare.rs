//! Reference-versus-proof comparison producing a [`DiscrepancyReport`].

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use chrono::NaiveDate;

use super::initials::{classify_initials, split_printed_name};
use super::levenshtein::{levenshtein_chars, similarity};
use super::normalize::{normalize, normalize_folded};
use super::synonyms::{apply_synonyms, SynonymDb, SynonymEntry, SynonymKind};
use super::{MatchResult, MatchThresholds};
use crate::authorlist::{AuthorList, FundingAgency};
use crate::proofparse::ProofSegments;
use crate::report::{DiscrepancyReport, ReportEntry, ReportMeta};

/// Report plus the underlying pairings, in reference order.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub report: DiscrepancyReport,
    pub authors: Vec<MatchResult>,
    pub institutes: Vec<MatchResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairKind {
    Exact,
    Fuzzy,
    /// Paired only through a synonym; excluded from follow-up checks.
    Synonym,
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    target: usize,
    distance: usize,
    kind: PairKind,
}

/// Compare the canonical list with a segmented proof.
pub fn compare(
    reference: &AuthorList,
    proof: &ProofSegments,
    synonyms: &SynonymDb,
    agencies: &[FundingAgency],
    thresholds: &MatchThresholds,
    meta: ReportMeta,
) -> DiscrepancyReport {
    compare_with_results(reference, proof, synonyms, agencies, thresholds, meta).report
}

pub fn compare_with_results(
    reference: &AuthorList,
    proof: &ProofSegments,
    synonyms: &SynonymDb,
    agencies: &[FundingAgency],
    thresholds: &MatchThresholds,
    meta: ReportMeta,
) -> Comparison {
    let ref_date = reference.ref_date().unwrap_or(NaiveDate::MIN);
    let mut report = DiscrepancyReport::empty(reference.ref_code(), ref_date, meta);

    let inst_pairs = match_institutes(reference, proof, synonyms, thresholds, &mut report);
    let author_pairs = match_authors(reference, proof, synonyms, thresholds, &mut report);
    check_affiliations(reference, proof, &inst_pairs, &author_pairs, &mut report);
    check_deceased(reference, proof, &author_pairs, &mut report);
    check_funding(&proof.funding_text, agencies, ref_date, synonyms, &mut report);

    let results = |pairs: &[Option<Pair>], refs: &[String], targets: &[String]| -> Vec<MatchResult> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, p)| match p {
                Some(p) => {
                    let a = normalize_folded(&refs[i]).chars().count();
                    let b = normalize_folded(&targets[p.target]).chars().count();
                    MatchResult {
                        reference_index: i,
                        target_index: Some(p.target),
                        distance: p.distance,
                        similarity: similarity(p.distance, a, b),
                        suppressed_by_synonym: p.kind == PairKind::Synonym,
                    }
                }
                None => MatchResult {
                    reference_index: i,
                    target_index: None,
                    distance: 0,
                    similarity: 0.0,
                    suppressed_by_synonym: false,
                },
            })
            .collect()
    };
    let ref_names: Vec<String> = reference.authors.iter().map(|a| a.printed_name()).collect();
    let proof_names: Vec<String> = proof.authors.iter().map(|a| a.name.clone()).collect();
    let ref_insts: Vec<String> = reference.institutes.iter().map(|i| i.name.clone()).collect();
    let proof_insts: Vec<String> = proof.institutes.iter().map(|i| i.name.clone()).collect();

    Comparison {
        authors: results(&author_pairs, &ref_names, &proof_names),
        institutes: results(&inst_pairs, &ref_insts, &proof_insts),
        report,
    }
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

/// Exact pairing on folded keys, consuming targets in order.
fn exact_pass(refs: &[Vec<char>], targets: &[Vec<char>], used: &mut [bool]) -> Vec<Option<Pair>> {
    let mut queues: HashMap<&[char], VecDeque<usize>> = HashMap::new();
    for (i, t) in targets.iter().enumerate() {
        queues.entry(t.as_slice()).or_default().push_back(i);
    }
    refs.iter()
        .map(|r| {
            let target = queues.get_mut(r.as_slice())?.pop_front()?;
            used[target] = true;
            Some(Pair {
                target,
                distance: 0,
                kind: PairKind::Exact,
            })
        })
        .collect()
}

fn author_synonym<'a>(db: &'a SynonymDb, a: &crate::authorlist::Author) -> Option<&'a SynonymEntry> {
    db.find_author(&a.printed_name(), &a.inspire_id, &a.foaf_name)
}

fn institute_synonym<'a>(db: &'a SynonymDb, inst: &crate::authorlist::Institute) -> Option<&'a SynonymEntry> {
    db.find_institute(&inst.name, &[inst.id.as_str(), inst.inspire_ref.as_str()])
}

fn match_authors(
    reference: &AuthorList,
    proof: &ProofSegments,
    synonyms: &SynonymDb,
    thresholds: &MatchThresholds,
    report: &mut DiscrepancyReport,
) -> Vec<Option<Pair>> {
    let refs: Vec<Vec<char>> = reference
        .authors
        .iter()
        .map(|a| chars(&normalize_folded(&a.printed_name())))
        .collect();
    let targets: Vec<Vec<char>> = proof.authors.iter().map(|a| chars(&normalize_folded(&a.name))).collect();
    let mut used = vec![false; targets.len()];
    let mut pairs = exact_pass(&refs, &targets, &mut used);

    let limit = thresholds.author_distance;
    for (i, r) in refs.iter().enumerate() {
        if pairs[i].is_some() {
            continue;
        }
        let mut best: Option<(usize, usize)> = None;
        for (j, t) in targets.iter().enumerate() {
            if used[j] || r.len().abs_diff(t.len()) > limit {
                continue;
            }
            let d = levenshtein_chars(r, t);
            if d <= limit && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        if let Some((distance, target)) = best {
            used[target] = true;
            pairs[i] = Some(Pair {
                target,
                distance,
                kind: PairKind::Fuzzy,
            });
        }
    }

    for (i, author) in reference.authors.iter().enumerate() {
        let printed_ref = author.printed_name();
        let entry = author_synonym(synonyms, author);
        match pairs[i] {
            Some(pair) => {
                let printed = &proof.authors[pair.target].name;
                let covered = entry.is_some_and(|e| apply_synonyms(printed, e));
                let ref_shape = classify_initials(&author.initials);
                let proof_shape = classify_initials(&split_printed_name(printed).0);
                let punct = ref_shape != proof_shape;
                if covered && (punct || pair.kind == PairKind::Fuzzy) {
                    report.authors_missing_skip.push(
                        ReportEntry::new(&printed_ref, "printed spelling accepted by synonym")
                            .printed(printed)
                            .distance(pair.distance),
                    );
                } else if punct {
                    report.authors_puntuation_list.push(
                        ReportEntry::new(
                            &printed_ref,
                            format!(
                                "initials {:?} printed as {:?}",
                                author.initials,
                                split_printed_name(printed).0
                            ),
                        )
                        .printed(printed)
                        .distance(pair.distance)
                        .extra("reference_class", serde_json::to_value(ref_shape).unwrap_or_default())
                        .extra("printed_class", serde_json::to_value(proof_shape).unwrap_or_default()),
                    );
                }
            }
            None => {
                let hit = entry.and_then(|e| {
                    proof
                        .authors
                        .iter()
                        .enumerate()
                        .find(|(j, p)| !used[*j] && apply_synonyms(&p.name, e))
                        .map(|(j, _)| j)
                });
                match hit {
                    Some(target) => {
                        used[target] = true;
                        let distance = levenshtein_chars(&refs[i], &targets[target]);
                        pairs[i] = Some(Pair {
                            target,
                            distance,
                            kind: PairKind::Synonym,
                        });
                        report.authors_missing_skip.push(
                            ReportEntry::new(&printed_ref, "not found verbatim; accepted by synonym")
                                .printed(&proof.authors[target].name)
                                .distance(distance),
                        );
                    }
                    None => {
                        let mut entry = ReportEntry::new(
                            &printed_ref,
                            format!("no proof author within distance {limit}"),
                        );
                        if !author.inspire_id.is_empty() {
                            entry = entry.extra("inspire_id", author.inspire_id.clone());
                        }
                        report.authors_missing_list.push(entry);
                    }
                }
            }
        }
    }
    pairs
}

fn match_institutes(
    reference: &AuthorList,
    proof: &ProofSegments,
    synonyms: &SynonymDb,
    thresholds: &MatchThresholds,
    report: &mut DiscrepancyReport,
) -> Vec<Option<Pair>> {
    let refs: Vec<Vec<char>> = reference.institutes.iter().map(|i| chars(&normalize_folded(&i.name))).collect();
    let targets: Vec<Vec<char>> = proof.institutes.iter().map(|i| chars(&normalize_folded(&i.name))).collect();
    let mut used = vec![false; targets.len()];
    let mut pairs = exact_pass(&refs, &targets, &mut used);

    for (i, r) in refs.iter().enumerate() {
        if pairs[i].is_some() {
            continue;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for (j, t) in targets.iter().enumerate() {
            if used[j] {
                continue;
            }
            let longest = r.len().max(t.len());
            // similarity cannot reach the cutoff when lengths differ too much
            if longest > 0 && 1.0 - (r.len().abs_diff(t.len()) as f64 / longest as f64) < thresholds.close_similarity {
                continue;
            }
            let d = levenshtein_chars(r, t);
            let s = similarity(d, r.len(), t.len());
            if s >= thresholds.close_similarity && best.is_none_or(|(bs, _, _)| s > bs) {
                best = Some((s, d, j));
            }
        }
        if let Some((_, distance, target)) = best {
            used[target] = true;
            pairs[i] = Some(Pair {
                target,
                distance,
                kind: PairKind::Fuzzy,
            });
        }
    }

    for (i, inst) in reference.institutes.iter().enumerate() {
        let entry = institute_synonym(synonyms, inst);
        match pairs[i] {
            Some(pair) => {
                let printed = &proof.institutes[pair.target].name;
                let (a, b) = (chars(&normalize(&inst.name)), chars(&normalize(printed)));
                if a == b {
                    continue;
                }
                let d = levenshtein_chars(&a, &b);
                let s = similarity(d, a.len(), b.len());
                if entry.is_some_and(|e| apply_synonyms(printed, e)) {
                    report.institutes_missing_pdf_skip.push(
                        ReportEntry::new(&inst.name, "printed spelling accepted by synonym")
                            .printed(printed)
                            .distance(d)
                            .extra("id", inst.id.clone()),
                    );
                } else {
                    report.institutes_close_matches_list.push(
                        ReportEntry::new(&inst.name, format!("similarity {s:.3}"))
                            .printed(printed)
                            .distance(d)
                            .extra("id", inst.id.clone())
                            .extra("similarity", (s * 1000.0).round() / 1000.0),
                    );
                }
            }
            None => {
                let hit = entry.and_then(|e| {
                    proof
                        .institutes
                        .iter()
                        .enumerate()
                        .find(|(j, p)| !used[*j] && apply_synonyms(&p.name, e))
                        .map(|(j, _)| j)
                });
                match hit {
                    Some(target) => {
                        used[target] = true;
                        let distance = levenshtein_chars(&refs[i], &targets[target]);
                        pairs[i] = Some(Pair {
                            target,
                            distance,
                            kind: PairKind::Synonym,
                        });
                        report.institutes_missing_pdf_skip.push(
                            ReportEntry::new(&inst.name, "not found verbatim; accepted by synonym")
                                .printed(&proof.institutes[target].name)
                                .distance(distance)
                                .extra("id", inst.id.clone()),
                        );
                    }
                    None => report.institutes_missing_pdf_list.push(
                        ReportEntry::new(
                            &inst.name,
                            format!("no proof institute with similarity >= {}", thresholds.close_similarity),
                        )
                        .extra("id", inst.id.clone()),
                    ),
                }
            }
        }
    }
    pairs
}

/// Resolve a printed index, retrying with leading digits stripped
/// (a line number glued in front of the index).
fn resolve_index(index: u32, by_index: &HashMap<u32, usize>) -> Option<(usize, Option<u32>)> {
    if let Some(&pos) = by_index.get(&index) {
        return Some((pos, None));
    }
    let digits = index.to_string();
    (1..digits.len()).find_map(|k| {
        let stripped: u32 = digits[k..].parse().ok()?;
        by_index.get(&stripped).map(|&pos| (pos, Some(stripped)))
    })
}

fn check_affiliations(
    reference: &AuthorList,
    proof: &ProofSegments,
    inst_pairs: &[Option<Pair>],
    author_pairs: &[Option<Pair>],
    report: &mut DiscrepancyReport,
) {
    let by_index: HashMap<u32, usize> = proof
        .institutes
        .iter()
        .enumerate()
        .map(|(pos, i)| (i.index, pos))
        .collect();
    // proof institute position -> reference institute id, for usable pairs
    let mut proof_to_ref: HashMap<usize, &str> = HashMap::new();
    for (i, p) in inst_pairs.iter().enumerate() {
        if let Some(p) = p.filter(|p| p.kind != PairKind::Synonym) {
            proof_to_ref.insert(p.target, reference.institutes[i].id.as_str());
        }
    }
    let paired_ids: HashSet<&str> = proof_to_ref.values().copied().collect();
    let positions = reference.institute_positions();

    for (i, author) in reference.authors.iter().enumerate() {
        let Some(pair) = author_pairs[i].filter(|p| p.kind != PairKind::Synonym) else {
            continue;
        };
        let printed = &proof.authors[pair.target];
        let expected: BTreeSet<&str> = author
            .affiliations
            .iter()
            .map(String::as_str)
            .filter(|id| paired_ids.contains(id))
            .collect();
        let mut found: BTreeSet<&str> = BTreeSet::new();
        let mut unresolved = Vec::new();
        let mut retried = Vec::new();
        for &idx in &printed.affiliation_indices {
            match resolve_index(idx, &by_index) {
                Some((pos, retry)) => {
                    if let Some(stripped) = retry {
                        retried.push(format!("{idx}->{stripped}"));
                    }
                    if let Some(id) = proof_to_ref.get(&pos) {
                        found.insert(id);
                    }
                }
                None => unresolved.push(idx),
            }
        }
        if expected != found || !unresolved.is_empty() {
            let expected_pos: Vec<String> = author
                .affiliations
                .iter()
                .filter_map(|id| positions.get(id.as_str()))
                .map(|p| p.to_string())
                .collect();
            let printed_idx: Vec<String> = printed.affiliation_indices.iter().map(u32::to_string).collect();
            let mut detail = format!(
                "expected institutes {} printed indices {}",
                expected_pos.join(","),
                printed_idx.join(",")
            );
            if !unresolved.is_empty() {
                let u: Vec<String> = unresolved.iter().map(u32::to_string).collect();
                detail.push_str(&format!("; unresolved {}", u.join(",")));
            }
            let mut entry = ReportEntry::new(author.printed_name(), detail).printed(&printed.name);
            if !retried.is_empty() {
                entry = entry.extra("line_number_retry", retried.join(","));
            }
            report.authors_mismatched_list.push(entry);
        }
    }
}

fn check_deceased(
    reference: &AuthorList,
    proof: &ProofSegments,
    author_pairs: &[Option<Pair>],
    report: &mut DiscrepancyReport,
) {
    for (i, author) in reference.authors.iter().enumerate() {
        let Some(pair) = author_pairs[i].filter(|p| p.kind != PairKind::Synonym) else {
            continue;
        };
        let printed = &proof.authors[pair.target];
        match (author.deceased, printed.deceased_marker) {
            (true, false) => report.authors_deceased_list.push(
                ReportEntry::new(author.printed_name(), "deceased in the reference, unmarked in the proof")
                    .printed(&printed.name),
            ),
            (false, true) => report.authors_not_deceased_list.push(
                ReportEntry::new(author.printed_name(), "marked deceased in the proof only").printed(&printed.name),
            ),
            _ => {}
        }
    }
}

/// True when `needle` occurs in `hay` delimited by non-alphanumerics.
fn contains_word(hay: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    hay.match_indices(needle).any(|(at, _)| {
        let before = hay[..at].chars().next_back();
        let after = hay[at + needle.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

fn agency_spellings<'a>(agency: &'a FundingAgency, synonyms: &'a SynonymDb) -> Vec<String> {
    let mut out = vec![normalize_folded(&agency.name)];
    if let Some(e) = synonyms.find(SynonymKind::Agency, &agency.name) {
        out.extend(e.synonyms.iter().map(|s| normalize_folded(s)));
    }
    out
}

/// Split funding text at `.`, `!` or `?` followed by whitespace and an
/// uppercase letter. A period ending a one- or two-letter word or a dotted
/// abbreviation does not end a sentence.
pub(crate) fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (k, &(pos, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let next_is_space = chars.get(k + 1).is_some_and(|(_, n)| n.is_whitespace());
        let upper_follows = chars[k + 1..]
            .iter()
            .find(|(_, n)| !n.is_whitespace())
            .is_some_and(|(_, n)| n.is_uppercase());
        if !(next_is_space && upper_follows) {
            continue;
        }
        if c == '.' {
            let word: String = chars[..k]
                .iter()
                .rev()
                .take_while(|(_, w)| !w.is_whitespace())
                .map(|(_, w)| *w)
                .collect();
            let letters = word.chars().filter(|w| w.is_alphabetic()).count();
            if letters <= 2 || word.contains('.') {
                continue;
            }
        }
        let end = pos + c.len_utf8();
        out.push(text[start..end].trim());
        start = end;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out.retain(|s| !s.is_empty());
    out
}

fn check_funding(
    text: &str,
    agencies: &[FundingAgency],
    ref_date: NaiveDate,
    synonyms: &SynonymDb,
    report: &mut DiscrepancyReport,
) {
    let folded = normalize_folded(text);
    let active: Vec<(&FundingAgency, Vec<String>)> = agencies
        .iter()
        .filter(|a| a.active_at(ref_date))
        .map(|a| (a, agency_spellings(a, synonyms)))
        .collect();
    for (agency, spellings) in &active {
        if !spellings.iter().any(|s| contains_word(&folded, s)) {
            report
                .founding_agencies_missing
                .push(ReportEntry::new(&agency.name, "active agency not acknowledged"));
        }
    }
    let inactive: Vec<(&FundingAgency, Vec<String>)> = agencies
        .iter()
        .filter(|a| !a.active_at(ref_date))
        .map(|a| (a, agency_spellings(a, synonyms)))
        .collect();
    for sentence in sentences(text) {
        let s = normalize_folded(sentence);
        if active.iter().any(|(_, sp)| sp.iter().any(|x| contains_word(&s, x))) {
            continue;
        }
        let expired: Vec<&str> = inactive
            .iter()
            .filter(|(_, sp)| sp.iter().any(|x| contains_word(&s, x)))
            .map(|(a, _)| a.name.as_str())
            .collect();
        let detail = if expired.is_empty() {
            "sentence names no active agency".to_string()
        } else {
            format!("names agencies inactive at the reference date: {}", expired.join(", "))
        };
        report.founding_agencies_wrong.push(ReportEntry::new(sentence, detail));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_retry_strips_prefix() {
        let by_index: HashMap<u32, usize> = [(1, 0), (2, 1)].into_iter().collect();
        assert_eq!(resolve_index(171, &by_index), Some((0, Some(1))));
        assert_eq!(resolve_index(2, &by_index), Some((1, None)));
        assert_eq!(resolve_index(99, &by_index), None);
    }

    #[test]
    fn word_boundaries() {
        assert!(contains_word("support of nsf, usa", "nsf"));
        assert!(!contains_word("support of nsfc, china", "nsf"));
        assert!(contains_word("doe", "doe"));
    }

    #[test]
    fn sentence_split() {
        assert_eq!(
            sentences("We thank CERN. Support from U.S. Department of Energy. And more"),
            ["We thank CERN.", "Support from U.S. Department of Energy.", "And more"]
        );
        assert!(sentences("   ").is_empty());
    }
}
