mod common;

use chrono::NaiveDate;
use proptest::prelude::*;
use pubforge::authorlist::{parse_author_list, render_author_list, Format};
use pubforge::flatten::strip_comments;
use pubforge::matcher::{compare, levenshtein, normalize, normalize_folded, MatchThresholds, SynonymDb};
use pubforge::pdfextract::load_pretokenized;
use pubforge::pipeline::{select_pipeline, PipelineKind};
use pubforge::proofparse::{parse_proof, PublisherProfile};
use pubforge::report::{parse_report, write_report, ReportMeta};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::*;

fn meta() -> ReportMeta {
    ReportMeta {
        publisher: "APS".into(),
        document: String::new(),
        filename: "prop".into(),
        creation_date: NaiveDate::from_ymd_opt(2020, 2, 1).unwrap(),
    }
}

/// Replace one letter in each of `edits` randomly chosen author names of the
/// proof with a letter that is not already there.
fn corrupt_names(proof: &str, edits: usize, rng: &mut StdRng) -> String {
    let mut lines: Vec<String> = proof.lines().map(str::to_string).collect();
    let author_lines: Vec<usize> = (1..lines.len()).take_while(|&i| lines[i].ends_with(',')).collect();
    for _ in 0..edits {
        let li = author_lines[rng.gen_range(0..author_lines.len())];
        let mut chars: Vec<char> = lines[li].chars().collect();
        let letters: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_ascii_lowercase()).collect();
        let at = letters[rng.gen_range(0..letters.len())];
        chars[at] = if chars[at] == 'x' { 'y' } else { 'x' };
        lines[li] = chars.into_iter().collect();
    }
    lines.join("\n")
}

proptest! {
    #[test]
    fn distance_is_a_metric(a in "[abcé ]{0,10}", b in "[abcé ]{0,10}", c in "[abcé ]{0,10}") {
        let ab = levenshtein(&a, &b);
        prop_assert_eq!(ab, levenshtein(&b, &a));
        prop_assert_eq!(levenshtein(&a, &a), 0);
        prop_assert!(levenshtein(&a, &c) <= ab + levenshtein(&b, &c));
        let (la, lb) = (a.chars().count(), b.chars().count());
        prop_assert!(la.abs_diff(lb) <= ab && ab <= la.max(lb));
        prop_assert_eq!(ab == 0, a == b);
    }

    #[test]
    fn distance_matches_recurrence(a in "[a-d]{0,8}", b in "[a-d]{0,8}") {
        let rec = recurrence_distance(&a.chars().collect::<Vec<_>>(), &b.chars().collect::<Vec<_>>());
        prop_assert_eq!(levenshtein(&a, &b), rec);
    }

    #[test]
    fn normalization_is_idempotent(s in "\\PC{0,24}") {
        let n = normalize(&s);
        prop_assert_eq!(normalize(&n), n.clone());
        let f = normalize_folded(&s);
        prop_assert_eq!(normalize_folded(&f), f);
        prop_assert!(!n.contains("  ") && n.trim() == n);
    }

    #[test]
    fn author_list_xml_round_trip(seed in any::<u64>()) {
        let list = random_author_list(&mut StdRng::seed_from_u64(seed));
        let xml = render_author_list(&list, Format::Xml).unwrap();
        prop_assert_eq!(parse_author_list(&xml).unwrap().list, list.clone());
        // rendering is a function of the list alone
        prop_assert_eq!(render_author_list(&list, Format::Xml).unwrap(), xml);
    }

    #[test]
    fn comment_stripping_is_idempotent(lines in prop::collection::vec("[a-z %\\\\{}]{0,16}", 0..8)) {
        let tex = lines.join("\n");
        let once = strip_comments(&tex);
        prop_assert_eq!(strip_comments(&once), once);
    }

    #[test]
    fn po_prefix_selects_submission(suffix in "[A-Za-z0-9/_.-]{0,12}", other in "[a-z][A-Za-z0-9/_.-]{0,12}") {
        prop_assert_eq!(select_pipeline(&format!("PO-{suffix}")), PipelineKind::Submission);
        prop_assert_eq!(select_pipeline(&other), PipelineKind::Editing);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn comparison_is_deterministic_and_reports_round_trip(seed in any::<u64>(), edits in 0usize..6) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (list, proof) = scale_case(40, 6, &mut rng);
        let proof = corrupt_names(&proof, edits, &mut rng);
        let segments = parse_proof(&load_pretokenized(&proof).unwrap(), &PublisherProfile::default()).unwrap();
        let t = MatchThresholds::default();
        let db = SynonymDb::default();
        let first = compare(&list, &segments, &db, &[], &t, meta());
        let second = compare(&list, &segments, &db, &[], &t, meta());
        prop_assert_eq!(&first, &second);
        let text = write_report(&first);
        prop_assert_eq!(parse_report(&text).unwrap(), first);
    }

    #[test]
    fn wider_author_threshold_never_adds_missing_authors(seed in any::<u64>(), edits in 0usize..10) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (list, proof) = scale_case(30, 5, &mut rng);
        let proof = corrupt_names(&proof, edits, &mut rng);
        let segments = parse_proof(&load_pretokenized(&proof).unwrap(), &PublisherProfile::default()).unwrap();
        let mut previous = usize::MAX;
        for author_distance in 0..5 {
            let t = MatchThresholds { author_distance, ..MatchThresholds::default() };
            let missing = compare(&list, &segments, &SynonymDb::default(), &[], &t, meta()).authors_missing_list.len();
            prop_assert!(missing <= previous, "distance {}: {} > {}", author_distance, missing, previous);
            previous = missing;
        }
        prop_assert!(previous <= edits);
    }

    #[test]
    fn more_synonyms_never_add_findings(mask in 0u8..8, abbreviated in any::<bool>()) {
        let full = fixture_synonyms();
        let mut partial = SynonymDb::default();
        for (i, e) in full.institutes.iter().enumerate() {
            if mask & (1 << i) != 0 {
                partial.institutes.push(e.clone());
            }
        }
        if mask & 4 != 0 {
            partial.authors = full.authors.clone();
        }
        let proof = if abbreviated { "synonyms/proof_abbrev.txt" } else { "synonyms/proof.txt" };
        let with_full = run_fixture("synonyms/authorlist.xml", proof, &full).findings();
        let with_partial = run_fixture("synonyms/authorlist.xml", proof, &partial).findings();
        let with_none = run_fixture("synonyms/authorlist.xml", proof, &SynonymDb::default()).findings();
        prop_assert!(with_full <= with_partial && with_partial <= with_none);
    }
}
