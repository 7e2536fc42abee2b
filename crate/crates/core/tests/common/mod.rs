//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use pubforge::authorlist::{Author, AuthorList, Institute, HEADER_REF_CODE, HEADER_REF_DATE, HEADER_TITLE};
use pubforge::matcher::SynonymDb;
use pubforge::pdfextract::FontMap;
use pubforge::report::check::{run_check, CheckInputs, ProofFormat};
use pubforge::report::DiscrepancyReport;
use pubforge::workflow::Verb;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Map, Value};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn golden(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(rel)
}

pub fn date(s: &str) -> NaiveDate {
    s.parse().expect("ISO date")
}

/// Report date used by every fixture run.
pub const REPORT_DATE: &str = "2020-02-01";

pub fn fixture_synonyms() -> SynonymDb {
    SynonymDb::load(&fixture("synonyms.json")).expect("fixture synonyms load")
}

pub fn fixture_inputs(list: &str, proof: &str) -> CheckInputs {
    CheckInputs {
        author_list: fixture(list),
        proof: fixture(proof),
        proof_format: ProofFormat::Text,
        publisher: "aps".into(),
        agencies: Some(fixture("agencies.json")),
        thresholds: Default::default(),
        document: String::new(),
        creation_date: Some(date(REPORT_DATE)),
    }
}

pub fn run_fixture(list: &str, proof: &str, synonyms: &SynonymDb) -> DiscrepancyReport {
    run_check(&fixture_inputs(list, proof), synonyms).expect("fixture check runs")
}

pub fn seeded_report() -> DiscrepancyReport {
    run_fixture("seeded/authorlist.xml", "seeded/proof.txt", &fixture_synonyms())
}

/// Category key and the reference names listed under it.
pub fn nonempty_lists(report: &DiscrepancyReport) -> BTreeMap<&'static str, Vec<String>> {
    report
        .counts()
        .into_iter()
        .filter(|(_, n)| *n > 0)
        .map(|(k, _)| {
            let refs = report.list(k).unwrap().iter().map(|e| e.reference.clone()).collect();
            (k, refs)
        })
        .collect()
}

/// The edit-distance recurrence evaluated recursively, memoized on suffix
/// positions.
pub fn recurrence_distance(a: &[char], b: &[char]) -> usize {
    fn go(a: &[char], b: &[char], i: usize, j: usize, memo: &mut [Option<usize>]) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        let slot = i * (b.len() + 1) + j;
        if let Some(d) = memo[slot] {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo[slot] = Some(d);
        d
    }
    go(a, b, 0, 0, &mut vec![None; (a.len() + 1) * (b.len() + 1)])
}

/// Every string over `alphabet` of length at most `max_len`.
pub fn all_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for c in alphabet {
                let mut t = s.clone();
                t.push(*c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn random_string(rng: &mut StdRng, alphabet: &[char], max_len: usize) -> String {
    let n = rng.gen_range(0..=max_len);
    (0..n).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

const FAMILY_PARTS: [&str; 12] = [
    "Aad", "Müller", "Ñúñez", "O'Brien", "van der Berg", "Łukasz", "Smith", "Zhang", "Dąbrowski", "Abbott",
    "B\\\"ub", "Smith-Jones",
];
const INITIALS: [&str; 6] = ["A.", "J.-P.", "D.K.", "M. A.", "Ch.", "Y."];
const INSTITUTE_WORDS: [&str; 10] = [
    "Department of Physics",
    "Università di Milano",
    "Université Paris-Saclay",
    "Tokyo",
    "CNRS/IN2P3",
    "A&M",
    "<Lab>",
    "\"Quoted\" Institute",
    "Kraków",
    "Edmonton AB, Canada",
];

/// A valid author list with awkward characters in every text field.
pub fn random_author_list(rng: &mut StdRng) -> AuthorList {
    let n_inst = rng.gen_range(1..=6);
    let institutes: Vec<Institute> = (0..n_inst)
        .map(|i| {
            let words = rng.gen_range(1..=3);
            let name: Vec<&str> = (0..words).map(|_| *INSTITUTE_WORDS.choose(rng).unwrap()).collect();
            Institute {
                id: format!("i{i}"),
                name: name.join(", "),
                inspire_ref: if rng.gen_bool(0.5) { format!("{}", rng.gen_range(900_000..999_999)) } else { String::new() },
                country: ["US", "FR", "JP", ""].choose(rng).unwrap().to_string(),
            }
        })
        .collect();
    let n_auth = rng.gen_range(1..=8);
    let authors = (0..n_auth)
        .map(|k| {
            let n_aff = rng.gen_range(1..=n_inst.min(3));
            let mut affiliations: Vec<String> = institutes.iter().map(|i| i.id.clone()).collect();
            affiliations.shuffle(rng);
            affiliations.truncate(n_aff);
            let start = date("2010-01-01") + chrono::Days::new(rng.gen_range(0..3000));
            Author {
                family_name: FAMILY_PARTS.choose(rng).unwrap().to_string(),
                initials: INITIALS.choose(rng).unwrap().to_string(),
                foaf_name: if rng.gen_bool(0.7) { format!("Person {k}") } else { String::new() },
                inspire_id: if rng.gen_bool(0.7) { format!("INSPIRE-{:08}", rng.gen_range(0..99_999_999)) } else { String::new() },
                orcid: rng.gen_bool(0.5).then(|| "0000-0002-1825-0097".to_string()),
                affiliations,
                deceased: rng.gen_bool(0.1),
                membership_start: start,
                membership_end: rng.gen_bool(0.3).then(|| start + chrono::Days::new(rng.gen_range(0..2000))),
            }
        })
        .collect();
    let mut header = BTreeMap::new();
    header.insert(HEADER_REF_CODE.to_string(), "ANA-TEST-2020-01".to_string());
    header.insert(HEADER_REF_DATE.to_string(), "2020-01-15".to_string());
    if rng.gen_bool(0.5) {
        header.insert(HEADER_TITLE.to_string(), "Search for <new> & \"exotic\" phenomena".to_string());
    }
    AuthorList {
        header,
        institutes,
        authors,
    }
}

/// Characters drawn for synthetic PDF text: ASCII, accented Latin, Greek,
/// CJK and an astral-plane symbol.
const PDF_CHARS: &str = "AaBbZz019.,-()ÁéžčłßΩλ漢字😀";

/// A font whose codes are two bytes wide, mapping every character above plus
/// a ligature glyph, and text drawn from it.
pub fn random_pdf_case(rng: &mut StdRng, font: &str) -> (FontMap, String) {
    let mut map = FontMap::new(font);
    let chars: Vec<char> = PDF_CHARS.chars().collect();
    let mut codes: Vec<u16> = (0x0100..0x0100 + chars.len() as u16).collect();
    codes.shuffle(rng);
    for (c, code) in chars.iter().zip(&codes) {
        map.insert(code.to_be_bytes().to_vec(), c.to_string());
    }
    map.insert(vec![0x7f, 0x01], "ffi");
    map.insert(vec![0x7f, 0x02], " ");
    let words = rng.gen_range(1..=4);
    let text: Vec<String> = (0..words)
        .map(|_| {
            let n = rng.gen_range(1..=6);
            let mut w: String = (0..n).map(|_| *chars.choose(rng).unwrap()).collect();
            if rng.gen_bool(0.3) {
                w.push_str("ffi");
            }
            w
        })
        .collect();
    (map, text.join(" "))
}

/// One scripted Save or Proceed on the phase 0 definition.
pub struct ScriptStep {
    pub node: &'static str,
    pub roles: Vec<String>,
    pub verb: Verb,
    pub data: Map<String, Value>,
}

fn step(node: &'static str, role: &str, verb: Verb, data: Value) -> ScriptStep {
    ScriptStep {
        node,
        roles: vec![role.to_string()],
        verb,
        data: data.as_object().cloned().unwrap(),
    }
}

/// Submission, EB request and appointment, a rejected review that loops
/// back to a second EB request, then approval and sign-off.
pub fn phase0_script() -> Vec<ScriptStep> {
    vec![
        step("analysis_submission", "convener", Verb::Save, json!({"ref_code": "ANA-SUSY-2019-04", "title": "Draft title"})),
        step(
            "analysis_submission",
            "convener",
            Verb::Proceed,
            json!({
                "title": "Search for supersymmetry",
                "conveners": ["conv@example.org"],
                "analysis_team": ["at1@example.org", "at2@example.org"],
            }),
        ),
        step("eb_request", "convener", Verb::Proceed, json!({"meeting_title": "EB kick-off", "meeting_date": "2020-03-02"})),
        step(
            "eb_appointment",
            "pubcomm_chair",
            Verb::Proceed,
            json!({"eb_members": ["eb1@example.org", "eb2@example.org"], "appointment_date": "2020-03-05"}),
        ),
        step("editorial_review", "EB", Verb::Proceed, json!({"goals_approved": false, "review_comments": "Clarify the goals"})),
        step("eb_request", "convener", Verb::Proceed, json!({"meeting_title": "EB second round", "meeting_date": "2020-04-01"})),
        step(
            "eb_appointment",
            "pubcomm_chair",
            Verb::Proceed,
            json!({"eb_members": ["eb1@example.org", "eb3@example.org"], "appointment_date": "2020-04-03"}),
        ),
        step("editorial_review", "EB", Verb::Proceed, json!({"goals_approved": true})),
        step("phase0_complete", "po_officer", Verb::Proceed, json!({"signoff_date": "2020-05-01"})),
    ]
}

/// Lowercase letters spelling `k` in base 26, so generated names stay unique
/// without digits.
fn unique_suffix(mut k: usize) -> String {
    let mut s = String::new();
    loop {
        s.insert(0, (b'a' + (k % 26) as u8) as char);
        k /= 26;
        if k == 0 {
            return s;
        }
    }
}

/// An author list with `authors` authors spread over `institutes`
/// institutes, plus a proof text printing it verbatim.
pub fn scale_case(authors: usize, institutes: usize, rng: &mut StdRng) -> (AuthorList, String) {
    const SYLLABLES: [&str; 16] = [
        "ka", "ro", "mi", "ten", "vo", "sha", "lu", "der", "bri", "an", "zo", "pel", "qui", "mar", "ste", "ion",
    ];
    let word = |rng: &mut StdRng, parts: usize| -> String {
        let mut s: String = (0..parts).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        let first = s.remove(0).to_ascii_uppercase();
        s.insert(0, first);
        s
    };
    let insts: Vec<Institute> = (0..institutes)
        .map(|i| Institute {
            id: format!("{}", i + 1),
            name: format!(
                "Department of Physics, University of {} {}, {}",
                word(rng, 3),
                i + 1,
                word(rng, 2)
            ),
            inspire_ref: String::new(),
            country: String::new(),
        })
        .collect();
    let mut list_authors: Vec<Author> = (0..authors)
        .map(|k| Author {
            family_name: format!("{}{}", word(rng, 2), unique_suffix(k)),
            initials: format!("{}.", (b'A' + (k % 26) as u8) as char),
            foaf_name: String::new(),
            inspire_id: String::new(),
            orcid: None,
            affiliations: vec![insts[rng.gen_range(0..institutes)].id.clone()],
            deceased: false,
            membership_start: date("2015-01-01"),
            membership_end: None,
        })
        .collect();
    list_authors.sort_by(|a, b| a.family_name.cmp(&b.family_name));
    let mut header = BTreeMap::new();
    header.insert(HEADER_REF_CODE.to_string(), "ANA-SCALE-2020-01".to_string());
    header.insert(HEADER_REF_DATE.to_string(), "2020-01-15".to_string());
    let list = AuthorList {
        header,
        institutes: insts,
        authors: list_authors,
    };
    let positions = list.institute_positions();
    let mut proof = String::from("The ATLAS Collaboration\n");
    for chunk in list.authors.chunks(6) {
        let names: Vec<String> = chunk
            .iter()
            .map(|a| format!("{}{}", a.printed_name(), positions[a.affiliations[0].as_str()]))
            .collect();
        proof.push_str(&names.join(", "));
        proof.push_str(",\n");
    }
    for (i, inst) in list.institutes.iter().enumerate() {
        proof.push_str(&format!("{} {}\n", i + 1, inst.name));
    }
    proof.push_str("Acknowledgements\nWe thank CERN for the very successful operation of the LHC.\n");
    (list, proof)
}
