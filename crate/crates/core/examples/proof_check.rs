//! Compare a journal proof against the canonical author list and print the
//! discrepancy report.
//!
//! Run with `cargo run --example proof_check`.

use std::path::Path;

use chrono::NaiveDate;
use pubforge::matcher::SynonymDb;
use pubforge::report::check::{run_check, CheckInputs, ProofFormat};
use pubforge::report::write_report;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let synonyms = SynonymDb::load(&fixtures.join("synonyms.json"))?;
    for proof in ["seeded/proof.txt", "seeded/proof_clean.txt"] {
        let inputs = CheckInputs {
            author_list: fixtures.join("seeded/authorlist.xml"),
            proof: fixtures.join(proof),
            proof_format: ProofFormat::Text,
            publisher: "aps".into(),
            agencies: Some(fixtures.join("agencies.json")),
            thresholds: Default::default(),
            document: String::new(),
            creation_date: NaiveDate::from_ymd_opt(2020, 2, 1),
        };
        let report = run_check(&inputs, &synonyms)?;
        println!("{}: {} findings", report.name(), report.findings());
        for (key, n) in report.counts().into_iter().filter(|(_, n)| *n > 0) {
            for entry in report.list(key).unwrap_or_default() {
                println!("  {key} ({n}): {} [{}]", entry.reference, entry.detail);
            }
        }
    }

    let inputs = CheckInputs {
        author_list: fixtures.join("seeded/authorlist.xml"),
        proof: fixtures.join("seeded/proof.txt"),
        proof_format: ProofFormat::Text,
        publisher: "aps".into(),
        agencies: Some(fixtures.join("agencies.json")),
        thresholds: Default::default(),
        document: String::new(),
        creation_date: NaiveDate::from_ymd_opt(2020, 2, 1),
    };
    println!("\n{}", write_report(&run_check(&inputs, &synonyms)?));
    Ok(())
}
