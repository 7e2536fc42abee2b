//! Snapshot the qualified authors from a member database, render the list as
//! XML and TeX, and fill in the acknowledgements template.
//!
//! Run with `cargo run --example author_list`.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use pubforge::authorlist::{
    load_agencies, parse_author_list, render_acknowledgements, render_author_list, snapshot_author_list, Format,
    MemberDb, HEADER_REF_CODE, HEADER_TITLE,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let db = MemberDb::load(&fixtures.join("member_db.json"))?;
    let date = NaiveDate::from_ymd_opt(2020, 1, 15).unwrap();
    let header = BTreeMap::from([
        (HEADER_REF_CODE.to_string(), "ANA-TEST-2020-01".to_string()),
        (HEADER_TITLE.to_string(), "A test paper".to_string()),
    ]);

    let list = snapshot_author_list(&db, date, &header)?;
    println!("{} authors qualified at {date}:", list.authors.len());
    for a in &list.authors {
        println!("  {}", a.printed_name());
    }

    let xml = render_author_list(&list, Format::Xml)?;
    assert_eq!(parse_author_list(&xml)?.list, list);
    println!("\n{xml}");
    println!("{}", render_author_list(&list, Format::Tex)?);

    let agencies = load_agencies(&fixtures.join("agencies.json"))?;
    let ack = render_acknowledgements(&agencies, date, "We acknowledge support from {{agencies}}.")?;
    println!("{}", ack.text);
    Ok(())
}
