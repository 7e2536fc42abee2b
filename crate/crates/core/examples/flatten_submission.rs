//! Flatten a multi-file LaTeX project into a single source with renamed
//! figures and write the archive for each submission profile.
//!
//! Run with `cargo run --example flatten_submission`.

use std::path::Path;

use pubforge::flatten::{archive_path, build_submission, write_tarball, Profile, TexProject};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/project");
    let project = TexProject::from_dir(&dir, "main.tex")?.with_auxiliary("aux/");
    let out = tempfile::tempdir()?;

    for profile in [Profile::ArxivTl2020, Profile::JournalTl2017] {
        let result = build_submission(&project, profile)?;
        println!("profile {profile}:");
        for r in &result.renamed_assets {
            println!("  {} -> {}", r.original, r.new_name);
        }
        let archive = archive_path(out.path(), "paper", profile);
        let sidecar = write_tarball(&result, &archive)?;
        println!("  archive sha256 {}", sidecar.archive_sha256);
        for e in &sidecar.entries {
            println!("  {:<16} {:?}", e.path, e.kind);
        }
    }

    let result = build_submission(&project, Profile::ArxivTl2020)?;
    println!("\nflattened main.tex:\n{}", result.flat_source);
    Ok(())
}
