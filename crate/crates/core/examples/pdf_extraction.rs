//! Build a small PDF whose font uses scrambled two-byte codes with a
//! ToUnicode map, then recover the text from it.
//!
//! Run with `cargo run --example pdf_extraction`.

use pubforge::pdfextract::writer::{SyntheticPdf, TextRun, BUILTIN_FONT};
use pubforge::pdfextract::{extract_text, FontMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut font = FontMap::new("F1");
    for (i, ch) in "ADMabcdefgilorstuò.,1 ".chars().enumerate() {
        font.insert(vec![0x40, 0x90 - i as u8], ch.to_string());
    }
    font.insert(vec![0x41, 0x01], "ffi");

    let pdf = SyntheticPdf::new()
        .font(font)
        .page(vec![
            TextRun::new(BUILTIN_FONT, 72.0, 720.0, "The ATLAS Collaboration"),
            TextRun::new("F1", 72.0, 700.0, "A. Dòb, M. Aad"),
            TextRun::new("F1", 141.0, 700.0, "1").raised(4.0),
        ])
        .page(vec![TextRun::new("F1", 72.0, 700.0, "ffi codes decode as ligatures.")])
        .compress(true)
        .nested_tree(true)
        .build()?;
    println!("{} bytes of PDF", pdf.len());
    for (n, page) in extract_text(&pdf)?.iter().enumerate() {
        println!("page {}:", n + 1);
        for line in &page.lines {
            println!("  y={:>6.1}  {}", line.y, line.text);
        }
    }
    Ok(())
}
