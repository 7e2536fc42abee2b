//! Edit distances between normalized names and how the thresholds classify them.
//!
//! Run with `cargo run --example levenshtein_matching`.

use pubforge::matcher::{levenshtein, normalize, normalize_folded, MatchThresholds};

fn main() {
    let pairs = [
        ("ATLAS", "Atlassian"),
        ("Maurizio", "Fabrizio"),
        ("raise", "race"),
        ("J.-P. Müller", "J.-P. Muller"),
        ("  Université   Paris-Saclay ", "Universite Paris-Saclay"),
    ];
    let t = MatchThresholds::default();
    println!("author distance threshold: {}", t.author_distance);
    for (a, b) in pairs {
        let exact = levenshtein(&normalize(a), &normalize(b));
        let folded = levenshtein(&normalize_folded(a), &normalize_folded(b));
        let verdict = if folded == 0 {
            "same"
        } else if folded <= t.author_distance {
            "close"
        } else {
            "different"
        };
        println!("{a:?} vs {b:?}: distance {exact}, accent-folded {folded} ({verdict})");
    }
}
