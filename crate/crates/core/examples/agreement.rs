//! Agreement coefficients on small label sets, then the full per-code
//! report for the fixture annotations.
//!
//! ```text
//! cargo run --example agreement
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;

use slopscope::agreement::{
    agreement_report, cohen_kappa, fleiss_kappa, gwet_ac1, krippendorff_alpha_masi, masi_distance, PairTable,
};
use slopscope::corpus::{load_annotations, load_documents};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two raters, eight items, mostly "no".
    let a = [1, 0, 0, 0, 0, 0, 1, 0];
    let b = [1, 0, 0, 1, 0, 0, 0, 0];
    let table = PairTable::from_pairs(a.iter().copied().zip(b.iter().copied()));
    println!("Cohen kappa {:.4}", cohen_kappa(&table)?.coefficient);
    println!("Gwet AC1    {:.4}", gwet_ac1(&table)?.coefficient);

    // Three raters; each row counts raters per category.
    let ratings = vec![vec![3, 0], vec![2, 1], vec![0, 3], vec![1, 2], vec![3, 0]];
    println!("Fleiss kappa {:.4}", fleiss_kappa(&ratings)?.coefficient);

    let set = |xs: &[&'static str]| xs.iter().copied().collect::<BTreeSet<_>>();
    println!("MASI distance {{x,y}} vs {{x}}: {:.4}", masi_distance(&set(&["x", "y"]), &set(&["x"])));
    let mut units = BTreeMap::new();
    units.insert("d1", vec![set(&["x"]), set(&["x"])]);
    units.insert("d2", vec![set(&["x", "y"]), set(&["y"])]);
    units.insert("d3", vec![set(&["z"]), set(&["z"])]);
    println!("alpha (MASI) {:.4}", krippendorff_alpha_masi(&units)?);

    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");
    let corpus = load_documents(BufReader::new(File::open(format!("{dir}/corpus.jsonl"))?))?;
    let ann = load_annotations(BufReader::new(File::open(format!("{dir}/annotations.jsonl"))?), &corpus)?;
    println!("\n{:<20} {:<11} {:<5} {:>7} {:>7} {:>7}", "theme", "code", "pair", "kappa", "ac1", "alpha");
    let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.3}"));
    for row in agreement_report(&ann)?.iter().filter(|r| r.pair == "all") {
        println!(
            "{:<20} {:<11} {:<5} {:>7} {:>7} {:>7}",
            row.scope,
            row.code,
            row.pair,
            f(row.kappa),
            f(row.ac1),
            f(row.alpha_masi)
        );
    }
    Ok(())
}
