//! Readability scores for a few short passages.
//!
//! ```text
//! cargo run --example readability
//! ```

use slopscope::corpus::{Document, Domain};
use slopscope::metrics::ReadabilityCounts;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let passages = [
        "The cat sat.",
        "Water boils at 100 degrees Celsius at sea level.",
        "Notwithstanding considerable organizational complexity, the committee ultimately recommended comprehensive institutional restructuring.",
    ];
    println!("{:>8} {:>8} {:>8}  text", "FRE", "FKGL", "GFI");
    for (i, text) in passages.iter().enumerate() {
        let doc = Document::new(format!("p{i}"), *text, Domain::Other);
        let c = ReadabilityCounts::of(&doc)?;
        println!("{:>8.2} {:>8.2} {:>8.2}  {text}", c.fre(), c.fkgl(), c.gfi());
    }
    Ok(())
}
