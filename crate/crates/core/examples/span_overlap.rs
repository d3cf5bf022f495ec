//! Word-level span precision between annotators and character-level
//! precision, recall and F1 of predicted spans.
//!
//! ```text
//! cargo run --example span_overlap
//! ```

use slopscope::agreement::{char_span_prf, span_precision, CharSpan};
use slopscope::corpus::{Corpus, Document, Domain};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = "It is worth noting that prices fell. Truly remarkable times lie ahead.";
    let corpus = Corpus::from_iter([Document::new("d", text, Domain::News)]);
    let span = |phrase: &str| {
        let start = text.find(phrase).expect("phrase occurs");
        CharSpan::new("d", start, start + phrase.len())
    };
    let annotator_a = vec![span("It is worth noting that"), span("Truly remarkable")];
    let annotator_b = vec![span("worth noting"), span("Truly remarkable times lie ahead.")];
    println!(
        "word precision A->B {:.3}, B->A {:.3}",
        span_precision(&corpus, &annotator_a, &annotator_b)?,
        span_precision(&corpus, &annotator_b, &annotator_a)?
    );
    let prf = char_span_prf(&annotator_a, &annotator_b);
    println!(
        "chars, A as gold: precision {:.3} recall {:.3} f1 {:.3}",
        prf.precision, prf.recall, prf.f1
    );
    Ok(())
}
