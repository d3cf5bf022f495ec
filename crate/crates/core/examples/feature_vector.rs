//! Every automatic metric for a concise and a padded version of the same
//! news item.
//!
//! ```text
//! cargo run --release --example feature_vector
//! ```

use slopscope::corpus::{Document, Domain};
use slopscope::metrics::{
    feature_vector, FeatureVector, MetricContext, SubjectivityLexicon, TemplateConfig, TrigramScorer,
};
use slopscope::tagger::bundled_model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plain = Document::new(
        "plain",
        "The council approved a new bus route on Tuesday. It links the station with the hospital.",
        Domain::News,
    );
    let padded = Document::new(
        "padded",
        "In today's fast-paced world, the council has truly approved a truly remarkable new bus route. \
         The route is a new route. It is important to note that the route links the station with the hospital. \
         It is important to note that this is a remarkable and incredible moment for everyone.",
        Domain::News,
    );
    let tagger = bundled_model(0);
    let scorer = TrigramScorer::bundled();
    let lexicon = SubjectivityLexicon::sample();
    let ctx = MetricContext {
        tagger: &tagger,
        scorer: &scorer,
        lexicon: &lexicon,
        templates: TemplateConfig::default(),
    };
    let a = feature_vector(&plain, &ctx)?.values();
    let b = feature_vector(&padded, &ctx)?.values();
    println!("{:<22} {:>10} {:>10}", "metric", "plain", "padded");
    for (i, name) in FeatureVector::FIELDS.iter().enumerate() {
        let show = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.3}"));
        println!("{name:<22} {:>10} {:>10}", show(a[i]), show(b[i]));
    }
    Ok(())
}
