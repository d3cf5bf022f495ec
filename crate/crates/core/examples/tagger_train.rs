//! Train the averaged-perceptron tagger on the bundled corpus, report
//! held-out accuracy and tag a sentence.
//!
//! ```text
//! cargo run --release --example tagger_train
//! ```

use slopscope::tagger::{bundled_split, train, TaggerModel, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (train_set, held_out) = bundled_split();
    let tokens: usize = train_set.iter().map(|s| s.len()).sum();
    println!("training on {} sentences ({tokens} tokens)", train_set.len());
    let model = train(&train_set, &TrainConfig::default())?;
    println!("held-out accuracy: {:.2}%", 100.0 * model.accuracy(&held_out)?);

    let bytes = model.to_bytes();
    let restored = TaggerModel::from_bytes(&bytes)?;
    let words = ["The", "committee", "quickly", "approved", "the", "new", "budget", "."];
    let tags = restored.tag_words(&words)?;
    let tagged: Vec<String> = words.iter().zip(&tags).map(|(w, t)| format!("{w}/{t}")).collect();
    println!("{}", tagged.join(" "));
    println!("model size: {} bytes", bytes.len());
    Ok(())
}
