//! Train the predictive slop classifier on synthetic features, score held
//! rows and print the PR curve summary.
//!
//! ```text
//! cargo run --release --example slop_model
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use slopscope::slopmodel::{auprc, logistic, train_slop_model, FeatureMatrix, PredictiveConfig};

fn synthetic(n: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let columns = ["verbosity", "subjectivity", "noise", "verbosity_copy"].map(String::from).to_vec();
    let (mut ids, mut rows, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let v: f64 = noise.sample(&mut rng);
        let s: f64 = noise.sample(&mut rng);
        let z: f64 = noise.sample(&mut rng);
        let p = logistic(-1.2 + 1.5 * v + 0.8 * s);
        labels.push(rng.random::<f64>() < p);
        // Occasional missing values are imputed with the column mean.
        let s = if i % 17 == 0 { None } else { Some(s) };
        rows.push(vec![Some(v), s, Some(z), Some(v * 2.0 + 1e-3 * z)]);
        ids.push(format!("doc{i:04}"));
    }
    FeatureMatrix::new(columns, ids, rows, labels).expect("well-formed matrix")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train = synthetic(600, 1);
    let test = synthetic(400, 2);
    println!("training prevalence {:.3}", train.prevalence());
    let trained = train_slop_model(&train, 0.95, &PredictiveConfig::default())?;
    println!("dropped as correlated: {:?}", trained.dropped_correlated);
    for s in &trained.cv {
        println!("C = {:<6} mean CV AUPRC {:.4}", s.c, s.mean_auprc);
    }
    let m = &trained.model;
    println!("selected C = {}", m.c_selected);
    for (name, b) in m.kept_columns.iter().zip(&m.coefficients) {
        println!("  {name:<14} {b:+.3}");
    }
    let scores = m.predict_matrix(&test)?;
    println!(
        "test AUPRC {:.4} (prevalence baseline {:.4})",
        auprc(&scores, test.labels())?,
        test.prevalence()
    );
    let mut text = Vec::new();
    m.write(&mut text)?;
    println!("\n{}", String::from_utf8(text)?);
    Ok(())
}
