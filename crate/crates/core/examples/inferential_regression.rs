//! Unregularized logistic regression with Wald tests: recover planted
//! coefficients and print the coefficient table.
//!
//! ```text
//! cargo run --release --example inferential_regression
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use slopscope::slopmodel::{fit_inferential, logistic, DesignMatrix, InferentialConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let beta = [2.0, -1.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let normal = Normal::new(0.0, 1.0)?;
    let n = 2000;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..3).map(|_| normal.sample(&mut rng)).collect();
        let eta: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
        labels.push(rng.random::<f64>() < logistic(eta));
        rows.push(x);
    }
    let columns = ["relevance", "density", "null"].map(String::from).to_vec();
    let d = DesignMatrix::from_rows(columns, &rows, labels)?;
    let rep = fit_inferential(&d, &InferentialConfig::default())?;
    println!(
        "converged in {} iterations, score max-norm {:.2e}, log-likelihood {:.3}",
        rep.iterations, rep.gradient_norm, rep.log_likelihood
    );
    println!("{:<12} {:>7} {:>7} {:>8} {:>10} {:>18}", "term", "planted", "beta", "se", "p_adj", "95% CI");
    let planted = std::iter::once(0.0).chain(beta);
    for (row, b) in std::iter::once(&rep.intercept).chain(&rep.rows).zip(planted) {
        println!(
            "{:<12} {:>7.2} {:>7.3} {:>8.4} {:>10.2e} [{:>7.3}, {:>7.3}]{}",
            row.name,
            b,
            row.beta,
            row.se,
            row.p_bonferroni,
            row.ci_low,
            row.ci_high,
            if row.significant { " *" } else { "" }
        );
    }
    Ok(())
}
