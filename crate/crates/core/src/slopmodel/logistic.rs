use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use super::{auprc, DesignMatrix, Result, SlopModelError};

pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

fn targets(labels: &[bool]) -> DVector<f64> {
    DVector::from_iterator(labels.len(), labels.iter().map(|&y| if y { 1.0 } else { 0.0 }))
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y).count();
    (labels.len() - pos, pos)
}

/// `Xᵀ diag(w) X`.
fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let xw = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * w[i]);
    x.tr_mul(&xw)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferentialConfig {
    /// Number of tests for the Bonferroni correction; `None` means one per
    /// feature column.
    pub bonferroni_m: Option<usize>,
    pub max_iter: usize,
    /// Convergence bound on the max-norm of the score vector.
    pub tolerance: f64,
    /// Coefficient norm beyond which the fit is declared separated.
    pub norm_bound: f64,
}

impl Default for InferentialConfig {
    fn default() -> Self {
        InferentialConfig {
            bonferroni_m: None,
            max_iter: 100,
            tolerance: 1e-8,
            norm_bound: 30.0,
        }
    }
}

/// Wald test for one coefficient, with a 95% interval.
#[derive(Debug, Clone, PartialEq)]
pub struct WaldRow {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
    pub p_bonferroni: f64,
    pub significant: bool,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceReport {
    /// Intercept row; its `p_bonferroni` is the unadjusted p.
    pub intercept: WaldRow,
    pub rows: Vec<WaldRow>,
    pub bonferroni_m: usize,
    pub iterations: usize,
    /// Max-norm of `Xᵀ(y − p̂)` at the solution, intercept included.
    pub gradient_norm: f64,
    pub log_likelihood: f64,
}

fn log_likelihood(xa: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = xa * beta;
    eta.iter().zip(y.iter()).map(|(e, yi)| yi * e - softplus(*e)).sum()
}

const Z_975: f64 = 1.959_963_984_540_054;

fn wald(name: String, beta: f64, se: f64, m: usize) -> WaldRow {
    let z = beta / se;
    let p = erfc(z.abs() / std::f64::consts::SQRT_2);
    let p_bonferroni = (m as f64 * p).min(1.0);
    WaldRow {
        name,
        beta,
        se,
        z,
        p,
        p_bonferroni,
        significant: p_bonferroni < 0.05,
        ci_low: beta - Z_975 * se,
        ci_high: beta + Z_975 * se,
    }
}

/// Unregularized logistic regression by iteratively reweighted least
/// squares, with Wald tests from the inverse observed information.
pub fn fit_inferential(d: &DesignMatrix, cfg: &InferentialConfig) -> Result<InferenceReport> {
    let n = d.x.nrows();
    if n < 2 {
        return Err(SlopModelError::TooFewRows(n));
    }
    let (neg, pos) = class_counts(&d.labels);
    if neg == 0 || pos == 0 {
        return Err(SlopModelError::SingleClass);
    }
    let xa = with_intercept(&d.x);
    let cols = xa.ncols();
    let svd = xa.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let rank = svd.rank(smax * n.max(cols) as f64 * f64::EPSILON);
    if rank < cols {
        return Err(SlopModelError::RankDeficient { rank, columns: cols });
    }
    let y = targets(&d.labels);
    let mut beta = DVector::zeros(cols);
    let mut ll = log_likelihood(&xa, &y, &beta);
    let mut iterations = 0;
    let separated = |iterations: usize, beta: &DVector<f64>| SlopModelError::SeparationDetected {
        iterations,
        norm: beta.norm(),
    };
    let (gradient_norm, p_hat) = loop {
        let p_hat = (&xa * &beta).map(logistic);
        let g = xa.tr_mul(&(&y - &p_hat));
        let gnorm = g.amax();
        if gnorm < cfg.tolerance {
            break (gnorm, p_hat);
        }
        if iterations == cfg.max_iter {
            return Err(separated(iterations, &beta));
        }
        iterations += 1;
        let w = p_hat.map(|p| p * (1.0 - p));
        let Some(chol) = weighted_gram(&xa, &w).cholesky() else {
            return Err(separated(iterations, &beta));
        };
        let delta = chol.solve(&g);
        let mut step = 1.0;
        let mut next = &beta + &delta;
        let mut next_ll = log_likelihood(&xa, &y, &next);
        while next_ll < ll - 1e-12 * ll.abs() && step > 1e-6 {
            step *= 0.5;
            next = &beta + &delta * step;
            next_ll = log_likelihood(&xa, &y, &next);
        }
        beta = next;
        ll = next_ll;
        if beta.norm() > cfg.norm_bound {
            return Err(separated(iterations, &beta));
        }
    };
    // Separable data can also converge numerically inside the norm bound.
    if p_hat.iter().zip(y.iter()).all(|(p, yi)| (p - yi).abs() < 1e-6) {
        return Err(separated(iterations, &beta));
    }
    let w = p_hat.map(|p| p * (1.0 - p));
    let cov = weighted_gram(&xa, &w)
        .cholesky()
        .ok_or_else(|| separated(iterations, &beta))?
        .inverse();
    let m = cfg.bonferroni_m.unwrap_or(d.columns.len()).max(1);
    let se = |j: usize| cov[(j, j)].sqrt();
    let mut intercept = wald("(intercept)".into(), beta[0], se(0), 1);
    intercept.p_bonferroni = intercept.p;
    intercept.significant = intercept.p < 0.05;
    let rows = d
        .columns
        .iter()
        .enumerate()
        .map(|(j, name)| wald(name.clone(), beta[j + 1], se(j + 1), m))
        .collect();
    Ok(InferenceReport {
        intercept,
        rows,
        bonferroni_m: m,
        iterations,
        gradient_norm,
        log_likelihood: ll,
    })
}

/// Class-weighted logistic loss with an L2 penalty on the slopes:
/// `½‖β‖² + C Σ wᵢ (log(1 + e^ηᵢ) − yᵢ ηᵢ)`, `η = Xβ + b`.
///
/// Parameters are packed as `[β…, b]`; the intercept is not penalized.
#[derive(Debug, Clone)]
pub struct PenalizedProblem {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub weights: DVector<f64>,
    pub c: f64,
}

impl PenalizedProblem {
    /// Builds the problem with balanced weights `n / (2·n_class)`.
    pub fn balanced(x: DMatrix<f64>, labels: &[bool], c: f64) -> Self {
        let n = labels.len() as f64;
        let (neg, pos) = class_counts(labels);
        let wt = |count: usize| if count == 0 { 0.0 } else { n / (2.0 * count as f64) };
        let (w_neg, w_pos) = (wt(neg), wt(pos));
        let weights = DVector::from_iterator(labels.len(), labels.iter().map(|&y| if y { w_pos } else { w_neg }));
        PenalizedProblem {
            x,
            y: targets(labels),
            weights,
            c,
        }
    }

    fn eta(&self, theta: &DVector<f64>) -> DVector<f64> {
        let p = self.x.ncols();
        let b = theta[p];
        (&self.x * theta.rows(0, p)).map(|e| e + b)
    }

    pub fn loss(&self, theta: &DVector<f64>) -> f64 {
        let p = self.x.ncols();
        let data: f64 = self
            .eta(theta)
            .iter()
            .zip(self.y.iter().zip(self.weights.iter()))
            .map(|(e, (y, w))| w * (softplus(*e) - y * e))
            .sum();
        0.5 * theta.rows(0, p).norm_squared() + self.c * data
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let p = self.x.ncols();
        let r = DVector::from_iterator(
            self.y.len(),
            self.eta(theta)
                .iter()
                .zip(self.y.iter().zip(self.weights.iter()))
                .map(|(e, (y, w))| w * (logistic(*e) - y)),
        );
        let mut g = DVector::zeros(p + 1);
        g.rows_mut(0, p).copy_from(&(theta.rows(0, p) + self.x.tr_mul(&r) * self.c));
        g[p] = self.c * r.sum();
        g
    }

    fn hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let p = self.x.ncols();
        let s = DVector::from_iterator(
            self.y.len(),
            self.eta(theta).iter().zip(self.weights.iter()).map(|(e, w)| {
                let q = logistic(*e);
                w * q * (1.0 - q)
            }),
        );
        let xa = self.x.clone().insert_column(p, 1.0);
        let mut h = weighted_gram(&xa, &s) * self.c;
        for j in 0..p {
            h[(j, j)] += 1.0;
        }
        h[(p, p)] += 1e-10;
        h
    }

    /// Damped Newton iterations from zero.
    pub fn minimize(&self) -> DVector<f64> {
        let mut theta = DVector::zeros(self.x.ncols() + 1);
        let mut f = self.loss(&theta);
        for _ in 0..200 {
            let g = self.gradient(&theta);
            if g.amax() < 1e-10 * (1.0 + f.abs()) {
                break;
            }
            let dir = match self.hessian(&theta).cholesky() {
                Some(ch) => -ch.solve(&g),
                None => -&g,
            };
            let slope = g.dot(&dir);
            let mut step = 1.0;
            let mut next = &theta + &dir;
            let mut f_next = self.loss(&next);
            while f_next > f + 1e-4 * step * slope && step > 1e-12 {
                step *= 0.5;
                next = &theta + &dir * step;
                f_next = self.loss(&next);
            }
            if f - f_next <= f64::EPSILON * f.abs() {
                theta = next;
                break;
            }
            theta = next;
            f = f_next;
        }
        theta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveConfig {
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for PredictiveConfig {
    fn default() -> Self {
        PredictiveConfig {
            c_grid: vec![0.01, 0.1, 1.0, 10.0],
            folds: 5,
            seed: 0,
        }
    }
}

impl PredictiveConfig {
    /// Single C, no tuning.
    pub fn fixed(c: f64, seed: u64) -> Self {
        PredictiveConfig {
            c_grid: vec![c],
            folds: 5,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvScore {
    pub c: f64,
    pub mean_auprc: f64,
    pub fold_auprc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub c: f64,
    pub cv: Vec<CvScore>,
}

/// Stratified fold index per row: each class is shuffled with the seed and
/// dealt round-robin.
pub(crate) fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut dealt = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = dealt % k;
            dealt += 1;
        }
    }
    fold
}

fn fit_rows(d: &DesignMatrix, rows: &[usize], c: f64) -> DVector<f64> {
    let sub = d.select_rows(rows);
    PenalizedProblem::balanced(sub.x, &sub.labels, c).minimize()
}

fn scores(x: &DMatrix<f64>, theta: &DVector<f64>) -> Vec<f64> {
    let p = x.ncols();
    (x * theta.rows(0, p)).iter().map(|e| logistic(e + theta[p])).collect()
}

/// Class-weighted L2 logistic regression. C is chosen from the grid by mean
/// AUPRC over seeded stratified folds (first C wins ties), then refit on all
/// rows.
pub fn fit_predictive(d: &DesignMatrix, cfg: &PredictiveConfig) -> Result<PredictiveFit> {
    let (neg, pos) = class_counts(&d.labels);
    if neg == 0 || pos == 0 {
        return Err(SlopModelError::SingleClass);
    }
    if cfg.c_grid.is_empty() || cfg.c_grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(SlopModelError::InvalidParameter("C grid must hold positive values".into()));
    }
    if cfg.folds < 2 || cfg.folds > neg.min(pos) {
        return Err(SlopModelError::InvalidParameter(format!(
            "{} folds need at least that many rows of each class ({pos} positive, {neg} negative)",
            cfg.folds
        )));
    }
    let fold = stratified_folds(&d.labels, cfg.folds, cfg.seed);
    let jobs: Vec<(usize, usize)> = (0..cfg.c_grid.len())
        .flat_map(|ci| (0..cfg.folds).map(move |f| (ci, f)))
        .collect();
    let results: Vec<f64> = jobs
        .par_iter()
        .map(|&(ci, f)| {
            let train: Vec<usize> = (0..fold.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..fold.len()).filter(|&i| fold[i] == f).collect();
            let theta = fit_rows(d, &train, cfg.c_grid[ci]);
            let held = d.select_rows(&test);
            auprc(&scores(&held.x, &theta), &held.labels).expect("stratified folds hold both classes")
        })
        .collect();
    let cv: Vec<CvScore> = cfg
        .c_grid
        .iter()
        .enumerate()
        .map(|(ci, &c)| {
            let fold_auprc = results[ci * cfg.folds..(ci + 1) * cfg.folds].to_vec();
            CvScore {
                c,
                mean_auprc: fold_auprc.iter().sum::<f64>() / cfg.folds as f64,
                fold_auprc,
            }
        })
        .collect();
    let best = cv
        .iter()
        .fold(&cv[0], |best, s| if s.mean_auprc > best.mean_auprc { s } else { best });
    let all: Vec<usize> = (0..d.labels.len()).collect();
    let theta = fit_rows(d, &all, best.c);
    let p = d.x.ncols();
    Ok(PredictiveFit {
        coefficients: theta.rows(0, p).iter().copied().collect(),
        intercept: theta[p],
        c: best.c,
        cv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|j| format!("x{j}")).collect()
    }

    /// Standard normal features, labels from a logistic model.
    fn planted(beta: &[f64], intercept: f64, n: usize, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| beta.iter().map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let labels = rows
            .iter()
            .map(|r| {
                let eta: f64 = intercept + r.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>();
                rng.random::<f64>() < logistic(eta)
            })
            .collect();
        DesignMatrix::from_rows(names(beta.len()), &rows, labels).unwrap()
    }

    #[test]
    fn recovers_planted_coefficients() {
        let beta = [2.0, -1.0, 0.0];
        let d = planted(&beta, 0.0, 2000, 1);
        let r = fit_inferential(&d, &InferentialConfig::default()).unwrap();
        assert!(r.gradient_norm < 1e-8);
        let est: Vec<f64> = r.rows.iter().map(|w| w.beta).collect();
        assert!(est[0] > 0.0 && est[1] < 0.0);
        let err: f64 = est.iter().zip(beta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 0.3, "{est:?}");
        assert!(r.rows[0].significant && r.rows[1].significant);
        assert_eq!(r.bonferroni_m, 3);
        for w in &r.rows {
            assert!((w.p_bonferroni - (3.0 * w.p).min(1.0)).abs() < 1e-15);
            assert!(w.ci_low < w.beta && w.beta < w.ci_high);
        }
    }

    #[test]
    fn score_vanishes_at_solution() {
        let d = planted(&[0.5, 0.3], -0.4, 300, 9);
        let r = fit_inferential(&d, &InferentialConfig::default()).unwrap();
        let xa = with_intercept(&d.x);
        let mut beta = vec![r.intercept.beta];
        beta.extend(r.rows.iter().map(|w| w.beta));
        let p_hat = (&xa * DVector::from_vec(beta)).map(logistic);
        assert!(xa.tr_mul(&(targets(&d.labels) - p_hat)).amax() < 1e-8);
    }

    #[test]
    fn noise_feature_rarely_significant() {
        let hits = (0..100)
            .filter(|&s| {
                let d = planted(&[1.0, 0.0], 0.0, 300, 100 + s);
                fit_inferential(&d, &InferentialConfig::default()).unwrap().rows[1].p <= 0.05
            })
            .count();
        assert!(hits <= 10, "{hits}");
    }

    #[test]
    fn separable_data_detected() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels = (0..20).map(|i| i >= 10).collect();
        let d = DesignMatrix::from_rows(names(1), &rows, labels).unwrap();
        assert!(matches!(
            fit_inferential(&d, &InferentialConfig::default()),
            Err(SlopModelError::SeparationDetected { .. })
        ));
    }

    #[test]
    fn wide_gap_separation_detected() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![if i >= 10 { 5.0 } else { -5.0 }]).collect();
        let labels = (0..20).map(|i| i >= 10).collect();
        let d = DesignMatrix::from_rows(names(1), &rows, labels).unwrap();
        match fit_inferential(&d, &InferentialConfig::default()) {
            Err(SlopModelError::SeparationDetected { norm, .. }) => assert!(norm < 30.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rank_deficiency_detected() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let labels = (0..20).map(|i| i % 3 == 0).collect();
        let d = DesignMatrix::from_rows(names(2), &rows, labels).unwrap();
        assert!(matches!(
            fit_inferential(&d, &InferentialConfig::default()),
            Err(SlopModelError::RankDeficient { rank: 2, columns: 3 })
        ));
    }

    #[test]
    fn folds_are_stratified_and_seeded() {
        let labels: Vec<bool> = (0..53).map(|i| i % 5 == 0).collect();
        let f = stratified_folds(&labels, 5, 4);
        assert_eq!(f, stratified_folds(&labels, 5, 4));
        for k in 0..5 {
            let pos = (0..53).filter(|&i| f[i] == k && labels[i]).count();
            assert!((2..=3).contains(&pos));
        }
    }

    #[test]
    fn separable_gives_perfect_auprc_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let shift = if i % 2 == 0 { 3.0 } else { -3.0 };
                vec![shift + rng.random::<f64>(), rng.random::<f64>()]
            })
            .collect();
        let labels: Vec<bool> = (0..60).map(|i| i % 2 == 0).collect();
        let d = DesignMatrix::from_rows(names(2), &rows, labels).unwrap();
        let cfg = PredictiveConfig {
            seed: 3,
            ..Default::default()
        };
        let fit = fit_predictive(&d, &cfg).unwrap();
        assert!(fit.cv.iter().any(|s| s.mean_auprc == 1.0));
        assert_eq!(fit, fit_predictive(&d, &cfg).unwrap());
    }

    #[test]
    fn imbalanced_planted_model_beats_prevalence() {
        let d = planted(&[1.5, -1.0, 0.0, 0.0], -3.2, 1500, 21);
        let prevalence = d.labels.iter().filter(|&&y| y).count() as f64 / d.labels.len() as f64;
        assert!((0.05..0.2).contains(&prevalence), "{prevalence}");
        let fit = fit_predictive(&d, &PredictiveConfig::default()).unwrap();
        let best = fit.cv.iter().find(|s| s.c == fit.c).unwrap();
        assert!(best.mean_auprc > prevalence + 0.2, "{} vs {prevalence}", best.mean_auprc);
    }

    #[test]
    fn stronger_penalty_shrinks() {
        let d = planted(&[1.0, -1.0], 0.0, 200, 2);
        let small = PenalizedProblem::balanced(d.x.clone(), &d.labels, 0.01).minimize();
        let large = PenalizedProblem::balanced(d.x.clone(), &d.labels, 10.0).minimize();
        assert!(small.rows(0, 2).norm() < large.rows(0, 2).norm());
        let g = PenalizedProblem::balanced(d.x.clone(), &d.labels, 10.0).gradient(&large);
        assert!(g.amax() < 1e-6);
    }

    #[test]
    fn single_class_rejected() {
        let d = DesignMatrix::from_rows(names(1), &[vec![1.0], vec![2.0]], vec![true, true]).unwrap();
        assert!(matches!(fit_predictive(&d, &PredictiveConfig::default()), Err(SlopModelError::SingleClass)));
        assert!(matches!(
            fit_inferential(&d, &InferentialConfig::default()),
            Err(SlopModelError::SingleClass)
        ));
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            seed in 0u64..1000,
            n in 3usize..12,
            p in 1usize..4,
            c in 0.05f64..5.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0 || rng.random_bool(0.3)).collect();
            let prob = PenalizedProblem::balanced(x, &labels, c);
            let theta = DVector::from_fn(p + 1, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let g = prob.gradient(&theta);
            let h = 1e-5;
            for j in 0..=p {
                let mut up = theta.clone();
                let mut down = theta.clone();
                up[j] += h;
                down[j] -= h;
                let fd = (prob.loss(&up) - prob.loss(&down)) / (2.0 * h);
                prop_assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1.0), "j={} fd={} g={}", j, fd, g[j]);
            }
        }
    }
}
