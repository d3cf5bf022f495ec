//! Inter-annotator agreement coefficients and span-overlap measures.

mod report;
mod spans;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use report::{agreement_report, write_agreement_csv, AgreementRow};
pub use spans::{char_overlap_counts, char_span_prf, span_precision, span_precision_by_paragraph, CharSpan, Prf};

#[derive(Debug, Error, PartialEq)]
pub enum AgreementError {
    #[error("no items to compare")]
    Empty,
    #[error("label {0:?} is not among the declared categories")]
    UnknownCategory(String),
    #[error("expected agreement is 1; the coefficient is undefined")]
    DegenerateMarginals,
    #[error("item {item} has {got} ratings, expected {expected}")]
    UnequalRaterCounts { item: usize, expected: usize, got: usize },
    #[error("fewer than 2 pairable values")]
    InsufficientData,
    #[error("expected disagreement is 0 but observed disagreement is {0}")]
    UndefinedAlpha(f64),
    #[error("first annotator has no spans")]
    NoSpans,
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 annotators on shared documents")]
    InsufficientOverlap,
}

/// Chance-corrected coefficient with its components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    pub coefficient: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
}

impl Agreement {
    fn new(po: f64, pe: f64) -> Result<Self, AgreementError> {
        if pe >= 1.0 {
            return Err(AgreementError::DegenerateMarginals);
        }
        Ok(Agreement {
            coefficient: (po - pe) / (1.0 - pe),
            observed_agreement: po,
            expected_agreement: pe,
        })
    }
}

/// Paired labels from two annotators over a declared category set.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable<L> {
    categories: Vec<L>,
    items: Vec<(usize, usize)>,
}

impl<L: Ord + Clone + std::fmt::Debug> PairTable<L> {
    pub fn new<I>(categories: impl IntoIterator<Item = L>, items: I) -> Result<Self, AgreementError>
    where
        I: IntoIterator<Item = (L, L)>,
    {
        let categories: Vec<L> = categories.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let index = |l: &L| {
            categories
                .binary_search(l)
                .map_err(|_| AgreementError::UnknownCategory(format!("{l:?}")))
        };
        let items = items
            .into_iter()
            .map(|(a, b)| Ok((index(&a)?, index(&b)?)))
            .collect::<Result<Vec<_>, AgreementError>>()?;
        Ok(PairTable { categories, items })
    }

    /// Table whose categories are the labels that occur.
    pub fn from_pairs<I>(items: I) -> Self
    where
        I: IntoIterator<Item = (L, L)>,
    {
        let items: Vec<(L, L)> = items.into_iter().collect();
        let cats: BTreeSet<L> = items.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
        Self::new(cats, items).expect("categories drawn from the items")
    }

    pub fn categories(&self) -> &[L] {
        &self.categories
    }
}

impl<L> PairTable<L> {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn observed(&self) -> f64 {
        let same = self.items.iter().filter(|(a, b)| a == b).count();
        same as f64 / self.items.len() as f64
    }

    /// Per-category usage proportions of each annotator.
    fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.categories.len();
        let n = self.items.len() as f64;
        let (mut pa, mut pb) = (vec![0.0; k], vec![0.0; k]);
        for &(a, b) in &self.items {
            pa[a] += 1.0 / n;
            pb[b] += 1.0 / n;
        }
        (pa, pb)
    }

    fn observed_categories(&self) -> usize {
        self.items
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .collect::<BTreeSet<_>>()
            .len()
    }
}

/// Cohen's kappa; expected agreement from the product of the marginals.
pub fn cohen_kappa<L>(table: &PairTable<L>) -> Result<Agreement, AgreementError> {
    if table.is_empty() {
        return Err(AgreementError::Empty);
    }
    let (pa, pb) = table.marginals();
    let pe: f64 = pa.iter().zip(&pb).map(|(a, b)| a * b).sum();
    Agreement::new(table.observed(), pe)
}

/// Gwet's AC1 for two annotators.
///
/// Fails with `DegenerateMarginals` when a single category is used
/// throughout, where the coefficient carries no information.
pub fn gwet_ac1<L>(table: &PairTable<L>) -> Result<Agreement, AgreementError> {
    if table.is_empty() {
        return Err(AgreementError::Empty);
    }
    let k = table.categories.len();
    if k < 2 || table.observed_categories() < 2 {
        return Err(AgreementError::DegenerateMarginals);
    }
    let (pa, pb) = table.marginals();
    let pe = pa
        .iter()
        .zip(&pb)
        .map(|(a, b)| {
            let pi = (a + b) / 2.0;
            pi * (1.0 - pi)
        })
        .sum::<f64>()
        / (k - 1) as f64;
    Agreement::new(table.observed(), pe)
}

fn check_ratings(ratings: &[Vec<usize>]) -> Result<(usize, usize), AgreementError> {
    let first = ratings.first().ok_or(AgreementError::Empty)?;
    let r: usize = first.iter().sum();
    let k = first.len();
    for (i, row) in ratings.iter().enumerate() {
        let got: usize = row.iter().sum();
        if got != r || row.len() != k {
            return Err(AgreementError::UnequalRaterCounts {
                item: i,
                expected: r,
                got,
            });
        }
    }
    if r < 2 {
        return Err(AgreementError::InsufficientData);
    }
    Ok((r, k))
}

/// Fleiss' kappa over `items × categories` count rows; each row must sum to
/// the same number of raters.
pub fn fleiss_kappa(ratings: &[Vec<usize>]) -> Result<Agreement, AgreementError> {
    let (r, k) = check_ratings(ratings)?;
    let n = ratings.len() as f64;
    let r_f = r as f64;
    let mut p = vec![0.0; k];
    let mut p_bar = 0.0;
    for row in ratings {
        let sq: usize = row.iter().map(|c| c * c).sum();
        p_bar += (sq - r) as f64 / (r_f * (r_f - 1.0)) / n;
        for (pk, &c) in p.iter_mut().zip(row) {
            *pk += c as f64 / (n * r_f);
        }
    }
    let pe = p.iter().map(|x| x * x).sum();
    Agreement::new(p_bar, pe)
}

/// Gwet's AC1 for any fixed number of raters per item. With two raters it
/// equals [`gwet_ac1`].
pub fn gwet_ac1_multi(ratings: &[Vec<usize>]) -> Result<Agreement, AgreementError> {
    let (r, k) = check_ratings(ratings)?;
    let used = (0..k).filter(|&j| ratings.iter().any(|row| row[j] > 0)).count();
    if k < 2 || used < 2 {
        return Err(AgreementError::DegenerateMarginals);
    }
    let n = ratings.len() as f64;
    let r_f = r as f64;
    let mut pi = vec![0.0; k];
    let mut pa = 0.0;
    for row in ratings {
        pa += row.iter().map(|&c| (c * c.saturating_sub(1)) as f64).sum::<f64>() / (r_f * (r_f - 1.0)) / n;
        for (p, &c) in pi.iter_mut().zip(row) {
            *p += c as f64 / (n * r_f);
        }
    }
    let pe = pi.iter().map(|p| p * (1.0 - p)).sum::<f64>() / (k - 1) as f64;
    Agreement::new(pa, pe)
}

/// MASI distance `1 - J * M` between two sets.
///
/// `J` is the Jaccard index and `M` is 1 for equal sets, 2/3 when one is a
/// proper subset of the other, 1/3 for other overlaps and 0 when disjoint.
/// Two empty sets are at distance 0.
pub fn masi_distance<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    let m = if a == b {
        1.0
    } else if a.is_subset(b) || b.is_subset(a) {
        2.0 / 3.0
    } else if inter > 0 {
        1.0 / 3.0
    } else {
        0.0
    };
    1.0 - inter as f64 / union as f64 * m
}

/// Krippendorff's alpha over arbitrary values with a distance function.
///
/// `units` maps each item to the values assigned by its annotators. Items
/// with fewer than two values are not pairable and are ignored.
pub fn krippendorff_alpha<K, V, F>(units: &BTreeMap<K, Vec<V>>, distance: F) -> Result<f64, AgreementError>
where
    F: Fn(&V, &V) -> f64,
{
    let pairable: Vec<&Vec<V>> = units.values().filter(|v| v.len() >= 2).collect();
    let n: usize = pairable.iter().map(|v| v.len()).sum();
    if n < 2 {
        return Err(AgreementError::InsufficientData);
    }
    let mut d_o = 0.0;
    for vals in &pairable {
        let mut s = 0.0;
        for (i, a) in vals.iter().enumerate() {
            for (j, b) in vals.iter().enumerate() {
                if i != j {
                    s += distance(a, b);
                }
            }
        }
        d_o += s / (vals.len() - 1) as f64;
    }
    d_o /= n as f64;
    let pooled: Vec<&V> = pairable.iter().flat_map(|v| v.iter()).collect();
    let mut d_e = 0.0;
    for (i, a) in pooled.iter().enumerate() {
        for (j, b) in pooled.iter().enumerate() {
            if i != j {
                d_e += distance(a, b);
            }
        }
    }
    d_e /= (n * (n - 1)) as f64;
    if d_e == 0.0 {
        return if d_o == 0.0 {
            Ok(1.0)
        } else {
            Err(AgreementError::UndefinedAlpha(d_o))
        };
    }
    Ok(1.0 - d_o / d_e)
}

/// Krippendorff's alpha with MASI distance over set-valued annotations.
pub fn krippendorff_alpha_masi<K, T: Ord>(units: &BTreeMap<K, Vec<BTreeSet<T>>>) -> Result<f64, AgreementError> {
    krippendorff_alpha(units, masi_distance)
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        // positions i..=j share the mean of ranks i+1..=j+1
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AgreementError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AgreementError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, AgreementError> {
    if x.len() != y.len() {
        return Err(AgreementError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(AgreementError::InsufficientData);
    }
    pearson(&average_ranks(x), &average_ranks(y))
}
