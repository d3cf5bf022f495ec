//! Slop classifiers over document features.
//!
//! A [`FeatureMatrix`] holds raw, possibly missing feature values. It is
//! turned into a dense [`DesignMatrix`] by [`standardize`] (mean imputation
//! plus z-scoring) and optionally thinned by [`prune_correlated`]. Two fits
//! are offered: an unregularized maximum-likelihood model with Wald tests
//! ([`fit_inferential`]) and an L2-penalized, class-weighted predictor tuned
//! by cross-validated AUPRC ([`fit_predictive`]).

mod logistic;
mod pr;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;
use thiserror::Error;

pub use logistic::{
    fit_inferential, fit_predictive, logistic, CvScore, InferenceReport, InferentialConfig,
    PenalizedProblem, PredictiveConfig, PredictiveFit, WaldRow,
};
pub use pr::{auprc, pr_curve, PrPoint};

#[derive(Debug, Error)]
pub enum SlopModelError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("separation detected (coefficient norm {norm:.3} after {iterations} iterations)")]
    SeparationDetected { iterations: usize, norm: f64 },
    #[error("design matrix is rank deficient (rank {rank} < {columns})")]
    RankDeficient { rank: usize, columns: usize },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("no label for document `{0}`")]
    MissingLabel(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid score at position {0}")]
    InvalidScore(usize),
    #[error("model file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SlopModelError> = std::result::Result<T, E>;

/// Raw feature values per document, with a binary slop label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    ids: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
    labels: Vec<bool>,
}

fn check_unique(columns: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for c in columns {
        if !seen.insert(c.as_str()) {
            return Err(SlopModelError::DuplicateColumn(c.clone()));
        }
    }
    Ok(())
}

impl FeatureMatrix {
    pub fn new(
        columns: Vec<String>,
        ids: Vec<String>,
        rows: Vec<Vec<Option<f64>>>,
        labels: Vec<bool>,
    ) -> Result<Self> {
        check_unique(&columns)?;
        if ids.len() != rows.len() || labels.len() != rows.len() {
            return Err(SlopModelError::Shape(format!(
                "{} ids, {} rows, {} labels",
                ids.len(),
                rows.len(),
                labels.len()
            )));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
            return Err(SlopModelError::Shape(format!(
                "row {i} has {} values, expected {}",
                r.len(),
                columns.len()
            )));
        }
        Ok(FeatureMatrix {
            columns,
            ids,
            rows,
            labels,
        })
    }

    /// Matrix without missing values, ids generated as `r0, r1, ...`.
    pub fn from_dense(columns: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        let rows = rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
        FeatureMatrix::new(columns, ids, rows, labels)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn prevalence(&self) -> f64 {
        self.labels.iter().filter(|&&y| y).count() as f64 / self.labels.len().max(1) as f64
    }

    /// Keep only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<FeatureMatrix> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.columns
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| SlopModelError::MissingColumn(n.to_string()))
            })
            .collect::<Result<_>>()?;
        FeatureMatrix::new(
            idx.iter().map(|&j| self.columns[j].clone()).collect(),
            self.ids.clone(),
            self.rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect(),
            self.labels.clone(),
        )
    }
}

/// Features as read from a CSV, before labels are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

fn parse_cell(s: &str) -> Option<f64> {
    match s.trim() {
        "" | "NA" | "NaN" | "nan" => None,
        t => t.parse().ok(),
    }
}

/// Reads a features CSV: first column is the document id, the rest are
/// numeric. `NA` and empty cells are missing. Lines starting with `#` are
/// skipped.
pub fn read_features_csv<R: Read>(r: R) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(SlopModelError::Shape("empty header".into()));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    check_unique(&columns)?;
    let (mut ids, mut rows) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cells: Vec<&str> = rec.iter().collect();
        let Some((id, vals)) = cells.split_first() else { continue };
        let parsed: Vec<Option<f64>> = vals.iter().map(|v| parse_cell(v)).collect();
        if let Some(pos) = vals.iter().zip(&parsed).position(|(v, p)| p.is_none() && parse_cell_is_invalid(v)) {
            return Err(SlopModelError::Shape(format!(
                "row {}: column `{}` is not numeric: {:?}",
                i + 1,
                columns[pos],
                vals[pos]
            )));
        }
        ids.push(id.to_string());
        rows.push(parsed);
    }
    Ok(FeatureTable { columns, ids, rows })
}

fn parse_cell_is_invalid(s: &str) -> bool {
    !matches!(s.trim(), "" | "NA" | "NaN" | "nan")
}

/// Reads `doc_id,label` rows; labels are `0`/`1` or `true`/`false`.
pub fn read_labels_csv<R: Read>(r: R) -> Result<BTreeMap<String, bool>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (Some(id), Some(label)) = (rec.get(0), rec.get(1)) else {
            return Err(SlopModelError::Shape("label rows need two columns".into()));
        };
        let y = match label.trim() {
            "1" | "true" | "TRUE" | "True" => true,
            "0" | "false" | "FALSE" | "False" => false,
            other => return Err(SlopModelError::Shape(format!("bad label {other:?} for `{id}`"))),
        };
        out.insert(id.to_string(), y);
    }
    Ok(out)
}

impl FeatureTable {
    /// Joins labels by document id. Every row needs a label.
    pub fn with_labels(self, labels: &BTreeMap<String, bool>) -> Result<FeatureMatrix> {
        let y = self
            .ids
            .iter()
            .map(|id| labels.get(id).copied().ok_or_else(|| SlopModelError::MissingLabel(id.clone())))
            .collect::<Result<_>>()?;
        FeatureMatrix::new(self.columns, self.ids, self.rows, y)
    }
}

/// Dense, complete design matrix (no intercept column).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub columns: Vec<String>,
    pub x: DMatrix<f64>,
    pub labels: Vec<bool>,
}

impl DesignMatrix {
    pub fn new(columns: Vec<String>, x: DMatrix<f64>, labels: Vec<bool>) -> Result<Self> {
        check_unique(&columns)?;
        if x.ncols() != columns.len() || x.nrows() != labels.len() {
            return Err(SlopModelError::Shape(format!(
                "{}x{} matrix, {} columns, {} labels",
                x.nrows(),
                x.ncols(),
                columns.len(),
                labels.len()
            )));
        }
        Ok(DesignMatrix { columns, x, labels })
    }

    pub fn from_rows(columns: Vec<String>, rows: &[Vec<f64>], labels: Vec<bool>) -> Result<Self> {
        let p = columns.len();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(SlopModelError::Shape(format!("row of length {}, expected {p}", r.len())));
        }
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        DesignMatrix::new(columns, x, labels)
    }

    pub fn select_columns(&self, keep: &[usize]) -> DesignMatrix {
        DesignMatrix {
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            x: self.x.select_columns(keep),
            labels: self.labels.clone(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            columns: self.columns.clone(),
            x: self.x.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Per-column constants learned by [`standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    /// Population standard deviations, all positive.
    pub stds: Vec<f64>,
    /// Columns dropped for zero variance (or no observed values).
    pub dropped: Vec<String>,
}

/// Mean-imputes missing values and scales each column to mean 0 and
/// population std 1. Constant columns are dropped.
pub fn standardize(m: &FeatureMatrix) -> Result<(DesignMatrix, Standardizer)> {
    let n = m.n_rows();
    if n < 2 {
        return Err(SlopModelError::TooFewRows(n));
    }
    let mut st = Standardizer {
        columns: Vec::new(),
        means: Vec::new(),
        stds: Vec::new(),
        dropped: Vec::new(),
    };
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (j, name) in m.columns.iter().enumerate() {
        let observed: Vec<f64> = m.rows.iter().filter_map(|r| r[j]).collect();
        if observed.is_empty() {
            st.dropped.push(name.clone());
            continue;
        }
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        let filled: Vec<f64> = m.rows.iter().map(|r| r[j].unwrap_or(mean)).collect();
        let var = filled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std.is_nan() || std <= 1e-12 * mean.abs().max(1.0) {
            st.dropped.push(name.clone());
            continue;
        }
        cols.push(filled.iter().map(|v| (v - mean) / std).collect());
        st.columns.push(name.clone());
        st.means.push(mean);
        st.stds.push(std);
    }
    let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let design = DesignMatrix::new(st.columns.clone(), x, m.labels.clone())?;
    Ok((design, st))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Greedy scan in column order: a column is dropped when its absolute
/// Pearson correlation with an already kept column is at least
/// `threshold`. Returns the thinned matrix and the dropped names.
pub fn prune_correlated(m: &DesignMatrix, threshold: f64) -> (DesignMatrix, Vec<String>) {
    let cols: Vec<Vec<f64>> = m.x.column_iter().map(|c| c.iter().copied().collect()).collect();
    let mut keep: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..cols.len() {
        if keep.iter().any(|&k| pearson(&cols[k], &cols[j]).abs() >= threshold) {
            dropped.push(m.columns[j].clone());
        } else {
            keep.push(j);
        }
    }
    (m.select_columns(&keep), dropped)
}

/// Trained predictor together with the preprocessing it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedSlopModel {
    pub kept_columns: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub c_selected: f64,
}

const MODEL_MAGIC: &str = "SSMODEL1";

impl FittedSlopModel {
    /// Probability of slop for one row given as `(column, value)` pairs in any
    /// order. Missing values take the training mean.
    pub fn predict_proba(&self, columns: &[String], values: &[Option<f64>]) -> Result<f64> {
        if columns.len() != values.len() {
            return Err(SlopModelError::Shape(format!("{} columns, {} values", columns.len(), values.len())));
        }
        let mut eta = self.intercept;
        for (k, name) in self.kept_columns.iter().enumerate() {
            let j = columns
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| SlopModelError::MissingColumn(name.clone()))?;
            let v = values[j].unwrap_or(self.means[k]);
            eta += self.coefficients[k] * (v - self.means[k]) / self.stds[k];
        }
        Ok(logistic(eta))
    }

    pub fn predict_matrix(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        m.rows().iter().map(|r| self.predict_proba(m.columns(), r)).collect()
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        self.write_with_comments(w, &[])
    }

    /// Writes the model with `#` comment lines right after the magic line.
    pub fn write_with_comments<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        writeln!(w, "{MODEL_MAGIC}")?;
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "c\t{}", self.c_selected)?;
        writeln!(w, "intercept\t{}", self.intercept)?;
        writeln!(w, "columns\t{}", self.kept_columns.len())?;
        for k in 0..self.kept_columns.len() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                self.kept_columns[k], self.means[k], self.stds[k], self.coefficients[k]
            )?;
        }
        Ok(())
    }

    /// Reads the text format. `#` lines after the magic line are skipped.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines: Vec<(usize, String)> = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 || !line.starts_with('#') {
                lines.push((i + 1, line));
            }
        }
        let err = |line: usize, msg: &str| SlopModelError::Format {
            line,
            msg: msg.to_string(),
        };
        let line_no = |i: usize| lines.get(i).map_or(lines.last().map_or(1, |l| l.0 + 1), |l| l.0);
        if lines.first().map(|l| l.1.as_str()) != Some(MODEL_MAGIC) {
            return Err(err(1, "missing SSMODEL1 header"));
        }
        let field = |i: usize, key: &str| -> Result<String> {
            let (_, line) = lines.get(i).ok_or_else(|| err(line_no(i), "unexpected end of file"))?;
            match line.split_once('\t') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(err(line_no(i), &format!("expected `{key}`"))),
            }
        };
        let num = |s: &str, line: usize| -> Result<f64> {
            s.parse::<f64>().map_err(|_| err(line, &format!("not a number: {s:?}")))
        };
        let c_selected = num(&field(1, "c")?, line_no(1))?;
        let intercept = num(&field(2, "intercept")?, line_no(2))?;
        let n: usize = field(3, "columns")?.parse().map_err(|_| err(line_no(3), "bad column count"))?;
        let mut model = FittedSlopModel {
            kept_columns: Vec::with_capacity(n),
            means: Vec::with_capacity(n),
            stds: Vec::with_capacity(n),
            coefficients: Vec::with_capacity(n),
            intercept,
            c_selected,
        };
        for i in 4..4 + n {
            let (no, line) = lines.get(i).ok_or_else(|| err(line_no(i), "unexpected end of file"))?;
            let parts: Vec<&str> = line.split('\t').collect();
            let [name, mean, std, coef] = parts[..] else {
                return Err(err(*no, "expected name, mean, std, coefficient"));
            };
            let std = num(std, *no)?;
            if std.is_nan() || std <= 0.0 {
                return Err(err(*no, "std must be positive"));
            }
            model.kept_columns.push(name.to_string());
            model.means.push(num(mean, *no)?);
            model.stds.push(std);
            model.coefficients.push(num(coef, *no)?);
        }
        if let Some((no, _)) = lines.iter().skip(4 + n).find(|l| !l.1.trim().is_empty()) {
            return Err(err(*no, "trailing content"));
        }
        check_unique(&model.kept_columns)?;
        Ok(model)
    }
}

/// Output of [`train_slop_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSlopModel {
    pub model: FittedSlopModel,
    pub dropped_constant: Vec<String>,
    pub dropped_correlated: Vec<String>,
    pub cv: Vec<CvScore>,
}

/// Standardize, prune at `prune_threshold`, tune C by cross-validated AUPRC
/// and refit on all rows.
pub fn train_slop_model(
    m: &FeatureMatrix,
    prune_threshold: f64,
    cfg: &PredictiveConfig,
) -> Result<TrainedSlopModel> {
    let (design, st) = standardize(m)?;
    let (pruned, dropped_correlated) = prune_correlated(&design, prune_threshold);
    let fit = fit_predictive(&pruned, cfg)?;
    let idx: Vec<usize> = pruned
        .columns
        .iter()
        .map(|c| st.columns.iter().position(|s| s == c).expect("kept column was standardized"))
        .collect();
    Ok(TrainedSlopModel {
        model: FittedSlopModel {
            kept_columns: pruned.columns.clone(),
            means: idx.iter().map(|&j| st.means[j]).collect(),
            stds: idx.iter().map(|&j| st.stds[j]).collect(),
            coefficients: fit.coefficients,
            intercept: fit.intercept,
            c_selected: fit.c,
        },
        dropped_constant: st.dropped,
        dropped_correlated,
        cv: fit.cv,
    })
}
