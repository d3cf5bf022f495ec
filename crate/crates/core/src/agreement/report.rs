use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::corpus::{Annotations, CollapsedCode, Theme};

use super::{
    cohen_kappa, fleiss_kappa, gwet_ac1, gwet_ac1_multi, krippendorff_alpha_masi, AgreementError,
    PairTable,
};

/// One line of the agreement table.
///
/// `scope` is a theme name (or `label` for the document-level slop
/// judgment), `code` a collapsed code, and `pair` either `all` or two
/// annotator ids joined by `-`. Coefficients that are undefined for the data
/// are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementRow {
    pub scope: String,
    pub code: String,
    pub pair: String,
    pub kappa: Option<f64>,
    pub ac1: Option<f64>,
    pub alpha_masi: Option<f64>,
    pub prevalence: Option<f64>,
}

struct Group {
    name: String,
    members: Vec<String>,
}

/// Binary agreement over a group: Cohen's kappa and AC1 for two members,
/// Fleiss' kappa and multi-rater AC1 for more.
fn binary_agreement(rows: &[Vec<bool>]) -> (Option<f64>, Option<f64>, Option<f64>) {
    if rows.is_empty() {
        return (None, None, None);
    }
    let n_ratings = rows.len() * rows[0].len();
    let positives = rows.iter().flatten().filter(|&&x| x).count();
    let prevalence = Some(positives as f64 / n_ratings as f64);
    let (kappa, ac1) = if rows[0].len() == 2 {
        let table = PairTable::new([false, true], rows.iter().map(|r| (r[0], r[1]))).expect("binary labels");
        (cohen_kappa(&table), gwet_ac1(&table))
    } else {
        let counts: Vec<Vec<usize>> = rows
            .iter()
            .map(|r| {
                let pos = r.iter().filter(|&&x| x).count();
                vec![r.len() - pos, pos]
            })
            .collect();
        (fleiss_kappa(&counts), gwet_ac1_multi(&counts))
    };
    (kappa.ok().map(|a| a.coefficient), ac1.ok().map(|a| a.coefficient), prevalence)
}

/// Agreement table over annotators' collapsed codes and slop judgments.
///
/// A document counts for a group when every member has a span or a judgment
/// on it. Per-code labels are document-level: whether the annotator used
/// the code anywhere in the document. The alpha column is the theme-level
/// Krippendorff alpha with MASI distance over each annotator's set of codes
/// from that theme.
pub fn agreement_report(ann: &Annotations) -> Result<Vec<AgreementRow>, AgreementError> {
    let annotators = ann.annotators();
    if annotators.len() < 2 {
        return Err(AgreementError::InsufficientOverlap);
    }
    let mut coverage: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut codes: BTreeMap<&str, BTreeMap<&str, BTreeSet<CollapsedCode>>> = BTreeMap::new();
    let mut judged: BTreeMap<(&str, &str), bool> = BTreeMap::new();
    for s in &ann.spans {
        coverage.entry(&s.annotator_id).or_default().insert(&s.doc_id);
        codes
            .entry(&s.annotator_id)
            .or_default()
            .entry(&s.doc_id)
            .or_default()
            .extend(s.collapsed());
    }
    for j in &ann.judgments {
        coverage.entry(&j.annotator_id).or_default().insert(&j.doc_id);
        judged.insert((&j.annotator_id, &j.doc_id), j.is_slop);
    }

    let mut groups = vec![Group {
        name: "all".into(),
        members: annotators.clone(),
    }];
    for (i, a) in annotators.iter().enumerate() {
        for b in &annotators[i + 1..] {
            groups.push(Group {
                name: format!("{a}-{b}"),
                members: vec![a.clone(), b.clone()],
            });
        }
    }
    let shared: Vec<Vec<&str>> = groups
        .iter()
        .map(|g| {
            let mut sets = g.members.iter().map(|m| &coverage[m.as_str()]);
            let first = sets.next().cloned().unwrap_or_default();
            sets.fold(first, |acc, s| acc.intersection(s).copied().collect())
                .into_iter()
                .collect()
        })
        .collect();
    if shared.iter().all(Vec::is_empty) {
        return Err(AgreementError::InsufficientOverlap);
    }

    let empty = BTreeSet::new();
    let code_set = |m: &str, d: &str| -> &BTreeSet<CollapsedCode> {
        codes.get(m).and_then(|per_doc| per_doc.get(d)).unwrap_or(&empty)
    };
    let mut rows = Vec::new();
    for theme in Theme::ALL {
        let alphas: Vec<Option<f64>> = groups
            .iter()
            .zip(&shared)
            .map(|(g, docs)| {
                let units: BTreeMap<&str, Vec<BTreeSet<CollapsedCode>>> = docs
                    .iter()
                    .map(|&d| {
                        let vals = g
                            .members
                            .iter()
                            .map(|m| {
                                code_set(m, d)
                                    .iter()
                                    .copied()
                                    .filter(|c| c.theme() == theme)
                                    .collect()
                            })
                            .collect();
                        (d, vals)
                    })
                    .collect();
                krippendorff_alpha_masi(&units).ok()
            })
            .collect();
        for code in theme.codes() {
            for ((g, docs), alpha) in groups.iter().zip(&shared).zip(&alphas) {
                let labels: Vec<Vec<bool>> = docs
                    .iter()
                    .map(|&d| g.members.iter().map(|m| code_set(m, d).contains(&code)).collect())
                    .collect();
                let (kappa, ac1, prevalence) = binary_agreement(&labels);
                rows.push(AgreementRow {
                    scope: theme.as_str().into(),
                    code: code.as_str().into(),
                    pair: g.name.clone(),
                    kappa,
                    ac1,
                    alpha_masi: *alpha,
                    prevalence,
                });
            }
        }
    }
    for (g, docs) in groups.iter().zip(&shared) {
        let labels: Vec<Vec<bool>> = docs
            .iter()
            .filter_map(|&d| {
                g.members
                    .iter()
                    .map(|m| judged.get(&(m.as_str(), d)).copied())
                    .collect::<Option<Vec<bool>>>()
            })
            .collect();
        let (kappa, ac1, prevalence) = binary_agreement(&labels);
        rows.push(AgreementRow {
            scope: "label".into(),
            code: "slop".into(),
            pair: g.name.clone(),
            kappa,
            ac1,
            alpha_masi: None,
            prevalence,
        });
    }
    Ok(rows)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn write_agreement_csv<W: Write>(w: W, rows: &[AgreementRow]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["scope", "code", "pair", "kappa", "ac1", "alpha_masi", "prevalence"])?;
    for r in rows {
        out.write_record([
            r.scope.clone(),
            r.code.clone(),
            r.pair.clone(),
            cell(r.kappa),
            cell(r.ac1),
            cell(r.alpha_masi),
            cell(r.prevalence),
        ])?;
    }
    out.flush()?;
    Ok(())
}
