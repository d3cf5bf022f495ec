use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::agreement::{char_overlap_counts, char_span_prf, cohen_kappa, CharSpan, PairTable, Prf};
use crate::corpus::Annotations;

use super::{JudgeError, Result};

/// Judge spans for one document after locating them in the text.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanPrediction {
    pub doc_id: String,
    pub spans: Vec<CharSpan>,
    /// Quoted spans that could not be found in the text.
    pub unmatched: usize,
}

fn coverage_check(gold: &BTreeSet<&str>, pred: &BTreeSet<&str>) -> Result<()> {
    let missing = gold.difference(pred).count();
    let extra = pred.difference(gold).count();
    if missing + extra > 0 {
        return Err(JudgeError::CoverageMismatch { missing, extra });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryReport {
    pub n_docs: usize,
    /// Cohen's kappa against each annotator on the documents they judged.
    pub kappa_per_annotator: Vec<(String, Option<f64>)>,
    pub kappa_mean: Option<f64>,
    /// Pooled over every (document, annotator) judgment.
    pub precision: f64,
    pub recall: f64,
    pub predicted_slop_rate: f64,
    pub human_slop_rate: f64,
}

/// Scores binary predictions against human judgments. Predictions must
/// cover exactly the judged documents.
pub fn evaluate_binary(preds: &BTreeMap<String, bool>, gold: &Annotations) -> Result<BinaryReport> {
    if gold.judgments.is_empty() {
        return Err(JudgeError::NoGold);
    }
    let judged: BTreeSet<&str> = gold.judgments.iter().map(|j| j.doc_id.as_str()).collect();
    coverage_check(&judged, &preds.keys().map(String::as_str).collect())?;
    let mut per: BTreeMap<&str, Vec<(bool, bool)>> = BTreeMap::new();
    for j in &gold.judgments {
        per.entry(&j.annotator_id).or_default().push((preds[&j.doc_id], j.is_slop));
    }
    let kappa_per_annotator: Vec<(String, Option<f64>)> = per
        .iter()
        .map(|(id, pairs)| {
            let k = PairTable::new([false, true], pairs.iter().copied())
                .and_then(|t| cohen_kappa(&t))
                .ok()
                .map(|a| a.coefficient);
            (id.to_string(), k)
        })
        .collect();
    let defined: Vec<f64> = kappa_per_annotator.iter().filter_map(|(_, k)| *k).collect();
    let kappa_mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let all: Vec<(bool, bool)> = per.into_values().flatten().collect();
    let tp = all.iter().filter(|(p, h)| *p && *h).count();
    let pred_pos = all.iter().filter(|(p, _)| *p).count();
    let gold_pos = all.iter().filter(|(_, h)| *h).count();
    let prf = Prf::from_counts(tp, pred_pos, gold_pos);
    Ok(BinaryReport {
        n_docs: preds.len(),
        kappa_per_annotator,
        kappa_mean,
        precision: prf.precision,
        recall: prf.recall,
        predicted_slop_rate: preds.values().filter(|&&y| y).count() as f64 / preds.len() as f64,
        human_slop_rate: gold_pos as f64 / all.len() as f64,
    })
}

/// Every annotator's spans as char spans.
pub fn gold_spans(gold: &Annotations) -> Vec<CharSpan> {
    gold.spans.iter().map(CharSpan::from).collect()
}

fn flatten(preds: &[SpanPrediction]) -> Vec<CharSpan> {
    preds.iter().flat_map(|p| p.spans.iter().cloned()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanReport {
    pub n_docs: usize,
    pub prf: Prf,
    /// Mean length in chars of predicted spans.
    pub mean_pred_len: Option<f64>,
    pub mean_gold_len: Option<f64>,
    /// Share of documents with no located span.
    pub empty_rate: f64,
    pub unmatched: usize,
}

fn mean_len(spans: &[CharSpan]) -> Option<f64> {
    (!spans.is_empty()).then(|| spans.iter().map(|s| (s.end - s.start) as f64).sum::<f64>() / spans.len() as f64)
}

/// Character-level scores of predicted spans against the union of all
/// annotators' spans. Predictions must cover exactly the annotated
/// documents.
pub fn evaluate_spans(preds: &[SpanPrediction], gold: &Annotations) -> Result<SpanReport> {
    let docs = gold.documents();
    if docs.is_empty() {
        return Err(JudgeError::NoGold);
    }
    let gold_docs: BTreeSet<&str> = docs.iter().map(String::as_str).collect();
    let pred_docs: BTreeSet<&str> = preds.iter().map(|p| p.doc_id.as_str()).collect();
    coverage_check(&gold_docs, &pred_docs)?;
    let g = gold_spans(gold);
    let p = flatten(preds);
    let non_empty: BTreeSet<&str> = preds
        .iter()
        .filter(|p| p.spans.iter().any(|s| s.end > s.start))
        .map(|p| p.doc_id.as_str())
        .collect();
    Ok(SpanReport {
        n_docs: pred_docs.len(),
        prf: char_span_prf(&g, &p),
        mean_pred_len: mean_len(&p),
        mean_gold_len: mean_len(&g),
        empty_rate: 1.0 - non_empty.len() as f64 / pred_docs.len() as f64,
        unmatched: preds.iter().map(|p| p.unmatched).sum(),
    })
}

/// Char-level F1 between two prediction sets; symmetric.
pub fn span_overlap_f1(a: &[SpanPrediction], b: &[SpanPrediction]) -> f64 {
    let (overlap, nb, na) = char_overlap_counts(&flatten(a), &flatten(b));
    Prf::from_counts(overlap, nb, na).f1
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

/// One row per setting: `setting,kappa,precision,recall,pct_slop,human_pct_slop,n_docs`
/// followed by a `kappa_<annotator>` column per annotator of the first report.
pub fn write_binary_csv<W: Write>(w: W, rows: &[(String, BinaryReport)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let annotators: Vec<String> = rows
        .first()
        .map(|(_, r)| r.kappa_per_annotator.iter().map(|(a, _)| a.clone()).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = ["setting", "kappa", "precision", "recall", "pct_slop", "human_pct_slop", "n_docs"]
        .map(String::from)
        .to_vec();
    header.extend(annotators.iter().map(|a| format!("kappa_{a}")));
    out.write_record(&header)?;
    for (setting, r) in rows {
        let mut rec = vec![
            setting.clone(),
            cell(r.kappa_mean),
            r.precision.to_string(),
            r.recall.to_string(),
            r.predicted_slop_rate.to_string(),
            r.human_slop_rate.to_string(),
            r.n_docs.to_string(),
        ];
        for a in &annotators {
            let k = r.kappa_per_annotator.iter().find(|(id, _)| id == a).and_then(|(_, k)| *k);
            rec.push(cell(k));
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// One row per setting with its span scores and the F1 overlap with the
/// first setting's predictions.
pub fn write_span_csv<W: Write>(w: W, rows: &[(String, SpanReport, Option<f64>)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "setting",
        "precision",
        "recall",
        "f1",
        "mean_pred_len",
        "mean_gold_len",
        "empty_rate",
        "unmatched",
        "n_docs",
        "f1_vs_first",
    ])?;
    for (setting, r, overlap) in rows {
        out.write_record([
            setting.clone(),
            r.prf.precision.to_string(),
            r.prf.recall.to_string(),
            r.prf.f1.to_string(),
            cell(r.mean_pred_len),
            cell(r.mean_gold_len),
            r.empty_rate.to_string(),
            r.unmatched.to_string(),
            r.n_docs.to_string(),
            cell(*overlap),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocumentJudgment, GranularCode, SpanAnnotation};

    fn judgment(doc: &str, who: &str, y: bool) -> DocumentJudgment {
        DocumentJudgment {
            doc_id: doc.into(),
            annotator_id: who.into(),
            is_slop: y,
        }
    }

    fn span(doc: &str, who: &str, start: usize, end: usize) -> SpanAnnotation {
        SpanAnnotation {
            doc_id: doc.into(),
            annotator_id: who.into(),
            start,
            end,
            codes: [GranularCode::IU1].into(),
        }
    }

    fn pred(doc: &str, spans: &[(usize, usize)]) -> SpanPrediction {
        SpanPrediction {
            doc_id: doc.into(),
            spans: spans.iter().map(|&(s, e)| CharSpan::new(doc, s, e)).collect(),
            unmatched: 0,
        }
    }

    #[test]
    fn binary_scores() {
        let gold = Annotations {
            spans: vec![],
            judgments: vec![
                judgment("a", "h1", true),
                judgment("b", "h1", false),
                judgment("c", "h1", true),
                judgment("d", "h1", false),
                judgment("a", "h2", true),
                judgment("b", "h2", true),
            ],
        };
        let preds: BTreeMap<String, bool> =
            [("a", true), ("b", false), ("c", false), ("d", false)].map(|(d, y)| (d.to_string(), y)).into();
        let r = evaluate_binary(&preds, &gold).unwrap();
        // h1: pred [1,0,0,0] vs [1,0,1,0]: po = .75, pe = .25*.5 + .75*.5 = .5
        assert_eq!(r.kappa_per_annotator[0], ("h1".to_string(), Some(0.5)));
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.recall, 0.5);
        assert_eq!(r.predicted_slop_rate, 0.25);
        assert!((r.human_slop_rate - 4.0 / 6.0).abs() < 1e-15);

        let mut missing = preds.clone();
        missing.remove("d");
        missing.insert("z".into(), true);
        assert!(matches!(
            evaluate_binary(&missing, &gold),
            Err(JudgeError::CoverageMismatch { missing: 1, extra: 1 })
        ));
    }

    #[test]
    fn span_scores_match_char_prf() {
        let gold = Annotations {
            spans: vec![span("a", "h1", 0, 10), span("b", "h2", 5, 9)],
            judgments: vec![judgment("c", "h1", false)],
        };
        let preds = vec![pred("a", &[(5, 15)]), pred("b", &[]), pred("c", &[])];
        let r = evaluate_spans(&preds, &gold).unwrap();
        let direct = char_span_prf(&gold_spans(&gold), &flatten(&preds));
        assert_eq!(r.prf, direct);
        assert_eq!(r.prf.precision, 0.5);
        assert_eq!(r.prf.recall, 5.0 / 14.0);
        assert!((r.empty_rate - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.mean_pred_len, Some(10.0));
        assert_eq!(r.mean_gold_len, Some(7.0));
    }

    #[test]
    fn echo_and_empty_predictions() {
        let gold = Annotations {
            spans: vec![span("a", "h1", 0, 10), span("a", "h2", 20, 25)],
            judgments: vec![],
        };
        let echo = vec![pred("a", &[(0, 10), (20, 25)])];
        let r = evaluate_spans(&echo, &gold).unwrap();
        assert_eq!((r.prf.precision, r.prf.recall), (1.0, 1.0));
        let empty = vec![pred("a", &[])];
        let r = evaluate_spans(&empty, &gold).unwrap();
        assert_eq!((r.prf.recall, r.empty_rate, r.mean_pred_len), (0.0, 1.0, None));
        assert!(matches!(evaluate_spans(&[], &gold), Err(JudgeError::CoverageMismatch { missing: 1, extra: 0 })));
    }

    #[test]
    fn overlap_f1_symmetric() {
        let a = vec![pred("a", &[(0, 10)])];
        let b = vec![pred("a", &[(5, 25)])];
        assert_eq!(span_overlap_f1(&a, &b), span_overlap_f1(&b, &a));
        assert!((span_overlap_f1(&a, &b) - 2.0 * 0.25 * 0.5 / 0.75).abs() < 1e-15);
        assert_eq!(span_overlap_f1(&a, &a), 1.0);
    }

    #[test]
    fn csv_outputs() {
        let r = SpanReport {
            n_docs: 2,
            prf: Prf::from_counts(1, 2, 4),
            mean_pred_len: None,
            mean_gold_len: Some(3.5),
            empty_rate: 0.5,
            unmatched: 1,
        };
        let mut buf = Vec::new();
        write_span_csv(&mut buf, &[("k=0".into(), r, None)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "k=0,0.5,0.25,0.3333333333333333,NA,3.5,0.5,1,2,NA");
    }
}
