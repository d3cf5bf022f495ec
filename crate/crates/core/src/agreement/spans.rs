use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{Corpus, Document, SpanAnnotation};

use super::AgreementError;

/// Half-open char range `[start, end)` in one document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CharSpan {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(doc_id: impl Into<String>, start: usize, end: usize) -> Self {
        CharSpan {
            doc_id: doc_id.into(),
            start,
            end,
        }
    }
}

impl From<&SpanAnnotation> for CharSpan {
    fn from(a: &SpanAnnotation) -> Self {
        CharSpan::new(a.doc_id.clone(), a.start, a.end)
    }
}

fn by_doc(spans: &[CharSpan]) -> BTreeMap<&str, Vec<(usize, usize)>> {
    let mut out: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
    for s in spans {
        out.entry(s.doc_id.as_str()).or_default().push((s.start, s.end));
    }
    out
}

fn overlaps(ranges: &[(usize, usize)], start: usize, end: usize) -> bool {
    ranges.iter().any(|&(s, e)| s < end && start < e)
}

/// Indices of word tokens touched by any of the ranges.
fn covered_words(doc: &Document, ranges: &[(usize, usize)]) -> BTreeSet<usize> {
    doc.tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_countable() && overlaps(ranges, t.start, t.end))
        .map(|(i, _)| i)
        .collect()
}

/// Share of words highlighted by A that B also highlighted, pooled over all
/// documents. A word counts as highlighted when a span overlaps it. Codes are
/// ignored.
pub fn span_precision(corpus: &Corpus, a: &[CharSpan], b: &[CharSpan]) -> Result<f64, AgreementError> {
    let (a, b) = (by_doc(a), by_doc(b));
    let (mut hit, mut total) = (0usize, 0usize);
    for (id, ra) in &a {
        let Some(doc) = corpus.get(id) else { continue };
        let wa = covered_words(doc, ra);
        let wb = b.get(id).map(|rb| covered_words(doc, rb)).unwrap_or_default();
        total += wa.len();
        hit += wa.intersection(&wb).count();
    }
    if total == 0 {
        return Err(AgreementError::NoSpans);
    }
    Ok(hit as f64 / total as f64)
}

/// Paragraphs as char ranges, split on blank lines.
fn paragraphs(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let mut pos = 0;
    for line in text.split('\n') {
        let len = line.chars().count();
        if line.trim().is_empty() {
            out.extend(current.take());
        } else {
            let (s, _) = current.unwrap_or((pos, pos));
            current = Some((s, pos + len));
        }
        pos += len + 1;
    }
    out.extend(current);
    out
}

/// Span precision computed per paragraph (blank-line separated) and averaged
/// over the paragraphs where A highlighted anything.
pub fn span_precision_by_paragraph(
    corpus: &Corpus,
    a: &[CharSpan],
    b: &[CharSpan],
) -> Result<f64, AgreementError> {
    let (a, b) = (by_doc(a), by_doc(b));
    let mut precisions = Vec::new();
    for (id, ra) in &a {
        let Some(doc) = corpus.get(id) else { continue };
        let wa = covered_words(doc, ra);
        let wb = b.get(id).map(|rb| covered_words(doc, rb)).unwrap_or_default();
        for (ps, pe) in paragraphs(&doc.text) {
            let in_par = |i: &&usize| doc.tokens[**i].start >= ps && doc.tokens[**i].end <= pe;
            let pa: Vec<&usize> = wa.iter().filter(in_par).collect();
            if pa.is_empty() {
                continue;
            }
            let hit = pa.iter().filter(|i| wb.contains(i)).count();
            precisions.push(hit as f64 / pa.len() as f64);
        }
    }
    if precisions.is_empty() {
        return Err(AgreementError::NoSpans);
    }
    Ok(precisions.iter().sum::<f64>() / precisions.len() as f64)
}

fn merge(mut ranges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    ranges.retain(|(s, e)| e > s);
    ranges.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(ranges.len());
    for (s, e) in ranges {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn total_len(ranges: &[(usize, usize)]) -> usize {
    ranges.iter().map(|(s, e)| e - s).sum()
}

fn intersection_len(a: &[(usize, usize)], b: &[(usize, usize)]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            n += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(overlap: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(overlap, predicted);
        let recall = ratio(overlap, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

/// Character-level overlap counts `(overlap, predicted, gold)` over the union
/// of each side's spans per document.
pub fn char_overlap_counts(gold: &[CharSpan], pred: &[CharSpan]) -> (usize, usize, usize) {
    let (g, p) = (by_doc(gold), by_doc(pred));
    let ids: BTreeSet<&str> = g.keys().chain(p.keys()).copied().collect();
    let (mut overlap, mut n_pred, mut n_gold) = (0, 0, 0);
    for id in ids {
        let gm = merge(g.get(id).cloned().unwrap_or_default());
        let pm = merge(p.get(id).cloned().unwrap_or_default());
        overlap += intersection_len(&gm, &pm);
        n_pred += total_len(&pm);
        n_gold += total_len(&gm);
    }
    (overlap, n_pred, n_gold)
}

/// Character-level precision, recall and F1 of predicted spans against gold.
/// Empty predictions score 0 on all three.
pub fn char_span_prf(gold: &[CharSpan], pred: &[CharSpan]) -> Prf {
    let (overlap, n_pred, n_gold) = char_overlap_counts(gold, pred);
    Prf::from_counts(overlap, n_pred, n_gold)
}
