use super::{Result, SlopModelError};

/// One point of a precision-recall curve, at `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

fn check(scores: &[f64], labels: &[bool]) -> Result<usize> {
    if scores.len() != labels.len() {
        return Err(SlopModelError::Shape(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(SlopModelError::InvalidScore(i));
    }
    let pos = labels.iter().filter(|&&y| y).count();
    if pos == 0 || pos == labels.len() {
        return Err(SlopModelError::SingleClass);
    }
    Ok(pos)
}

/// Points at every distinct score, from highest to lowest threshold. Tied
/// scores enter together.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>> {
    let pos = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(PrPoint {
            threshold: t,
            recall: tp as f64 / pos as f64,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    Ok(out)
}

/// Average precision: sum over recall steps of the step size times the
/// precision at that threshold.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let curve = pr_curve(scores, labels)?;
    let mut prev = 0.0;
    let mut ap = 0.0;
    for p in curve {
        ap += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    Ok(ap)
}
