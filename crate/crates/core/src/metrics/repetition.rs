use std::collections::HashMap;
use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::Compression;

use super::MetricsError;

/// Raw size over DEFLATE size of the lowercased units joined by single spaces.
///
/// Higher values mean more repetitive input. Uses raw DEFLATE (no zlib or
/// gzip framing) at level 6.
pub fn compression_ratio<S: AsRef<str>>(units: &[S]) -> Result<f64, MetricsError> {
    if units.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let joined = units
        .iter()
        .map(|u| u.as_ref().to_lowercase())
        .collect::<Vec<_>>()
        .join(" ");
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::new(6));
    enc.write_all(joined.as_bytes())?;
    let compressed = enc.finish()?;
    Ok(joined.len() as f64 / compressed.len() as f64)
}

/// Document-level template settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemplateConfig {
    /// Tag n-gram length.
    pub n: usize,
    /// Minimum occurrences for an n-gram to count as a template.
    pub min_count: usize,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig { n: 4, min_count: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateStats {
    /// Distinct templates in the document.
    pub template_rate: f64,
    /// Share of tokens covered by at least one template occurrence.
    pub templates_per_token: f64,
}

/// Tag n-grams that recur at least `min_count` times within one sequence.
pub fn syntactic_templates<S: AsRef<str>>(
    tags: &[S],
    cfg: TemplateConfig,
) -> Result<TemplateStats, MetricsError> {
    if cfg.n < 2 || cfg.min_count < 2 {
        return Err(MetricsError::InvalidParameter(format!(
            "template n = {} and min_count = {} must both be at least 2",
            cfg.n, cfg.min_count
        )));
    }
    let none = TemplateStats {
        template_rate: 0.0,
        templates_per_token: 0.0,
    };
    if tags.len() < cfg.n {
        return Ok(none);
    }
    let tags: Vec<&str> = tags.iter().map(AsRef::as_ref).collect();
    let mut counts: HashMap<&[&str], usize> = HashMap::new();
    for gram in tags.windows(cfg.n) {
        *counts.entry(gram).or_default() += 1;
    }
    let n_templates = counts.values().filter(|&&c| c >= cfg.min_count).count();
    let mut covered = vec![false; tags.len()];
    for (i, gram) in tags.windows(cfg.n).enumerate() {
        if counts[gram] >= cfg.min_count {
            covered[i..i + cfg.n].iter_mut().for_each(|c| *c = true);
        }
    }
    let n_covered = covered.iter().filter(|&&c| c).count();
    Ok(TemplateStats {
        template_rate: n_templates as f64,
        templates_per_token: n_covered as f64 / tags.len() as f64,
    })
}
