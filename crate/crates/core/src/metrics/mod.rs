//! Automatic text metrics and per-document feature vectors.

mod lexicon;
mod readability;
mod repetition;
mod surprisal;

use std::io::Write;

use thiserror::Error;

use crate::corpus::{CollapsedCode, CorpusError, Document, SpanAnnotation};
use crate::tagger::{TaggedToken, TaggerError, TaggerModel};

pub use lexicon::{subjectivity_proportion, Strength, SubjectivityLexicon};
pub use readability::{flesch_kincaid_grade, flesch_reading_ease, gunning_fog, ReadabilityCounts};
pub use repetition::{compression_ratio, syntactic_templates, TemplateConfig, TemplateStats};
pub use surprisal::{
    surprisal_stats, ExternalScorer, SurprisalStats, TokenScorer, TrigramScorer, UniformScorer,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("document has no words")]
    EmptyDocument,
    #[error("empty input")]
    EmptyInput,
    #[error("need at least 2 scored tokens, got {0}")]
    TooShort(usize),
    #[error("mean surprisal is zero")]
    ZeroMean,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("lexicon line {line}: {msg}")]
    Lexicon { line: usize, msg: String },
    #[error("scorer: {0}")]
    Scorer(String),
    #[error("no external scores for document {0:?}")]
    MissingScores(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Word count and mean words per sentence.
pub fn verbosity(doc: &Document) -> (usize, f64) {
    let n = doc.n_words();
    let mean = if doc.sentences.is_empty() {
        0.0
    } else {
        n as f64 / doc.sentences.len() as f64
    };
    (n, mean)
}

/// Mean length of word-count tokens in chars; 0 when there are none.
pub fn mean_word_len(doc: &Document) -> f64 {
    let (chars, n) = doc
        .words()
        .fold((0, 0), |(c, n), t| (c + t.end - t.start, n + 1));
    if n == 0 {
        0.0
    } else {
        chars as f64 / n as f64
    }
}

/// Whether a tag marks a proposition-bearing word: verbs and modals,
/// adjectives, adverbs, prepositions and conjunctions.
pub fn is_proposition_tag(tag: &str) -> bool {
    tag.starts_with("VB")
        || tag == "MD"
        || tag.starts_with("JJ")
        || tag.starts_with("RB")
        || tag == "IN"
        || tag == "TO"
        || tag == "CC"
}

/// Proposition-bearing words over all word-count tokens.
pub fn idea_density(tagged: &[TaggedToken]) -> Result<f64, MetricsError> {
    let words: Vec<&TaggedToken> = tagged.iter().filter(|t| t.token.is_countable()).collect();
    if words.is_empty() {
        return Err(MetricsError::EmptyDocument);
    }
    let props = words.iter().filter(|t| is_proposition_tag(&t.tag)).count();
    Ok(props as f64 / words.len() as f64)
}

/// Spans per collapsed code, in [`CollapsedCode::ALL`] order. A span carrying
/// two collapsed codes counts once for each.
pub fn code_count_features<'a, I>(spans: I) -> [usize; 7]
where
    I: IntoIterator<Item = &'a SpanAnnotation>,
{
    let mut counts = [0; 7];
    for span in spans {
        for code in span.collapsed() {
            counts[code.index()] += 1;
        }
    }
    counts
}

/// Binary variant of [`code_count_features`]: 1 where the code occurs at all.
pub fn code_presence_features<'a, I>(spans: I) -> [usize; 7]
where
    I: IntoIterator<Item = &'a SpanAnnotation>,
{
    code_count_features(spans).map(|c| c.min(1))
}

/// Column names for code-count features.
pub fn code_feature_names() -> [&'static str; 7] {
    CollapsedCode::ALL.map(CollapsedCode::as_str)
}

/// Every automatic metric for one document.
///
/// The surprisal fields are `None` when the document has fewer than two
/// scored tokens or a zero mean.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub n_words: usize,
    pub mean_sentence_len: f64,
    pub mean_word_len: f64,
    pub fre: f64,
    pub fkgl: f64,
    pub gfi: f64,
    pub cr_words: f64,
    pub cr_pos: f64,
    pub template_rate: f64,
    pub templates_per_token: f64,
    pub subjectivity: f64,
    pub surprisal_mean: Option<f64>,
    pub surprisal_cv: Option<f64>,
    pub idea_density: f64,
}

impl FeatureVector {
    pub const FIELDS: [&'static str; 14] = [
        "n_words",
        "mean_sentence_len",
        "mean_word_len",
        "fre",
        "fkgl",
        "gfi",
        "cr_words",
        "cr_pos",
        "template_rate",
        "templates_per_token",
        "subjectivity",
        "surprisal_mean",
        "surprisal_cv",
        "idea_density",
    ];

    /// Values in [`FeatureVector::FIELDS`] order.
    pub fn values(&self) -> [Option<f64>; 14] {
        [
            Some(self.n_words as f64),
            Some(self.mean_sentence_len),
            Some(self.mean_word_len),
            Some(self.fre),
            Some(self.fkgl),
            Some(self.gfi),
            Some(self.cr_words),
            Some(self.cr_pos),
            Some(self.template_rate),
            Some(self.templates_per_token),
            Some(self.subjectivity),
            self.surprisal_mean,
            self.surprisal_cv,
            Some(self.idea_density),
        ]
    }
}

/// Shared inputs for [`feature_vector`].
pub struct MetricContext<'a> {
    pub tagger: &'a TaggerModel,
    pub scorer: &'a dyn TokenScorer,
    pub lexicon: &'a SubjectivityLexicon,
    pub templates: TemplateConfig,
}

pub fn feature_vector(doc: &Document, ctx: &MetricContext<'_>) -> Result<FeatureVector, MetricsError> {
    let counts = ReadabilityCounts::of(doc)?;
    let tagged = ctx.tagger.tag_document(doc)?;
    let (n_words, mean_sentence_len) = verbosity(doc);
    let words: Vec<&str> = doc.words().map(|t| t.surface.as_str()).collect();
    let tags: Vec<&str> = tagged.iter().map(|t| t.tag.as_str()).collect();
    let templates = syntactic_templates(&tags, ctx.templates)?;
    let surprisal = match surprisal_stats(ctx.scorer, doc) {
        Ok(s) => Some(s),
        Err(MetricsError::TooShort(_) | MetricsError::ZeroMean) => None,
        Err(e) => return Err(e),
    };
    Ok(FeatureVector {
        n_words,
        mean_sentence_len,
        mean_word_len: mean_word_len(doc),
        fre: counts.fre(),
        fkgl: counts.fkgl(),
        gfi: counts.gfi(),
        cr_words: compression_ratio(&words)?,
        cr_pos: compression_ratio(&tags)?,
        template_rate: templates.template_rate,
        templates_per_token: templates.templates_per_token,
        subjectivity: subjectivity_proportion(doc, ctx.lexicon)?,
        surprisal_mean: surprisal.map(|s| s.mean),
        surprisal_cv: surprisal.map(|s| s.cv),
        idea_density: idea_density(&tagged)?,
    })
}

/// Marker written for a missing value.
pub const MISSING: &str = "NA";

/// Write feature rows as CSV with a `doc_id` column first.
pub fn write_features_csv<W: Write>(w: W, rows: &[(String, FeatureVector)]) -> Result<(), MetricsError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["doc_id"];
    header.extend(FeatureVector::FIELDS);
    out.write_record(&header)?;
    for (id, fv) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(
            fv.values()
                .iter()
                .map(|v| v.map_or_else(|| MISSING.to_string(), |x| x.to_string())),
        );
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
