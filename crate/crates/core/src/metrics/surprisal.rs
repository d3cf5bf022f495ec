use std::collections::HashMap;
use std::io::BufRead;

use crate::corpus::{Document, SentenceSplitter, tokenize};

use super::MetricsError;

/// Per-token surprisal (negative log probability in nats) for a document.
///
/// Implementations must return finite, non-negative values and be safe to
/// call from several threads at once.
pub trait TokenScorer: Send + Sync {
    fn score(&self, doc: &Document) -> Result<Vec<f64>, MetricsError>;
}

/// Assigns every word the same probability `1 / vocab_size`.
#[derive(Debug, Clone, Copy)]
pub struct UniformScorer {
    pub vocab_size: usize,
}

impl TokenScorer for UniformScorer {
    fn score(&self, doc: &Document) -> Result<Vec<f64>, MetricsError> {
        if self.vocab_size == 0 {
            return Err(MetricsError::Scorer("vocabulary size must be positive".into()));
        }
        Ok(vec![(self.vocab_size as f64).ln(); doc.n_words()])
    }
}

const BOS: u32 = 0;
const EOS: u32 = 1;
const UNK: u32 = 2;

const L3: f64 = 0.7;
const L2: f64 = 0.2;
const L1: f64 = 0.1;
const FLOOR: f64 = 0.01;

/// Interpolated trigram language model over lowercased words.
///
/// `P(w | u v) = 0.7 P3 + 0.2 P2 + 0.1 P1`, with an add-0.01 unigram
/// estimate over the training vocabulary plus `</s>` and `<unk>`. When a
/// context was never seen, its weight moves to the next lower order.
#[derive(Debug, Clone)]
pub struct TrigramScorer {
    vocab: HashMap<String, u32>,
    unigram: Vec<u64>,
    bigram: HashMap<(u32, u32), u64>,
    bigram_ctx: HashMap<u32, u64>,
    trigram: HashMap<(u32, u32, u32), u64>,
    trigram_ctx: HashMap<(u32, u32), u64>,
    total: u64,
}

impl TrigramScorer {
    /// Train on sentences given as word lists.
    pub fn train<I, W, S>(sentences: I) -> Self
    where
        I: IntoIterator<Item = W>,
        W: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut m = TrigramScorer {
            vocab: HashMap::new(),
            unigram: vec![0; 3],
            bigram: HashMap::new(),
            bigram_ctx: HashMap::new(),
            trigram: HashMap::new(),
            trigram_ctx: HashMap::new(),
            total: 0,
        };
        m.vocab.insert("<s>".into(), BOS);
        m.vocab.insert("</s>".into(), EOS);
        m.vocab.insert("<unk>".into(), UNK);
        for sentence in sentences {
            let mut ids = Vec::new();
            for w in sentence {
                let w = w.as_ref().to_lowercase();
                let next = m.vocab.len() as u32;
                let id = *m.vocab.entry(w).or_insert(next);
                if id as usize == m.unigram.len() {
                    m.unigram.push(0);
                }
                ids.push(id);
            }
            if ids.is_empty() {
                continue;
            }
            ids.push(EOS);
            let (mut u, mut v) = (BOS, BOS);
            for &w in &ids {
                m.unigram[w as usize] += 1;
                m.total += 1;
                *m.bigram.entry((v, w)).or_default() += 1;
                *m.bigram_ctx.entry(v).or_default() += 1;
                *m.trigram.entry((u, v, w)).or_default() += 1;
                *m.trigram_ctx.entry((u, v)).or_default() += 1;
                u = v;
                v = w;
            }
        }
        m
    }

    /// Train on plain text, tokenized and split into sentences.
    pub fn from_text(text: &str) -> Self {
        let tokens = tokenize(text);
        let sentences = SentenceSplitter::default().split(&tokens);
        Self::train(sentences.iter().map(|s| {
            tokens[s.start..s.end]
                .iter()
                .filter(|t| t.is_countable())
                .map(|t| t.surface.as_str())
        }))
    }

    /// Model trained on the words of the bundled tagged corpus.
    pub fn bundled() -> Self {
        let corpus = crate::tagger::bundled_corpus();
        Self::train(corpus.iter().map(|s| {
            s.words
                .iter()
                .filter(|w| tokenize(w).first().is_some_and(|t| t.is_countable()))
        }))
    }

    /// Number of predictable types: training words plus `</s>` and `<unk>`.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() - 1
    }

    fn id(&self, word: &str) -> u32 {
        let id = *self.vocab.get(&word.to_lowercase()).unwrap_or(&UNK);
        if id == BOS {
            UNK
        } else {
            id
        }
    }

    fn prob_ids(&self, u: u32, v: u32, w: u32) -> f64 {
        let v_size = self.vocab_size() as f64;
        let p1 = (self.unigram[w as usize] as f64 + FLOOR) / (self.total as f64 + FLOOR * v_size);
        let Some(&c2) = self.bigram_ctx.get(&v) else {
            return p1;
        };
        let p2 = *self.bigram.get(&(v, w)).unwrap_or(&0) as f64 / c2 as f64;
        let Some(&c3) = self.trigram_ctx.get(&(u, v)) else {
            return (L3 + L2) * p2 + L1 * p1;
        };
        let p3 = *self.trigram.get(&(u, v, w)).unwrap_or(&0) as f64 / c3 as f64;
        L3 * p3 + L2 * p2 + L1 * p1
    }

    /// `P(w | u v)`. Pass `None` for a sentence-start context; `w = None`
    /// stands for the end of the sentence.
    pub fn prob(&self, u: Option<&str>, v: Option<&str>, w: Option<&str>) -> f64 {
        let ctx = |x: Option<&str>| x.map_or(BOS, |s| self.id(s));
        self.prob_ids(ctx(u), ctx(v), w.map_or(EOS, |s| self.id(s)))
    }

    /// Surprisal of each word in one sentence.
    pub fn score_words<S: AsRef<str>>(&self, words: &[S]) -> Vec<f64> {
        let (mut u, mut v) = (BOS, BOS);
        words
            .iter()
            .map(|w| {
                let id = self.id(w.as_ref());
                let s = -self.prob_ids(u, v, id).ln();
                u = v;
                v = id;
                s
            })
            .collect()
    }
}

impl TokenScorer for TrigramScorer {
    fn score(&self, doc: &Document) -> Result<Vec<f64>, MetricsError> {
        let mut out = Vec::with_capacity(doc.tokens.len());
        for s in &doc.sentences {
            let words: Vec<&str> = doc
                .sentence_tokens(s)
                .iter()
                .filter(|t| t.is_countable())
                .map(|t| t.surface.as_str())
                .collect();
            out.extend(self.score_words(&words));
        }
        Ok(out)
    }
}

/// Precomputed per-token scores, keyed by document id.
///
/// File format: one line per document, `doc_id<TAB>s1 s2 s3 ...`. Scores may
/// come from any tokenizer, so their count need not match the word count.
#[derive(Debug, Clone, Default)]
pub struct ExternalScorer {
    scores: HashMap<String, Vec<f64>>,
}

impl ExternalScorer {
    pub fn load<R: BufRead>(reader: R) -> Result<Self, MetricsError> {
        let mut scores = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| MetricsError::Scorer(format!("line {}: {msg}", i + 1));
            let (id, rest) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected doc_id<TAB>scores".into()))?;
            let values = rest
                .split_whitespace()
                .map(|v| match v.parse::<f64>() {
                    Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
                    _ => Err(bad(format!("invalid score {v:?}"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if scores.insert(id.to_string(), values).is_some() {
                return Err(bad(format!("duplicate document {id:?}")));
            }
        }
        Ok(ExternalScorer { scores })
    }

    pub fn insert(&mut self, doc_id: impl Into<String>, scores: Vec<f64>) {
        self.scores.insert(doc_id.into(), scores);
    }
}

impl TokenScorer for ExternalScorer {
    fn score(&self, doc: &Document) -> Result<Vec<f64>, MetricsError> {
        self.scores
            .get(&doc.id)
            .cloned()
            .ok_or_else(|| MetricsError::MissingScores(doc.id.clone()))
    }
}

/// Mean surprisal and its coefficient of variation (population std / mean).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurprisalStats {
    pub mean: f64,
    pub cv: f64,
}

pub fn surprisal_stats(scorer: &dyn TokenScorer, doc: &Document) -> Result<SurprisalStats, MetricsError> {
    let n_words = doc.n_words();
    if n_words < 2 {
        return Err(MetricsError::TooShort(n_words));
    }
    let scores = scorer.score(doc)?;
    stats_of(&scores)
}

pub(crate) fn stats_of(scores: &[f64]) -> Result<SurprisalStats, MetricsError> {
    if scores.len() < 2 {
        return Err(MetricsError::TooShort(scores.len()));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(MetricsError::Scorer(format!("invalid surprisal {bad}")));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(MetricsError::ZeroMean);
    }
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    Ok(SurprisalStats {
        mean,
        cv: var.sqrt() / mean,
    })
}
