//! Averaged-perceptron part-of-speech tagger.
//!
//! Greedy left-to-right decoding over a Penn-Treebank-style tagset. A small
//! hand-tagged English corpus ships with the crate so a working model can be
//! trained offline with [`bundled_model`].

mod perceptron;

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{Document, Token};

pub use perceptron::AveragedPerceptron;

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("tag {0:?} is not in the tagset")]
    UnknownTag(String),
    #[error("line {line}: malformed tagged token {token:?}")]
    MalformedCorpus { line: usize, token: String },
    #[error("model has not been trained")]
    UntrainedModel,
    #[error("corrupt model: {0}")]
    CorruptModel(String),
}

/// Penn Treebank tags, in tie-breaking order.
pub const PENN_TAGS: &[&str] = &[
    "NN", "NNS", "NNP", "NNPS", "DT", "IN", "JJ", "JJR", "JJS", "VB", "VBD", "VBG", "VBN", "VBP",
    "VBZ", "RB", "RBR", "RBS", "PRP", "PRP$", "CC", "CD", "MD", "TO", "WDT", "WP", "WP$", "WRB",
    "EX", "PDT", "POS", "RP", "UH", "FW", "LS", "SYM", ".", ",", ":", "``", "''", "-LRB-", "-RRB-",
    "$", "#",
];

/// Ordered tag inventory. Order breaks scoring ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tagset {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl Tagset {
    pub fn new<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = Tagset {
            tags: Vec::new(),
            index: HashMap::new(),
        };
        for t in tags {
            let t = t.into();
            if !out.index.contains_key(&t) {
                out.index.insert(t.clone(), out.tags.len());
                out.tags.push(t);
            }
        }
        out
    }

    pub fn penn() -> Self {
        Tagset::new(PENN_TAGS.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn tag(&self, i: usize) -> &str {
        &self.tags[i]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }
}

impl Default for Tagset {
    fn default() -> Self {
        Tagset::penn()
    }
}

/// A training sentence: parallel word and tag lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub words: Vec<String>,
    pub tags: Vec<String>,
}

impl TaggedSentence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Parse the tagged-corpus text format: one sentence per line, tokens
/// written `word_TAG` and separated by spaces. The tag follows the last `_`.
pub fn parse_tagged_corpus(text: &str) -> Result<Vec<TaggedSentence>, TaggerError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut sent = TaggedSentence {
            words: Vec::new(),
            tags: Vec::new(),
        };
        for tok in line.split_whitespace() {
            match tok.rsplit_once('_') {
                Some((w, t)) if !w.is_empty() && !t.is_empty() => {
                    sent.words.push(w.to_string());
                    sent.tags.push(t.to_string());
                }
                _ => {
                    return Err(TaggerError::MalformedCorpus {
                        line: i + 1,
                        token: tok.to_string(),
                    })
                }
            }
        }
        out.push(sent);
    }
    Ok(out)
}

/// Write sentences in the tagged-corpus text format.
pub fn format_tagged_corpus(sentences: &[TaggedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        let line: Vec<String> = s
            .words
            .iter()
            .zip(&s.tags)
            .map(|(w, t)| format!("{w}_{t}"))
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

const START: &str = "-START-";
const START2: &str = "-START2-";
const END: &str = "-END-";

fn is_number(word: &str) -> bool {
    word.chars().any(char::is_numeric) && word.chars().all(|c| c.is_numeric() || c == '.')
}

fn normalize(word: &str) -> String {
    if is_number(word) {
        "<num>".to_string()
    } else {
        word.to_lowercase()
    }
}

fn suffix(word: &str, n: usize) -> &str {
    let start = word
        .char_indices()
        .rev()
        .nth(n.saturating_sub(1))
        .map_or(0, |(b, _)| b);
    &word[start..]
}

/// Feature strings for position `i` given the two previously assigned tags.
///
/// Features: bias, lowercase word, suffixes of length 1 to 3, previous tag,
/// previous two tags, previous and next word, capitalization and digit shape.
pub fn features<S: AsRef<str>>(words: &[S], i: usize, prev: &str, prev2: &str) -> Vec<String> {
    let word = words[i].as_ref();
    let lower = normalize(word);
    let prev_word = if i == 0 {
        START.to_string()
    } else {
        normalize(words[i - 1].as_ref())
    };
    let next_word = words
        .get(i + 1)
        .map_or_else(|| END.to_string(), |w| normalize(w.as_ref()));
    let mut f = vec![
        "bias".to_string(),
        format!("w={lower}"),
        format!("s1={}", suffix(&lower, 1)),
        format!("s2={}", suffix(&lower, 2)),
        format!("s3={}", suffix(&lower, 3)),
        format!("t-1={prev}"),
        format!("t-2,t-1={prev2} {prev}"),
        format!("w-1={prev_word}"),
        format!("w+1={next_word}"),
    ];
    if word.chars().next().is_some_and(char::is_uppercase) {
        f.push("cap".to_string());
    }
    if is_number(word) {
        f.push("digit".to_string());
    }
    f
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub tagset: Tagset,
    /// Minimum frequency for a single-tag word to enter the lookup cache.
    pub cache_min_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 8,
            seed: 0,
            tagset: Tagset::penn(),
            cache_min_count: 20,
        }
    }
}

/// A tag assigned to one token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub token: Token,
    pub tag: String,
}

/// Trained tagger: averaged weights plus an unambiguous-word cache.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    tagset: Tagset,
    weights: HashMap<String, Vec<(usize, f64)>>,
    cache: HashMap<String, usize>,
}

fn build_cache(
    corpus: &[TaggedSentence],
    tagset: &Tagset,
    min_count: usize,
) -> Result<HashMap<String, usize>, TaggerError> {
    let mut counts: HashMap<&str, BTreeMap<usize, usize>> = HashMap::new();
    for s in corpus {
        for (w, t) in s.words.iter().zip(&s.tags) {
            let tag = tagset
                .index_of(t)
                .ok_or_else(|| TaggerError::UnknownTag(t.clone()))?;
            *counts.entry(w).or_default().entry(tag).or_insert(0) += 1;
        }
    }
    Ok(counts
        .into_iter()
        .filter_map(|(w, tags)| {
            let total: usize = tags.values().sum();
            (tags.len() == 1 && total >= min_count)
                .then(|| (w.to_string(), *tags.keys().next().unwrap()))
        })
        .collect())
}

/// Train a tagger. Sentence order is shuffled every epoch by a generator
/// seeded from `config.seed`, so identical inputs give identical models.
pub fn train(corpus: &[TaggedSentence], config: &TrainConfig) -> Result<TaggerModel, TaggerError> {
    if corpus.iter().all(TaggedSentence::is_empty) {
        return Err(TaggerError::EmptyCorpus);
    }
    let tagset = &config.tagset;
    let cache = build_cache(corpus, tagset, config.cache_min_count)?;
    let gold: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.tags.iter().map(|t| tagset.index_of(t).unwrap()).collect())
        .collect();

    let mut perceptron = AveragedPerceptron::new(tagset.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &si in &order {
            let sent = &corpus[si];
            let (mut prev, mut prev2) = (START.to_string(), START2.to_string());
            for (i, word) in sent.words.iter().enumerate() {
                let guess = match cache.get(word) {
                    Some(&t) => t,
                    None => {
                        let feats = features(&sent.words, i, &prev, &prev2);
                        let guess = perceptron.predict(&feats);
                        perceptron.update(gold[si][i], guess, &feats);
                        guess
                    }
                };
                prev2 = std::mem::replace(&mut prev, tagset.tag(guess).to_string());
            }
        }
    }
    Ok(TaggerModel {
        tagset: tagset.clone(),
        weights: perceptron.averaged(),
        cache,
    })
}

impl TaggerModel {
    /// A model with no weights; tagging with it fails.
    pub fn untrained(tagset: Tagset) -> Self {
        TaggerModel {
            tagset,
            weights: HashMap::new(),
            cache: HashMap::new(),
        }
    }

    pub fn is_trained(&self) -> bool {
        !self.weights.is_empty() || !self.cache.is_empty()
    }

    pub fn tagset(&self) -> &Tagset {
        &self.tagset
    }

    /// Averaged weight of a feature for a tag.
    pub fn weight(&self, feature: &str, tag: &str) -> f64 {
        let Some(t) = self.tagset.index_of(tag) else {
            return 0.0;
        };
        self.weights
            .get(feature)
            .and_then(|row| row.iter().find(|(c, _)| *c == t))
            .map_or(0.0, |&(_, w)| w)
    }

    /// Tag looked up in the unambiguous-word cache.
    pub fn cached_tag(&self, word: &str) -> Option<&str> {
        self.cache.get(word).map(|&t| self.tagset.tag(t))
    }

    fn predict(&self, feats: &[String]) -> usize {
        let mut scores = vec![0.0; self.tagset.len()];
        for f in feats {
            if let Some(row) = self.weights.get(f) {
                for &(c, w) in row {
                    scores[c] += w;
                }
            }
        }
        perceptron::argmax(&scores)
    }

    /// Tag a word sequence greedily left to right.
    pub fn tag_words<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<String>, TaggerError> {
        if !self.is_trained() {
            return Err(TaggerError::UntrainedModel);
        }
        let (mut prev, mut prev2) = (START.to_string(), START2.to_string());
        let mut out = Vec::with_capacity(words.len());
        for i in 0..words.len() {
            let t = match self.cache.get(words[i].as_ref()) {
                Some(&t) => t,
                None => self.predict(&features(words, i, &prev, &prev2)),
            };
            let tag = self.tagset.tag(t).to_string();
            prev2 = std::mem::replace(&mut prev, tag.clone());
            out.push(tag);
        }
        Ok(out)
    }

    /// Tag one sentence of tokens.
    pub fn tag(&self, sentence: &[Token]) -> Result<Vec<TaggedToken>, TaggerError> {
        let words: Vec<&str> = sentence.iter().map(|t| t.surface.as_str()).collect();
        let tags = self.tag_words(&words)?;
        Ok(sentence
            .iter()
            .cloned()
            .zip(tags)
            .map(|(token, tag)| TaggedToken { token, tag })
            .collect())
    }

    /// Tag every sentence of a document, in token order.
    pub fn tag_document(&self, doc: &Document) -> Result<Vec<TaggedToken>, TaggerError> {
        let mut out = Vec::with_capacity(doc.tokens.len());
        for s in &doc.sentences {
            out.extend(self.tag(doc.sentence_tokens(s))?);
        }
        Ok(out)
    }

    /// Token-level accuracy against gold sentences.
    pub fn accuracy(&self, gold: &[TaggedSentence]) -> Result<f64, TaggerError> {
        let (mut right, mut total) = (0usize, 0usize);
        for s in gold {
            let predicted = self.tag_words(&s.words)?;
            right += predicted.iter().zip(&s.tags).filter(|(p, g)| p == g).count();
            total += s.len();
        }
        Ok(if total == 0 { 0.0 } else { right as f64 / total as f64 })
    }
}

const MAGIC_PREFIX: &[u8] = b"SSTAG";
const VERSION: u8 = b'1';

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TaggerError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| TaggerError::CorruptModel(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, TaggerError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u16(&mut self) -> Result<u16, TaggerError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, TaggerError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, TaggerError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| TaggerError::CorruptModel("invalid UTF-8 string".into()))
    }
}

impl TaggerModel {
    /// Serialize to the versioned binary format (magic `SSTAG1`). Output is
    /// byte-identical for identical models.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC_PREFIX);
        buf.push(VERSION);
        buf.extend_from_slice(&(self.tagset.len() as u32).to_le_bytes());
        for t in self.tagset.tags() {
            put_str(&mut buf, t);
        }
        let cache: BTreeMap<&String, &usize> = self.cache.iter().collect();
        buf.extend_from_slice(&(cache.len() as u32).to_le_bytes());
        for (w, &t) in cache {
            put_str(&mut buf, w);
            buf.extend_from_slice(&(t as u16).to_le_bytes());
        }
        let weights: BTreeMap<&String, &Vec<(usize, f64)>> = self.weights.iter().collect();
        buf.extend_from_slice(&(weights.len() as u32).to_le_bytes());
        for (f, row) in weights {
            put_str(&mut buf, f);
            buf.extend_from_slice(&(row.len() as u32).to_le_bytes());
            for &(c, w) in row {
                buf.extend_from_slice(&(c as u16).to_le_bytes());
                buf.extend_from_slice(&w.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TaggerError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r
            .take(MAGIC_PREFIX.len() + 1)
            .map_err(|_| TaggerError::CorruptModel("missing magic".into()))?;
        if &magic[..MAGIC_PREFIX.len()] != MAGIC_PREFIX {
            return Err(TaggerError::CorruptModel("bad magic".into()));
        }
        if magic[MAGIC_PREFIX.len()] != VERSION {
            return Err(TaggerError::CorruptModel(format!(
                "unsupported model version {:?} (expected {:?})",
                magic[MAGIC_PREFIX.len()] as char,
                VERSION as char
            )));
        }
        let n_tags = r.u32()? as usize;
        let tags = (0..n_tags).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
        let tagset = Tagset::new(tags);
        if tagset.len() != n_tags {
            return Err(TaggerError::CorruptModel("duplicate tags".into()));
        }
        let check = |t: u16| -> Result<usize, TaggerError> {
            let t = t as usize;
            if t < n_tags {
                Ok(t)
            } else {
                Err(TaggerError::CorruptModel(format!("tag index {t} out of range")))
            }
        };
        let n_cache = r.u32()? as usize;
        let mut cache = HashMap::new();
        for _ in 0..n_cache {
            let w = r.string()?;
            let t = check(r.u16()?)?;
            cache.insert(w, t);
        }
        let n_feat = r.u32()? as usize;
        let mut weights = HashMap::new();
        for _ in 0..n_feat {
            let f = r.string()?;
            let n = r.u32()? as usize;
            let mut row = Vec::with_capacity(n.min(n_tags));
            for _ in 0..n {
                let c = check(r.u16()?)?;
                let w = r.f64()?;
                if !w.is_finite() {
                    return Err(TaggerError::CorruptModel("non-finite weight".into()));
                }
                row.push((c, w));
            }
            weights.insert(f, row);
        }
        if r.pos != bytes.len() {
            return Err(TaggerError::CorruptModel("trailing bytes".into()));
        }
        Ok(TaggerModel {
            tagset,
            weights,
            cache,
        })
    }
}

const BUNDLED: &str = include_str!("../../data/minicorpus.tagged");

/// The hand-tagged English corpus shipped with the crate.
pub fn bundled_corpus() -> Vec<TaggedSentence> {
    parse_tagged_corpus(BUNDLED).expect("bundled corpus is well formed")
}

/// Deterministic split of the bundled corpus: every tenth sentence is held out.
pub fn bundled_split() -> (Vec<TaggedSentence>, Vec<TaggedSentence>) {
    let (mut train, mut held_out) = (Vec::new(), Vec::new());
    for (i, s) in bundled_corpus().into_iter().enumerate() {
        if i % 10 == 9 {
            held_out.push(s);
        } else {
            train.push(s);
        }
    }
    (train, held_out)
}

/// Model trained on the whole bundled corpus with default settings.
pub fn bundled_model(seed: u64) -> TaggerModel {
    let config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    train(&bundled_corpus(), &config).expect("bundled corpus trains")
}
