use std::collections::HashMap;
use std::io::BufRead;

use crate::corpus::{Document, TokenKind};

use super::MetricsError;

const SAMPLE: &str = include_str!("../../data/sample_lexicon.tff");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strength {
    Weak,
    Strong,
}

/// Word-level subjectivity lexicon.
///
/// Parsed from the `key=value` line format (`type=weaksubj len=1
/// word1=abandon pos1=verb ...`). Part of speech is ignored, and a word listed
/// with both strengths keeps the strong one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubjectivityLexicon {
    words: HashMap<String, Strength>,
}

impl SubjectivityLexicon {
    pub fn from_words<I, S>(words: I, strength: Strength) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = SubjectivityLexicon::default();
        for w in words {
            lex.insert(w.as_ref(), strength);
        }
        lex
    }

    fn insert(&mut self, word: &str, strength: Strength) {
        let e = self.words.entry(word.to_lowercase()).or_insert(strength);
        *e = (*e).max(strength);
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self, MetricsError> {
        let mut lex = SubjectivityLexicon::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut kind = None;
            let mut word = None;
            for field in trimmed.split_whitespace() {
                let (key, value) = field.split_once('=').ok_or_else(|| MetricsError::Lexicon {
                    line: line_no,
                    msg: format!("field {field:?} is not key=value"),
                })?;
                match key {
                    "type" => kind = Some(value),
                    "word1" => word = Some(value),
                    _ => {}
                }
            }
            let strength = match kind {
                Some("weaksubj") => Strength::Weak,
                Some("strongsubj") => Strength::Strong,
                Some(other) => {
                    return Err(MetricsError::Lexicon {
                        line: line_no,
                        msg: format!("unknown type {other:?}"),
                    })
                }
                None => {
                    return Err(MetricsError::Lexicon {
                        line: line_no,
                        msg: "missing type=".into(),
                    })
                }
            };
            match word {
                Some(w) if !w.is_empty() => lex.insert(w, strength),
                _ => {
                    return Err(MetricsError::Lexicon {
                        line: line_no,
                        msg: "missing word1=".into(),
                    })
                }
            }
        }
        Ok(lex)
    }

    /// Small built-in lexicon of evaluative words.
    pub fn sample() -> Self {
        Self::load(SAMPLE.as_bytes()).expect("bundled lexicon parses")
    }

    pub fn get(&self, word: &str) -> Option<Strength> {
        self.words.get(&word.to_lowercase()).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.get(word).is_some()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Share of word-count tokens that are subjective words.
pub fn subjectivity_proportion(doc: &Document, lexicon: &SubjectivityLexicon) -> Result<f64, MetricsError> {
    let n = doc.n_words();
    if n == 0 {
        return Err(MetricsError::EmptyDocument);
    }
    let hits = doc
        .words()
        .filter(|t| t.kind == TokenKind::Word && lexicon.contains(&t.surface))
        .count();
    Ok(hits as f64 / n as f64)
}
