//! Rule-based tokenization and sentence segmentation.
//!
//! Offsets are Unicode scalar-value offsets into the source text, not bytes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Number,
    Punctuation,
    Symbol,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    /// Inclusive start, in chars.
    pub start: usize,
    /// Exclusive end, in chars.
    pub end: usize,
    pub kind: TokenKind,
}

impl Token {
    /// Word and number tokens; the unit every word count is based on.
    pub fn is_countable(&self) -> bool {
        matches!(self.kind, TokenKind::Word | TokenKind::Number)
    }
}

/// Half-open token index range `[start, end)` of one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub start: usize,
    pub end: usize,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}' | '\u{2010}' | '\u{2011}')
}

fn is_punctuation(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_punctuation() && !matches!(c, '$' | '+' | '<' | '=' | '>' | '^' | '`' | '|' | '~');
    }
    matches!(c,
        '\u{00A1}' | '\u{00A7}' | '\u{00AB}' | '\u{00B6}' | '\u{00B7}' | '\u{00BB}' | '\u{00BF}'
        | '\u{2010}'..='\u{2027}'
        | '\u{2030}'..='\u{205E}'
        | '\u{3001}'..='\u{3003}'
        | '\u{3008}'..='\u{3011}'
        | '\u{FF01}'..='\u{FF0F}'
    )
}

/// Split `text` into word, number, punctuation and symbol tokens.
///
/// A word is a maximal run of letters, optionally joined by single internal
/// hyphens or apostrophes (`state-of-the-art`, `don't`). A number is a run of
/// digits with at most one internal decimal point. Every other
/// non-whitespace character is its own token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if c.is_alphabetic() {
            i += 1;
            loop {
                while i < chars.len() && chars[i].is_alphabetic() {
                    i += 1;
                }
                if i + 1 < chars.len() && is_joiner(chars[i]) && chars[i + 1].is_alphabetic() {
                    i += 1;
                } else {
                    break;
                }
            }
            TokenKind::Word
        } else if c.is_numeric() {
            while i < chars.len() && chars[i].is_numeric() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_numeric() {
                i += 1;
                while i < chars.len() && chars[i].is_numeric() {
                    i += 1;
                }
            }
            TokenKind::Number
        } else {
            i += 1;
            if is_punctuation(c) {
                TokenKind::Punctuation
            } else {
                TokenKind::Symbol
            }
        };
        tokens.push(Token {
            surface: chars[start..i].iter().collect(),
            start,
            end: i,
            kind,
        });
    }
    tokens
}

/// Abbreviations whose periods never end a sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "St.", "vs.", "etc.", "e.g.", "i.e.", "U.S.",
];

fn is_terminator(t: &Token) -> bool {
    matches!(t.surface.as_str(), "." | "!" | "?")
}

fn is_closer(t: &Token) -> bool {
    matches!(
        t.surface.as_str(),
        "\"" | "'" | ")" | "]" | "}" | "\u{201D}" | "\u{2019}" | "\u{00BB}"
    )
}

/// Sentence splitter with a configurable abbreviation list.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    // Each abbreviation pre-split into its token surfaces, lowercased.
    patterns: Vec<Vec<String>>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        SentenceSplitter::new(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl SentenceSplitter {
    pub fn new<'a, I: IntoIterator<Item = &'a str>>(abbreviations: I) -> Self {
        let patterns = abbreviations
            .into_iter()
            .map(|a| {
                tokenize(a)
                    .into_iter()
                    .map(|t| t.surface.to_lowercase())
                    .collect::<Vec<_>>()
            })
            .filter(|p| !p.is_empty())
            .collect();
        SentenceSplitter { patterns }
    }

    /// Indices of period tokens that belong to an abbreviation.
    fn abbreviation_periods(&self, tokens: &[Token]) -> Vec<bool> {
        let mut suppressed = vec![false; tokens.len()];
        for start in 0..tokens.len() {
            if tokens[start].kind != TokenKind::Word {
                continue;
            }
            // must not be glued to a preceding word (e.g. "ee.g.")
            if start > 0 && tokens[start - 1].end == tokens[start].start && tokens[start - 1].is_countable() {
                continue;
            }
            for pattern in &self.patterns {
                let end = start + pattern.len();
                if end > tokens.len() {
                    continue;
                }
                let window = &tokens[start..end];
                let adjacent = window.windows(2).all(|w| w[0].end == w[1].start);
                let matches = adjacent
                    && window
                        .iter()
                        .zip(pattern)
                        .all(|(t, p)| t.surface.to_lowercase() == *p);
                if matches {
                    for (k, t) in window.iter().enumerate() {
                        if t.surface == "." {
                            suppressed[start + k] = true;
                        }
                    }
                }
            }
        }
        suppressed
    }

    /// Partition `tokens` into sentences.
    ///
    /// A sentence ends after a run of `.`, `!` or `?` (plus any closing quotes
    /// or brackets that immediately follow it). Periods inside a known
    /// abbreviation do not end a sentence. Trailing tokens without a
    /// terminator form a final sentence.
    pub fn split(&self, tokens: &[Token]) -> Vec<Sentence> {
        let suppressed = self.abbreviation_periods(tokens);
        let mut sentences = Vec::new();
        let mut start = 0;
        let mut i = 0;
        while i < tokens.len() {
            if is_terminator(&tokens[i]) && !suppressed[i] {
                let mut end = i + 1;
                while end < tokens.len() && is_terminator(&tokens[end]) {
                    end += 1;
                }
                while end < tokens.len() && is_closer(&tokens[end]) {
                    end += 1;
                }
                sentences.push(Sentence { start, end });
                start = end;
                i = end;
            } else {
                i += 1;
            }
        }
        if start < tokens.len() {
            sentences.push(Sentence {
                start,
                end: tokens.len(),
            });
        }
        sentences
    }
}

/// Split with the built-in abbreviation list.
pub fn split_sentences(tokens: &[Token]) -> Vec<Sentence> {
    SentenceSplitter::default().split(tokens)
}
