//! Documents, tokens, taxonomy codes and annotation ingestion.
//!
//! Corpus and annotation files are newline-delimited JSON. The first
//! non-blank line of either file is the schema header
//! `{"schema":"slopscope/1"}`.

mod syllables;
mod taxonomy;
mod tokenize;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use syllables::count_syllables;
pub use taxonomy::{collapse, CollapsedCode, GranularCode, Theme};
pub use tokenize::{
    split_sentences, tokenize, Sentence, SentenceSplitter, Token, TokenKind, DEFAULT_ABBREVIATIONS,
};

/// Schema tag carried by every corpus and annotation file.
pub const SCHEMA: &str = "slopscope/1";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: schema error: {msg}")]
    SchemaError { line: usize, msg: String },
    #[error("line {line}: span [{start}, {end}) invalid for document {doc_id:?} of length {len}")]
    OffsetError {
        line: usize,
        doc_id: String,
        start: i64,
        end: i64,
        len: usize,
    },
    #[error("line {line}: unknown taxonomy code {code:?}")]
    UnknownCode { line: usize, code: String },
    #[error("line {line}: unknown document {doc_id:?}")]
    UnknownDocument { line: usize, doc_id: String },
    #[error("not a word token: {0:?}")]
    InvalidWord(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn schema_err(line: usize, msg: impl Into<String>) -> CorpusError {
    CorpusError::SchemaError {
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    News,
    Qa,
    Other,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::News => "news",
            Domain::Qa => "qa",
            Domain::Other => "other",
        }
    }
}

/// A unit of text with its tokens and sentences.
#[derive(Debug, Clone)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub domain: Domain,
    /// Producing model, or `"human"`.
    pub source: Option<String>,
    /// Query context for QA documents.
    pub query: Option<String>,
    pub tokens: Vec<Token>,
    pub sentences: Vec<Sentence>,
    // byte offset of every char, plus text.len() at the end
    char_bytes: Vec<usize>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, domain: Domain) -> Self {
        Self::with_splitter(id, text, domain, &SentenceSplitter::default())
    }

    pub fn with_splitter(
        id: impl Into<String>,
        text: impl Into<String>,
        domain: Domain,
        splitter: &SentenceSplitter,
    ) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        let sentences = splitter.split(&tokens);
        let mut char_bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        char_bytes.push(text.len());
        Document {
            id: id.into(),
            text,
            domain,
            source: None,
            query: None,
            tokens,
            sentences,
            char_bytes,
        }
    }

    pub fn source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn query(mut self, query: impl Into<String>) -> Self {
        self.query = Some(query.into());
        self
    }

    /// Length of the text in chars.
    pub fn char_len(&self) -> usize {
        self.char_bytes.len() - 1
    }

    /// Text in the char range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> &str {
        &self.text[self.char_bytes[start]..self.char_bytes[end]]
    }

    /// Char offset of a byte offset that falls on a char boundary.
    pub fn char_offset(&self, byte: usize) -> usize {
        self.char_bytes.partition_point(|&b| b < byte)
    }

    /// Word and number tokens.
    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.is_countable())
    }

    pub fn n_words(&self) -> usize {
        self.words().count()
    }

    pub fn sentence_tokens(&self, s: &Sentence) -> &[Token] {
        &self.tokens[s.start..s.end]
    }
}

/// A collection of documents keyed and ordered by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: BTreeMap<String, Document>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a document; fails if the id is already present.
    pub fn insert(&mut self, doc: Document) -> Result<(), CorpusError> {
        if self.docs.contains_key(&doc.id) {
            return Err(schema_err(0, format!("duplicate document id {:?}", doc.id)));
        }
        self.docs.insert(doc.id.clone(), doc);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.docs.get(id)
    }

    /// Documents in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Document> {
        self.docs.values()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }
}

impl FromIterator<Document> for Corpus {
    fn from_iter<I: IntoIterator<Item = Document>>(iter: I) -> Self {
        Corpus {
            docs: iter.into_iter().map(|d| (d.id.clone(), d)).collect(),
        }
    }
}

/// An annotator-attributed char span carrying one or more granular codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanAnnotation {
    pub doc_id: String,
    pub annotator_id: String,
    pub start: usize,
    pub end: usize,
    pub codes: BTreeSet<GranularCode>,
}

impl SpanAnnotation {
    pub fn collapsed(&self) -> BTreeSet<CollapsedCode> {
        collapse(&self.codes)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Collapsed code set of one annotation.
pub fn collapse_codes(ann: &SpanAnnotation) -> BTreeSet<CollapsedCode> {
    ann.collapsed()
}

/// Whole-document slop judgment by one annotator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentJudgment {
    pub doc_id: String,
    pub annotator_id: String,
    pub is_slop: bool,
}

/// Validated contents of an annotation file.
#[derive(Debug, Clone, Default)]
pub struct Annotations {
    pub spans: Vec<SpanAnnotation>,
    pub judgments: Vec<DocumentJudgment>,
}

impl Annotations {
    /// Annotator ids in sorted order.
    pub fn annotators(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self
            .spans
            .iter()
            .map(|s| s.annotator_id.as_str())
            .chain(self.judgments.iter().map(|j| j.annotator_id.as_str()))
            .collect();
        ids.into_iter().map(String::from).collect()
    }

    pub fn spans_for<'a>(
        &'a self,
        doc_id: &'a str,
        annotator_id: &'a str,
    ) -> impl Iterator<Item = &'a SpanAnnotation> + 'a {
        self.spans
            .iter()
            .filter(move |s| s.doc_id == doc_id && s.annotator_id == annotator_id)
    }

    pub fn judgment(&self, doc_id: &str, annotator_id: &str) -> Option<bool> {
        self.judgments
            .iter()
            .find(|j| j.doc_id == doc_id && j.annotator_id == annotator_id)
            .map(|j| j.is_slop)
    }

    /// Per-document majority vote over judgments. A tie counts as slop.
    pub fn majority_labels(&self) -> BTreeMap<String, bool> {
        let mut votes: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for j in &self.judgments {
            let v = votes.entry(&j.doc_id).or_default();
            if j.is_slop {
                v.0 += 1;
            } else {
                v.1 += 1;
            }
        }
        votes
            .into_iter()
            .map(|(id, (yes, no))| (id.to_string(), yes >= no))
            .collect()
    }

    /// Ids of documents with at least one span or judgment.
    pub fn documents(&self) -> BTreeSet<String> {
        self.spans
            .iter()
            .map(|s| s.doc_id.clone())
            .chain(self.judgments.iter().map(|j| j.doc_id.clone()))
            .collect()
    }
}

#[derive(Deserialize)]
struct Header {
    schema: String,
}

fn check_header(line_no: usize, line: &str) -> Result<(), CorpusError> {
    let header: Header = serde_json::from_str(line)
        .map_err(|e| schema_err(line_no, format!("expected schema header: {e}")))?;
    if header.schema != SCHEMA {
        return Err(schema_err(
            line_no,
            format!("unsupported schema {:?} (expected {SCHEMA:?})", header.schema),
        ));
    }
    Ok(())
}

/// Iterate over the non-blank record lines after a valid header.
fn records<R: BufRead>(
    reader: R,
) -> impl Iterator<Item = Result<(usize, String), CorpusError>> {
    let mut seen_header = false;
    reader
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| {
            let line_no = i + 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            if line.trim().is_empty() {
                return None;
            }
            if !seen_header {
                seen_header = true;
                return match check_header(line_no, &line) {
                    Ok(()) => None,
                    Err(e) => Some(Err(e)),
                };
            }
            Some(Ok((line_no, line)))
        })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    id: String,
    text: String,
    domain: Domain,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    query: Option<String>,
}

/// Read a document corpus file.
pub fn load_documents<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    load_documents_with(reader, &SentenceSplitter::default())
}

pub fn load_documents_with<R: BufRead>(
    reader: R,
    splitter: &SentenceSplitter,
) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::new();
    for rec in records(reader) {
        let (line_no, line) = rec?;
        let raw: RawDocument =
            serde_json::from_str(&line).map_err(|e| schema_err(line_no, e.to_string()))?;
        let mut doc = Document::with_splitter(raw.id, raw.text, raw.domain, splitter);
        doc.source = raw.source;
        doc.query = raw.query;
        corpus.insert(doc).map_err(|_| schema_err(line_no, "duplicate document id"))?;
    }
    Ok(corpus)
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawRecord {
    Span {
        doc_id: String,
        annotator_id: String,
        start: i64,
        end: i64,
        codes: Vec<String>,
    },
    Judgment {
        doc_id: String,
        annotator_id: String,
        is_slop: bool,
    },
}

/// Read and validate an annotation file against `corpus`.
pub fn load_annotations<R: BufRead>(reader: R, corpus: &Corpus) -> Result<Annotations, CorpusError> {
    let mut out = Annotations::default();
    let mut judged: HashSet<(String, String)> = HashSet::new();
    for rec in records(reader) {
        let (line, text) = rec?;
        let raw: RawRecord =
            serde_json::from_str(&text).map_err(|e| schema_err(line, e.to_string()))?;
        match raw {
            RawRecord::Span {
                doc_id,
                annotator_id,
                start,
                end,
                codes,
            } => {
                let doc = corpus.get(&doc_id).ok_or_else(|| CorpusError::UnknownDocument {
                    line,
                    doc_id: doc_id.clone(),
                })?;
                let len = doc.char_len();
                if start < 0 || end <= start || end as u64 > len as u64 {
                    return Err(CorpusError::OffsetError {
                        line,
                        doc_id,
                        start,
                        end,
                        len,
                    });
                }
                if codes.is_empty() {
                    return Err(schema_err(line, "span has no codes"));
                }
                let mut set = BTreeSet::new();
                for code in &codes {
                    let parsed: GranularCode = code.parse().map_err(|_| CorpusError::UnknownCode {
                        line,
                        code: code.clone(),
                    })?;
                    if !set.insert(parsed) {
                        return Err(schema_err(line, format!("duplicate code {code}")));
                    }
                }
                out.spans.push(SpanAnnotation {
                    doc_id,
                    annotator_id,
                    start: start as usize,
                    end: end as usize,
                    codes: set,
                });
            }
            RawRecord::Judgment {
                doc_id,
                annotator_id,
                is_slop,
            } => {
                if corpus.get(&doc_id).is_none() {
                    return Err(CorpusError::UnknownDocument { line, doc_id });
                }
                if !judged.insert((doc_id.clone(), annotator_id.clone())) {
                    return Err(schema_err(
                        line,
                        format!("second judgment for ({doc_id:?}, {annotator_id:?})"),
                    ));
                }
                out.judgments.push(DocumentJudgment {
                    doc_id,
                    annotator_id,
                    is_slop,
                });
            }
        }
    }
    Ok(out)
}

fn header_line<W: Write>(w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{}", serde_json::json!({ "schema": SCHEMA }))
}

/// Write documents in the corpus file format.
pub fn write_documents<'a, W, I>(mut w: W, docs: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Document>,
{
    header_line(&mut w)?;
    for d in docs {
        let mut obj = serde_json::json!({
            "id": d.id,
            "text": d.text,
            "domain": d.domain,
            "source": d.source,
        });
        if let Some(q) = &d.query {
            obj["query"] = q.clone().into();
        }
        writeln!(w, "{obj}")?;
    }
    Ok(())
}

/// Write spans and judgments in the annotation file format.
pub fn write_annotations<W: Write>(mut w: W, ann: &Annotations) -> std::io::Result<()> {
    header_line(&mut w)?;
    for j in &ann.judgments {
        let obj = serde_json::json!({
            "kind": "judgment",
            "doc_id": j.doc_id,
            "annotator_id": j.annotator_id,
            "is_slop": j.is_slop,
        });
        writeln!(w, "{obj}")?;
    }
    for s in &ann.spans {
        let codes: Vec<&str> = s.codes.iter().map(|c| c.as_str()).collect();
        let obj = serde_json::json!({
            "kind": "span",
            "doc_id": s.doc_id,
            "annotator_id": s.annotator_id,
            "start": s.start,
            "end": s.end,
            "codes": codes,
        });
        writeln!(w, "{obj}")?;
    }
    Ok(())
}
