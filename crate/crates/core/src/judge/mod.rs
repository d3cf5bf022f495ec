//! LLM-judge client: prompt assembly, chat-completion calls, response
//! parsing and scoring against human gold.

mod eval;
pub mod mock;
mod transport;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::agreement::CharSpan;
use crate::corpus::{Annotations, Corpus, Document};

pub use eval::{
    evaluate_binary, evaluate_spans, gold_spans, span_overlap_f1, write_binary_csv, write_span_csv,
    BinaryReport, SpanPrediction, SpanReport,
};
pub use transport::{HttpTransport, RecordingTransport, ReplayTransport, Transport, TransportError};

/// Annotator guide used as the system prompt unless one is supplied.
pub const DEFAULT_GUIDE: &str = include_str!("../../data/judge_guide.txt");

/// Environment variable read for the bearer token.
pub const API_KEY_ENV: &str = "SLOPSCOPE_API_KEY";

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("need {needed} exemplars besides the target, have {available}")]
    InsufficientExemplars { needed: usize, available: usize },
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {0}")]
    HttpError(u16),
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<JudgeError> },
    #[error("could not parse judge output: {0}")]
    ParseError(String),
    #[error("predictions and gold differ: {missing} documents without prediction, {extra} without gold")]
    CoverageMismatch { missing: usize, extra: usize },
    #[error("no gold judgments")]
    NoGold,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = JudgeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JudgeMode {
    BinaryLabel,
    SpanExtract,
}

impl JudgeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            JudgeMode::BinaryLabel => "binary",
            JudgeMode::SpanExtract => "span",
        }
    }
}

impl fmt::Display for JudgeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JudgeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "binary" | "binary_label" => Ok(JudgeMode::BinaryLabel),
            "span" | "span_extract" => Ok(JudgeMode::SpanExtract),
            other => Err(format!("unknown judge mode {other:?} (expected binary or span)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeConfig {
    pub endpoint: String,
    pub model: String,
    pub mode: JudgeMode,
    pub k_shot: usize,
    pub timeout: Duration,
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubles each time.
    pub backoff: Duration,
    pub in_flight: usize,
    pub exemplar_seed: u64,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "judge".into(),
            mode: JudgeMode::SpanExtract,
            k_shot: 0,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            in_flight: 4,
            exemplar_seed: 0,
        }
    }
}

/// A gold-annotated document shown to the judge as an example.
#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub doc_id: String,
    pub text: String,
    pub spans: Vec<String>,
    pub label: bool,
}

/// Exemplars for every annotated document: spans are the texts of all
/// annotators' spans in document order (duplicates removed), the label is
/// the majority vote.
pub fn exemplars_from(corpus: &Corpus, ann: &Annotations) -> Vec<Exemplar> {
    let labels = ann.majority_labels();
    let mut out = Vec::new();
    for doc in corpus.iter() {
        let mut ranges: Vec<(usize, usize)> = ann
            .spans
            .iter()
            .filter(|s| s.doc_id == doc.id)
            .map(|s| (s.start, s.end))
            .collect();
        let label = labels.get(&doc.id).copied();
        if ranges.is_empty() && label.is_none() {
            continue;
        }
        ranges.sort_unstable();
        ranges.dedup();
        let mut spans: Vec<String> = Vec::new();
        for (s, e) in ranges {
            let t = doc.slice(s, e).to_string();
            if !spans.contains(&t) {
                spans.push(t);
            }
        }
        out.push(Exemplar {
            doc_id: doc.id.clone(),
            text: doc.text.clone(),
            label: label.unwrap_or(!spans.is_empty()),
            spans,
        });
    }
    out
}

/// System and user messages of one judge request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl Prompt {
    pub fn text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }

    /// Chat-completion request body.
    pub fn request(&self, model: &str) -> Value {
        json!({
            "model": model,
            "messages": [
                {"role": "system", "content": self.system},
                {"role": "user", "content": self.user},
            ]
        })
    }
}

/// Marker preceding the document to judge in the user message.
pub const TARGET_MARKER: &str = "### Text to assess";
/// Marker opening each exemplar block.
pub const EXEMPLAR_MARKER: &str = "### Example";

fn contract(mode: JudgeMode) -> &'static str {
    match mode {
        JudgeMode::SpanExtract => {
            "Quote the shortest verbatim passages of the text that show slop according to the guide, then explain briefly.\nAnswer with a JSON object only: {\"spans\": [\"...\", \"...\"], \"reasoning\": \"...\"}"
        }
        JudgeMode::BinaryLabel => {
            "Decide whether the text as a whole is slop according to the guide (0 = no, 1 = yes).\nAnswer with a JSON object only: {\"label\": 0 or 1, \"reasoning\": \"...\"}"
        }
    }
}

fn exemplar_answer(e: &Exemplar, mode: JudgeMode) -> String {
    match mode {
        JudgeMode::SpanExtract => json!({ "spans": e.spans, "reasoning": "" }).to_string(),
        JudgeMode::BinaryLabel => json!({ "label": u8::from(e.label), "reasoning": "" }).to_string(),
    }
}

/// Assembles guide, `k` exemplars and the target text.
///
/// Exemplars exclude the target document; the pool is ordered by id and
/// shuffled with `seed`, and the first `k` are used in that order.
pub fn build_prompt(
    doc: &Document,
    mode: JudgeMode,
    k: usize,
    exemplars: &[Exemplar],
    guide: &str,
    seed: u64,
) -> Result<Prompt> {
    let mut pool: Vec<&Exemplar> = exemplars.iter().filter(|e| e.doc_id != doc.id).collect();
    if pool.len() < k {
        return Err(JudgeError::InsufficientExemplars {
            needed: k,
            available: pool.len(),
        });
    }
    pool.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let system = format!("{}\n\n{}", guide.trim_end(), contract(mode));
    let mut user = String::new();
    for (i, e) in pool.iter().take(k).enumerate() {
        user.push_str(&format!(
            "{EXEMPLAR_MARKER} {}\nText:\n{}\nAnswer:\n{}\n\n",
            i + 1,
            e.text,
            exemplar_answer(e, mode)
        ));
    }
    user.push_str(TARGET_MARKER);
    user.push('\n');
    user.push_str(&doc.text);
    Ok(Prompt { system, user })
}

/// Parsed judge reply.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeResponse {
    /// Assistant message content, verbatim.
    pub raw: String,
    pub spans: Vec<String>,
    pub reasoning: String,
    pub label: Option<bool>,
    pub retries: u32,
}

/// First substring that is a complete JSON object. Braces inside JSON
/// strings are skipped while scanning.
pub fn extract_json_object(raw: &str) -> Option<Value> {
    let bytes = raw.as_bytes();
    let mut from = 0;
    while let Some(off) = raw[from..].find('{') {
        let start = from + off;
        let (mut depth, mut in_str, mut escaped) = (0usize, false, false);
        let mut end = None;
        for (i, &b) in bytes.iter().enumerate().skip(start) {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i + 1);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(end) = end {
            if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(&raw[start..end]) {
                return Some(v);
            }
        }
        from = start + 1;
    }
    None
}

fn parse_label(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::Number(n) => match n.as_f64() {
            Some(0.0) => Some(false),
            Some(1.0) => Some(true),
            _ => None,
        },
        Value::String(s) => match s.trim() {
            "0" | "no" | "false" => Some(false),
            "1" | "yes" | "true" => Some(true),
            _ => None,
        },
        _ => None,
    }
}

/// Interprets assistant content under `mode`.
pub fn parse_response(raw: &str, mode: JudgeMode) -> Result<JudgeResponse> {
    let obj = extract_json_object(raw).ok_or_else(|| JudgeError::ParseError("no JSON object".into()))?;
    let reasoning = obj.get("reasoning").and_then(Value::as_str).unwrap_or_default().to_string();
    let mut resp = JudgeResponse {
        raw: raw.to_string(),
        spans: Vec::new(),
        reasoning,
        label: None,
        retries: 0,
    };
    match mode {
        JudgeMode::SpanExtract => {
            let spans = obj
                .get("spans")
                .and_then(Value::as_array)
                .ok_or_else(|| JudgeError::ParseError("missing \"spans\" array".into()))?;
            resp.spans = spans
                .iter()
                .filter_map(Value::as_str)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
        }
        JudgeMode::BinaryLabel => {
            let label = obj
                .get("label")
                .and_then(parse_label)
                .ok_or_else(|| JudgeError::ParseError("missing or invalid \"label\"".into()))?;
            resp.label = Some(label);
        }
    }
    Ok(resp)
}

/// Char ranges located for quoted spans, plus how many could not be found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanMatch {
    pub ranges: Vec<(usize, usize)>,
    pub unmatched: usize,
}

/// Locates each quoted span in the document by exact search, taking the
/// first occurrence. Spans that are absent, empty or not strings count as
/// unmatched.
pub fn parse_spans(raw: &str, doc: &Document) -> Result<SpanMatch> {
    let obj = extract_json_object(raw).ok_or_else(|| JudgeError::ParseError("no JSON object".into()))?;
    let spans = obj
        .get("spans")
        .and_then(Value::as_array)
        .ok_or_else(|| JudgeError::ParseError("missing \"spans\" array".into()))?;
    let mut out = SpanMatch {
        ranges: Vec::new(),
        unmatched: 0,
    };
    for s in spans {
        match s.as_str().filter(|t| !t.is_empty()).and_then(|t| doc.text.find(t).map(|b| (t, b))) {
            Some((t, byte)) => {
                let start = doc.char_offset(byte);
                out.ranges.push((start, start + t.chars().count()));
            }
            None => out.unmatched += 1,
        }
    }
    Ok(out)
}

fn is_retryable(e: &TransportError) -> bool {
    match e {
        TransportError::Status(s) => *s >= 500 || *s == 429 || *s == 408,
        TransportError::Timeout | TransportError::Connection(_) => true,
        TransportError::Body(_) | TransportError::Replay(_) => false,
    }
}

impl From<TransportError> for JudgeError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Status(s) => JudgeError::HttpError(s),
            TransportError::Timeout => JudgeError::Timeout,
            TransportError::Connection(m) | TransportError::Replay(m) => JudgeError::Connection(m),
            TransportError::Body(m) => JudgeError::ParseError(m),
        }
    }
}

fn content_of(body: &str) -> Result<String> {
    let v: Value = serde_json::from_str(body).map_err(|e| JudgeError::ParseError(format!("response body: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| JudgeError::ParseError("response has no choices[0].message.content".into()))
}

/// Sends one prompt, retrying server errors, throttling and network
/// failures with exponential backoff. Client errors fail at once.
pub fn call_judge(cfg: &JudgeConfig, transport: &dyn Transport, prompt: &Prompt) -> Result<JudgeResponse> {
    let request = prompt.request(&cfg.model);
    let mut attempt = 0u32;
    loop {
        match transport.post(&request) {
            Ok(body) => {
                let mut resp = parse_response(&content_of(&body)?, cfg.mode)?;
                resp.retries = attempt;
                return Ok(resp);
            }
            Err(e) if !is_retryable(&e) => return Err(e.into()),
            Err(e) => {
                if attempt >= cfg.max_retries {
                    return Err(JudgeError::RetriesExhausted {
                        attempts: attempt + 1,
                        last: Box::new(e.into()),
                    });
                }
                std::thread::sleep(cfg.backoff.saturating_mul(1 << attempt.min(16)));
                attempt += 1;
            }
        }
    }
}

/// Runs `call_judge` on every prompt with at most `cfg.in_flight` requests
/// outstanding. Results keep the input order.
pub fn call_judge_all(
    cfg: &JudgeConfig,
    transport: &dyn Transport,
    prompts: &[Prompt],
) -> Vec<Result<JudgeResponse>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<JudgeResponse>>>> = prompts.iter().map(|_| Mutex::new(None)).collect();
    let workers = cfg.in_flight.clamp(1, prompts.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= prompts.len() {
                    break;
                }
                let r = call_judge(cfg, transport, &prompts[i]);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("every prompt is processed"))
        .collect()
}

/// Converts a span-mode reply into char spans on `doc`.
pub fn span_prediction(resp: &JudgeResponse, doc: &Document) -> Result<SpanPrediction> {
    let m = parse_spans(&resp.raw, doc)?;
    Ok(SpanPrediction {
        doc_id: doc.id.clone(),
        spans: m.ranges.iter().map(|&(s, e)| CharSpan::new(doc.id.clone(), s, e)).collect(),
        unmatched: m.unmatched,
    })
}
