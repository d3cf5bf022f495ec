//! Run the judge harness against a local mock endpoint that returns the
//! gold spans for each document, then against one that returns nothing.
//!
//! ```text
//! cargo run --example judge_mock
//! ```

use std::fs::File;
use std::io::BufReader;
use std::time::Duration;

use serde_json::json;
use slopscope::corpus::{load_annotations, load_documents};
use slopscope::judge::mock::{completion, user_message, MockServer};
use slopscope::judge::{
    build_prompt, call_judge_all, evaluate_spans, exemplars_from, span_prediction, HttpTransport, JudgeConfig,
    JudgeMode, DEFAULT_GUIDE, TARGET_MARKER,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");
    let corpus = load_documents(BufReader::new(File::open(format!("{dir}/corpus.jsonl"))?))?;
    let ann = load_annotations(BufReader::new(File::open(format!("{dir}/annotations.jsonl"))?), &corpus)?;
    let exemplars = exemplars_from(&corpus, &ann);
    let docs: Vec<_> = ann.documents().into_iter().filter_map(|id| corpus.get(&id)).collect();

    // The oracle finds the target text after the marker and answers with the
    // exemplar spans of that document.
    let gold = exemplars.clone();
    let oracle = MockServer::start(move |body| {
        let user = user_message(body).unwrap_or_default();
        let target = user.rsplit_once(TARGET_MARKER).map(|(_, t)| t.trim_start_matches('\n')).unwrap_or("");
        let spans = gold.iter().find(|e| e.text == target).map(|e| e.spans.clone()).unwrap_or_default();
        (200, completion(&json!({ "spans": spans, "reasoning": "" }).to_string()))
    })?;
    let silent = MockServer::start(|_| (200, completion(r#"{"spans": [], "reasoning": "nothing found"}"#)))?;

    for (name, server) in [("oracle", &oracle), ("silent", &silent)] {
        let cfg = JudgeConfig {
            endpoint: server.url(),
            mode: JudgeMode::SpanExtract,
            k_shot: 1,
            timeout: Duration::from_secs(5),
            ..JudgeConfig::default()
        };
        let transport = HttpTransport::new(cfg.endpoint.clone(), cfg.timeout, None);
        let prompts = docs
            .iter()
            .map(|d| build_prompt(d, cfg.mode, cfg.k_shot, &exemplars, DEFAULT_GUIDE, 0))
            .collect::<Result<Vec<_>, _>>()?;
        let mut preds = Vec::new();
        for (d, r) in docs.iter().zip(call_judge_all(&cfg, &transport, &prompts)) {
            preds.push(span_prediction(&r?, d)?);
        }
        let rep = evaluate_spans(&preds, &ann)?;
        println!(
            "{name:<7} P {:.3} R {:.3} F1 {:.3} empty {:.2} requests {}",
            rep.prf.precision,
            rep.prf.recall,
            rep.prf.f1,
            rep.empty_rate,
            server.hits()
        );
    }
    Ok(())
}
