use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slopscope"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = bin(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn write_jsonl(path: &Path, records: &[serde_json::Value]) {
    let mut s = json!({"schema": "slopscope/1"}).to_string();
    s.push('\n');
    for r in records {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Data lines of an output file, without `#` header lines.
fn body(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

fn three_docs(dir: &Path) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    write_jsonl(
        &path,
        &[
            json!({"id": "c", "domain": "news", "text": "Prices fell. Traders blamed the weather."}),
            json!({"id": "a", "domain": "qa", "text": "The capital of France is Paris."}),
            json!({"id": "b", "domain": "other", "text": "It is truly a remarkable and amazing time for everyone."}),
        ],
    );
    path
}

#[test]
fn measure_three_documents() {
    let tmp = TempDir::new().unwrap();
    let corpus = three_docs(tmp.path());
    let out = tmp.path().join("f.csv");
    ok(&["measure", "--corpus", p(&corpus), "--out", p(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    assert_eq!(header[0], format!("# slopscope {}", env!("CARGO_PKG_VERSION")));
    assert!(header.contains(&"# schema slopscope/1"));
    assert!(header.contains(&"# seed 0"));
    assert!(header.iter().any(|l| l.starts_with("# input corpus sha256 ")));
    let rows = body(&out);
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("doc_id,n_words,"));
    let ids: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(ids, ["a", "b", "c"]);
}

#[test]
fn measure_is_reproducible_and_writes_stdout() {
    let tmp = TempDir::new().unwrap();
    let corpus = three_docs(tmp.path());
    let a = ok(&["measure", "--corpus", p(&corpus), "--seed", "3"]).stdout;
    let b = ok(&["measure", "--corpus", p(&corpus), "--seed", "3", "--jobs", "2"]).stdout;
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn missing_lexicon_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let corpus = three_docs(tmp.path());
    let out = bin(&["measure", "--corpus", p(&corpus), "--lexicon", "/does/not/exist.tff"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("LexiconError"));
}

#[test]
fn malformed_corpus_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.jsonl");
    fs::write(&path, "{\"schema\": \"other/9\"}\n").unwrap();
    let out = bin(&["measure", "--corpus", p(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn config_file_supplies_settings() {
    let tmp = TempDir::new().unwrap();
    let corpus = three_docs(tmp.path());
    let conf = tmp.path().join("run.conf");
    fs::write(&conf, format!("# run settings\ncorpus = {}\nseed = 9\ntemplate-n = 3\n", p(&corpus))).unwrap();
    let out = tmp.path().join("f.csv");
    ok(&["--config", p(&conf), "measure", "--out", p(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("# seed 9"));
    assert!(text.contains("template_n=3"));
    ok(&["--config", p(&conf), "--seed", "4", "measure", "--out", p(&out)]);
    assert!(fs::read_to_string(&out).unwrap().contains("# seed 4"));
}

fn two_annotator_files(dir: &Path, a: &[bool], b: &[bool]) -> (PathBuf, PathBuf) {
    let corpus = dir.join("corpus.jsonl");
    let docs: Vec<_> = (0..a.len())
        .map(|i| json!({"id": format!("d{i}"), "domain": "news", "text": "One sentence here. Another one there."}))
        .collect();
    write_jsonl(&corpus, &docs);
    let mut recs = Vec::new();
    for (who, labels) in [("A", a), ("B", b)] {
        for (i, &l) in labels.iter().enumerate() {
            recs.push(json!({"kind": "judgment", "doc_id": format!("d{i}"), "annotator_id": who, "is_slop": l}));
            if l {
                recs.push(json!({"kind": "span", "doc_id": format!("d{i}"), "annotator_id": who,
                    "start": 0, "end": 18, "codes": ["SQ4"]}));
            }
        }
    }
    let ann = dir.join("annotations.jsonl");
    write_jsonl(&ann, &recs);
    (corpus, ann)
}

#[test]
fn agree_reproduces_ac1_example() {
    let tmp = TempDir::new().unwrap();
    let (corpus, ann) = two_annotator_files(tmp.path(), &[true, true, true, false], &[true, true, false, false]);
    let out = tmp.path().join("agree.csv");
    ok(&["agree", "--corpus", p(&corpus), "--annotations", p(&ann), "--out", p(&out)]);
    let rows = body(&out);
    assert_eq!(rows[0], "scope,code,pair,kappa,ac1,alpha_masi,prevalence");
    let slop = rows.iter().find(|r| r.starts_with("label,slop,all,")).expect("label row");
    let ac1: f64 = slop.split(',').nth(4).unwrap().parse().unwrap();
    assert!((ac1 - 0.529_411_764_7).abs() < 1e-9, "{slop}");
}

#[test]
fn agree_identical_annotators() {
    let tmp = TempDir::new().unwrap();
    let labels = [true, false, true, false, true];
    let (corpus, ann) = two_annotator_files(tmp.path(), &labels, &labels);
    let out = tmp.path().join("agree.csv");
    ok(&["agree", "--corpus", p(&corpus), "--annotations", p(&ann), "--out", p(&out)]);
    let mut checked = 0;
    for row in &body(&out)[1..] {
        for cell in row.split(',').skip(3).take(3) {
            if cell != "NA" {
                assert_eq!(cell.parse::<f64>().unwrap(), 1.0, "{row}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 3);
}

#[test]
fn agree_single_annotator_fails() {
    let tmp = TempDir::new().unwrap();
    let corpus = three_docs(tmp.path());
    let ann = tmp.path().join("ann.jsonl");
    write_jsonl(&ann, &[json!({"kind": "judgment", "doc_id": "a", "annotator_id": "A", "is_slop": true})]);
    let out = bin(&["agree", "--corpus", p(&corpus), "--annotations", p(&ann)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("AgreementError"));
}

#[test]
fn agree_writes_span_precision() {
    let tmp = TempDir::new().unwrap();
    let spans = tmp.path().join("spans.csv");
    ok(&[
        "agree",
        "--corpus",
        &fixture("corpus.jsonl"),
        "--annotations",
        &fixture("annotations.jsonl"),
        "--out",
        p(&tmp.path().join("agree.csv")),
        "--spans-out",
        p(&spans),
    ]);
    let rows = body(&spans);
    assert_eq!(rows[0], "annotator_a,annotator_b,precision,precision_paragraph");
    assert_eq!(rows.len(), 1 + 6);
}

/// Features CSV and labels CSV with one informative column.
fn synthetic(dir: &Path, name: &str, n: usize, seed: u64, separable: bool) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feats = String::from("doc_id,signal,noise_a,noise_b\n");
    let mut labels = String::from("doc_id,label\n");
    for i in 0..n {
        let y = rng.random::<f64>() < 0.3;
        let signal = if separable {
            if y { 2.0 } else { -2.0 }
        } else {
            rng.random::<f64>()
        } + 0.1 * rng.random::<f64>();
        feats.push_str(&format!("{name}{i},{signal},{},{}\n", rng.random::<f64>(), rng.random::<f64>()));
        labels.push_str(&format!("{name}{i},{}\n", u8::from(y)));
    }
    let (f, l) = (dir.join(format!("{name}_features.csv")), dir.join(format!("{name}_labels.csv")));
    fs::write(&f, feats).unwrap();
    fs::write(&l, labels).unwrap();
    (f, l)
}

fn auprc_from_summary(path: &Path) -> (f64, f64) {
    let text = fs::read_to_string(path).unwrap();
    let get = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap_or_else(|| panic!("{key} missing"))
            .trim()
            .parse()
            .unwrap()
    };
    (get("auprc "), get("prevalence "))
}

#[test]
fn separable_features_report_perfect_auprc() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let (f, l) = synthetic(d, "s", 200, 1, true);
    let (model, pred, pr, summary) = (d.join("m.txt"), d.join("p.csv"), d.join("pr.csv"), d.join("sum.txt"));
    ok(&["fit", "--features", p(&f), "--labels", p(&l), "--out", p(&model), "--cv-log", p(&d.join("cv.csv"))]);
    assert!(fs::read_to_string(&model).unwrap().starts_with("SSMODEL1\n# slopscope "));
    ok(&["predict", "--model", p(&model), "--features", p(&f), "--out", p(&pred)]);
    assert_eq!(body(&pred)[0], "doc_id,probability");
    ok(&["report", "--predictions", p(&pred), "--labels", p(&l), "--out", p(&pr), "--summary", p(&summary)]);
    assert_eq!(body(&pr)[0], "threshold,recall,precision");
    let (auprc, _) = auprc_from_summary(&summary);
    assert_eq!(auprc, 1.0);
}

#[test]
fn shuffled_labels_score_near_prevalence() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let (train_f, train_l) = synthetic(d, "train", 1000, 2, false);
    let (test_f, test_l) = synthetic(d, "test", 4000, 3, false);
    let (model, pred, summary) = (d.join("m.txt"), d.join("p.csv"), d.join("sum.txt"));
    ok(&["fit", "--features", p(&train_f), "--labels", p(&train_l), "--out", p(&model), "--cv-log", p(&d.join("cv.csv"))]);
    ok(&["predict", "--model", p(&model), "--features", p(&test_f), "--out", p(&pred)]);
    ok(&["report", "--predictions", p(&pred), "--labels", p(&test_l), "--out", p(&d.join("pr.csv")), "--summary", p(&summary)]);
    let (auprc, prevalence) = auprc_from_summary(&summary);
    assert!((auprc - prevalence).abs() <= 0.05, "auprc {auprc} prevalence {prevalence}");
}

#[test]
fn predict_without_model_fails() {
    let tmp = TempDir::new().unwrap();
    let (f, _) = synthetic(tmp.path(), "x", 10, 4, false);
    let out = bin(&["predict", "--model", p(&tmp.path().join("missing.txt")), "--features", p(&f)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model"));
}

#[test]
fn inferential_fit_and_report_table() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let (f, l) = synthetic(d, "i", 400, 5, false);
    let coef = d.join("coef.csv");
    ok(&["fit", "--mode", "inferential", "--features", p(&f), "--labels", p(&l), "--out", p(&coef)]);
    let rows = body(&coef);
    assert_eq!(rows[0], "name,beta,se,z,p,p_bonferroni,significant,ci_low,ci_high");
    assert!(rows[1].starts_with("(intercept),"));
    assert_eq!(rows.len(), 5);

    let (model, pred, summary) = (d.join("m.txt"), d.join("p.csv"), d.join("sum.txt"));
    ok(&["fit", "--features", p(&f), "--labels", p(&l), "--out", p(&model), "--cv-log", p(&d.join("cv.csv"))]);
    ok(&["predict", "--model", p(&model), "--features", p(&f), "--out", p(&pred)]);
    ok(&[
        "report", "--predictions", p(&pred), "--labels", p(&l), "--inference", p(&coef),
        "--out", p(&d.join("pr.csv")), "--summary", p(&summary),
    ]);
    let text = fs::read_to_string(&summary).unwrap();
    assert!(text.contains("95% CI"));
    assert!(text.contains("noise_a"));
}

#[test]
fn separable_inferential_fit_is_a_computation_error() {
    let tmp = TempDir::new().unwrap();
    let (f, l) = synthetic(tmp.path(), "sep", 100, 6, true);
    let out = bin(&["fit", "--mode", "inferential", "--features", p(&f), "--labels", p(&l)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("separation"));
}

#[test]
fn tag_train_round_trip() {
    let tmp = TempDir::new().unwrap();
    let model = tmp.path().join("tagger.bin");
    let out = ok(&["tag-train", "--epochs", "3", "--out", p(&model)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("held-out accuracy"));
    let corpus = three_docs(tmp.path());
    ok(&["measure", "--corpus", p(&corpus), "--tagger", p(&model)]);

    fs::write(&model, b"garbage").unwrap();
    let out = bin(&["measure", "--corpus", p(&corpus), "--tagger", p(&model)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn judge_eval_unreachable_endpoint_is_a_network_error() {
    let addr = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let out = bin(&[
        "judge-eval",
        "--corpus",
        &fixture("corpus.jsonl"),
        "--annotations",
        &fixture("annotations.jsonl"),
        "--endpoint",
        &format!("http://{addr}/v1/chat/completions"),
        "--max-retries",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_subcommand_is_an_input_error() {
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}
