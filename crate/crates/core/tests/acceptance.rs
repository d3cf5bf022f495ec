//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test --test acceptance`. The replication criterion runs
//! only when `SLOPSCOPE_REPLICATION_DIR` points at ingested annotation data.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use slopscope::agreement::{
    char_span_prf, cohen_kappa, fleiss_kappa, gwet_ac1, krippendorff_alpha, krippendorff_alpha_masi, masi_distance,
    span_precision, span_precision_by_paragraph, spearman_rho, CharSpan, PairTable,
};
use slopscope::corpus::{load_annotations, load_documents, Annotations, Corpus, Document, Domain};
use slopscope::judge::mock::{completion, user_message, MockServer};
use slopscope::judge::{
    build_prompt, call_judge, call_judge_all, evaluate_spans, exemplars_from, gold_spans, span_prediction,
    HttpTransport, JudgeConfig, JudgeMode, SpanPrediction, DEFAULT_GUIDE, TARGET_MARKER,
};
use slopscope::metrics::{
    compression_ratio, feature_vector, FeatureVector, MetricContext, ReadabilityCounts, SubjectivityLexicon,
    TemplateConfig, TrigramScorer,
};
use slopscope::slopmodel::{
    auprc, fit_inferential, logistic, train_slop_model, DesignMatrix, FeatureMatrix, InferentialConfig,
    PredictiveConfig,
};
use slopscope::tagger::{bundled_split, train, TrainConfig};

type Check = Result<(), String>;

enum Outcome {
    Pass,
    Fail(String),
    Skip(String),
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn within(elapsed: Duration, limit_secs: u64) -> Check {
    ensure(elapsed.as_secs_f64() < limit_secs as f64, || {
        format!("took {:.2}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn load_fixture() -> (Corpus, Annotations) {
    let dir = fixtures();
    let corpus = load_documents(BufReader::new(File::open(dir.join("corpus.jsonl")).unwrap())).unwrap();
    let ann = load_annotations(BufReader::new(File::open(dir.join("annotations.jsonl")).unwrap()), &corpus).unwrap();
    (corpus, ann)
}

// 1. Readability against hand counts (words, sentences, syllables, complex
// words) under the documented syllable heuristic.
fn readability() -> Check {
    let start = Instant::now();
    let cases: [(&str, [usize; 4]); 5] = [
        ("The cat sat.", [3, 1, 3, 0]),
        ("we all sat in the sun and the dog ran to us on the grass", [15, 1, 15, 0]),
        ("Go.", [1, 1, 1, 0]),
        ("My family went to Canada. We ate banana bread.", [9, 2, 15, 3]),
        ("Elephants remember everything. Dogs forget.", [5, 2, 13, 3]),
    ];
    for (text, [w, s, syl, cx]) in cases {
        let doc = Document::new("d", text, Domain::Other);
        let c = ReadabilityCounts::of(&doc).map_err(|e| e.to_string())?;
        let (w, s, syl, cx) = (w as f64, s as f64, syl as f64, cx as f64);
        let fre = 206.835 - 1.015 * (w / s) - 84.6 * (syl / w);
        let fkgl = 0.39 * (w / s) + 11.8 * (syl / w) - 15.59;
        let gfi = 0.4 * ((w / s) + 100.0 * (cx / w));
        for (name, got, want) in [("FRE", c.fre(), fre), ("FKGL", c.fkgl(), fkgl), ("GFI", c.gfi(), gfi)] {
            ensure(close(got, want, 1e-6), || format!("{text:?} {name}: {got} != {want}"))?;
        }
    }
    let cat = ReadabilityCounts::of(&Document::new("d", "The cat sat.", Domain::Other)).unwrap();
    ensure(close(cat.fre(), 119.19, 1e-6) && close(cat.fkgl(), -2.62, 1e-6) && close(cat.gfi(), 1.2, 1e-6), || {
        "worked example mismatch".into()
    })?;
    within(start.elapsed(), 1)
}

/// Reference Krippendorff alpha for two-coder units.
fn alpha_oracle<V>(units: &[(V, V)], d: impl Fn(&V, &V) -> f64) -> f64 {
    let n = 2.0 * units.len() as f64;
    let d_o: f64 = units.iter().map(|(a, b)| 2.0 * d(a, b)).sum::<f64>() / n;
    let values: Vec<&V> = units.iter().flat_map(|(a, b)| [a, b]).collect();
    let mut d_e = 0.0;
    for (i, a) in values.iter().enumerate() {
        for (j, b) in values.iter().enumerate() {
            if i != j {
                d_e += d(a, b);
            }
        }
    }
    1.0 - d_o / (d_e / (n * (n - 1.0)))
}

// 2. Agreement coefficients on hand-computed fixtures, and alpha near zero
// on shuffled labels.
fn agreement() -> Check {
    let start = Instant::now();
    let kappa = |a: &[u8], b: &[u8]| {
        cohen_kappa(&PairTable::from_pairs(a.iter().copied().zip(b.iter().copied())))
            .unwrap()
            .coefficient
    };
    ensure(close(kappa(&[0, 1, 0, 1], &[1, 0, 1, 0]), -1.0, 1e-9), || "kappa -1 case".into())?;
    ensure(close(kappa(&[1, 1, 0, 0], &[1, 0, 1, 0]), 0.0, 1e-9), || "kappa 0 case".into())?;

    // Two raters on four items: p_o = 3/4, pi = 5/8, p_e = 2 pi (1 - pi).
    let t = PairTable::from_pairs([(1u8, 1u8), (1, 1), (1, 0), (0, 0)]);
    let ac1 = gwet_ac1(&t).map_err(|e| e.to_string())?.coefficient;
    let pi = 5.0 / 8.0;
    let pe = 2.0 * pi * (1.0 - pi);
    ensure(close(ac1, (0.75 - pe) / (1.0 - pe), 1e-9) && close(ac1, 0.529_411_764_7, 1e-9), || {
        format!("AC1 {ac1}")
    })?;

    let ratings = vec![vec![3, 0], vec![2, 1], vec![0, 3], vec![1, 2], vec![3, 0]];
    let fk = fleiss_kappa(&ratings).map_err(|e| e.to_string())?.coefficient;
    let p_bar = (1.0 + 1.0 / 3.0 + 1.0 + 1.0 / 3.0 + 1.0) / 5.0;
    let p_e = 0.6f64.powi(2) + 0.4f64.powi(2);
    ensure(close(fk, (p_bar - p_e) / (1.0 - p_e), 1e-9), || format!("Fleiss {fk}"))?;

    let set = |xs: &[&'static str]| xs.iter().copied().collect::<BTreeSet<_>>();
    let masi = [
        (masi_distance(&set(&["a", "b"]), &set(&["a", "b"])), 0.0),
        (masi_distance(&set(&["a", "b"]), &set(&["a"])), 2.0 / 3.0),
        (masi_distance(&set(&["a"]), &set(&["b"])), 1.0),
    ];
    for (got, want) in masi {
        ensure(close(got, want, 1e-9), || format!("MASI {got} != {want}"))?;
    }
    let pairs = vec![
        (set(&["x"]), set(&["x"])),
        (set(&["x", "y"]), set(&["y"])),
        (set(&["z"]), set(&["z"])),
        (set(&["x", "z"]), set(&["x"])),
    ];
    let units: BTreeMap<usize, Vec<BTreeSet<&str>>> =
        pairs.iter().enumerate().map(|(i, (a, b))| (i, vec![a.clone(), b.clone()])).collect();
    let got = krippendorff_alpha_masi(&units).map_err(|e| e.to_string())?;
    let want = alpha_oracle(&pairs, masi_distance);
    ensure(close(got, want, 1e-9), || format!("alpha-MASI {got} != {want}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let coder: Vec<usize> = (0..60).map(|_| rng.random_range(0..3)).collect();
    let mut total = 0.0;
    for _ in 0..1000 {
        let mut other = coder.clone();
        other.shuffle(&mut rng);
        let units: BTreeMap<usize, Vec<usize>> =
            coder.iter().zip(&other).enumerate().map(|(i, (&a, &b))| (i, vec![a, b])).collect();
        total += krippendorff_alpha(&units, |a, b| f64::from(u8::from(a != b))).map_err(|e| e.to_string())?;
    }
    let mean = total / 1000.0;
    ensure(mean.abs() <= 0.1, || format!("shuffled alpha mean {mean}"))?;
    within(start.elapsed(), 10)
}

// 3. Span precision and character P/R/F on constructed overlaps, and the
// judge evaluator agreeing with the character scorer.
fn span_metrics() -> Check {
    let start = Instant::now();
    let text = "alpha beta gamma delta epsilon zeta";
    let corpus = Corpus::from_iter([Document::new("d", text, Domain::Other)]);
    let at = |w: &str| text.find(w).unwrap();
    // A marks four words, B marks two of them and one more.
    let a = vec![CharSpan::new("d", 0, at("delta") + 5)];
    let b = vec![CharSpan::new("d", at("gamma"), at("epsilon") + 7)];
    let p = span_precision(&corpus, &a, &b).map_err(|e| e.to_string())?;
    ensure(p == 0.5, || format!("word precision {p}"))?;
    let p_par = span_precision_by_paragraph(&corpus, &a, &b).map_err(|e| e.to_string())?;
    ensure(p_par == 0.5, || format!("paragraph precision {p_par}"))?;

    let gold = vec![CharSpan::new("d", 0, 10)];
    let pred = vec![CharSpan::new("d", 5, 15)];
    let prf = char_span_prf(&gold, &pred);
    ensure(prf.precision == 0.5 && prf.recall == 0.5 && prf.f1 == 0.5, || format!("{prf:?}"))?;

    let (_, ann) = load_fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let preds: Vec<SpanPrediction> = ann
        .documents()
        .into_iter()
        .map(|id| {
            let spans = (0..rng.random_range(0..3))
                .map(|_| {
                    let s = rng.random_range(0..60);
                    CharSpan::new(id.clone(), s, s + rng.random_range(1..40))
                })
                .collect();
            SpanPrediction {
                doc_id: id,
                spans,
                unmatched: 0,
            }
        })
        .collect();
    let rep = evaluate_spans(&preds, &ann).map_err(|e| e.to_string())?;
    let flat: Vec<CharSpan> = preds.iter().flat_map(|p| p.spans.clone()).collect();
    let direct = char_span_prf(&gold_spans(&ann), &flat);
    ensure(rep.prf == direct, || format!("{:?} != {direct:?}", rep.prf))?;
    within(start.elapsed(), 1)
}

// 4. Planted coefficient recovery over 20 seeds.
fn regression_recovery() -> Check {
    let start = Instant::now();
    let beta = [2.0, -1.0, 0.0];
    let (mut errors, mut null_ok) = (Vec::new(), 0);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (mut rows, mut labels) = (Vec::new(), Vec::new());
        for _ in 0..2000 {
            let x: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            let eta: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
            labels.push(rng.random::<f64>() < logistic(eta));
            rows.push(x);
        }
        let cols = ["x1", "x2", "x3"].map(String::from).to_vec();
        let d = DesignMatrix::from_rows(cols, &rows, labels).map_err(|e| e.to_string())?;
        let rep = fit_inferential(&d, &InferentialConfig::default()).map_err(|e| e.to_string())?;
        let b: Vec<f64> = rep.rows.iter().map(|r| r.beta).collect();
        ensure(b[0] > 0.0 && b[1] < 0.0, || format!("seed {seed}: wrong signs {b:?}"))?;
        ensure(rep.gradient_norm < 1e-8, || format!("seed {seed}: gradient norm {}", rep.gradient_norm))?;
        errors.push(b.iter().zip(&beta).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt());
        if rep.rows[2].p_bonferroni > 0.05 {
            null_ok += 1;
        }
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    ensure(mean < 0.15, || format!("mean coefficient error {mean:.4}"))?;
    ensure(null_ok >= 18, || format!("null feature kept in only {null_ok}/20 seeds"))?;
    within(start.elapsed(), 30)
}

// 5. AUPRC properties.
fn auprc_properties() -> Check {
    let start = Instant::now();
    let e = |x: slopscope::slopmodel::SlopModelError| x.to_string();
    let perfect = auprc(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).map_err(e)?;
    ensure(perfect == 1.0, || format!("perfect ranking {perfect}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let labels: Vec<bool> = (0..10_000).map(|i| i % 4 == 0).collect();
    let scores: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
    let random = auprc(&scores, &labels).map_err(e)?;
    ensure(close(random, 0.25, 0.05), || format!("random scores {random}"))?;

    let tied = auprc(&[0.5; 12], &(0..12).map(|i| i < 3).collect::<Vec<_>>()).map_err(e)?;
    ensure(tied == 0.25, || format!("tied scores {tied}"))?;

    for trial in 0..100 {
        let n = rng.random_range(5..200);
        let labels: Vec<bool> = (0..n).map(|i| i == 0 || rng.random::<f64>() < 0.3).collect();
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..50) as f64) / 10.0).collect();
        let moved: Vec<f64> = scores.iter().map(|s| (2.0 * s).exp() + 3.0).collect();
        let (a, b) = (auprc(&scores, &labels).map_err(e)?, auprc(&moved, &labels).map_err(e)?);
        ensure(close(a, b, 1e-12), || format!("trial {trial}: {a} != {b}"))?;
    }
    within(start.elapsed(), 10)
}

fn cli(args: &[&str]) -> Check {
    let mut full = vec!["slopscope"];
    full.extend_from_slice(args);
    slopscope::cli::run(full).map_err(|e| format!("{args:?}: {e}"))
}

// 6. measure and fit reruns are byte-identical for any job count.
fn pipeline_determinism() -> Check {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = fixtures();
    let corpus = dir.join("corpus.jsonl");
    let ann = dir.join("annotations.jsonl");
    let (corpus, ann) = (corpus.to_str().unwrap(), ann.to_str().unwrap());
    // (jobs, features, model, cv log)
    type Run = (String, Vec<u8>, Vec<u8>, Vec<u8>);
    let mut outputs: Vec<Run> = Vec::new();
    for (run, jobs) in [(0, "1"), (1, "1"), (2, "4"), (3, "3")] {
        let feat = tmp.path().join(format!("features{run}.csv"));
        let model = tmp.path().join(format!("model{run}.txt"));
        let cv = tmp.path().join(format!("cv{run}.csv"));
        let (f, m, c) = (feat.to_str().unwrap(), model.to_str().unwrap(), cv.to_str().unwrap());
        cli(&["measure", "--jobs", jobs, "--seed", "7", "--corpus", corpus, "--annotations", ann, "--out", f])?;
        cli(&[
            "fit", "--jobs", jobs, "--seed", "7", "--features", f, "--corpus", corpus, "--annotations", ann,
            "--folds", "3", "--out", m, "--cv-log", c,
        ])?;
        let read = |p: &Path| fs::read(p).map_err(|e| e.to_string());
        outputs.push((jobs.to_string(), read(&feat)?, read(&model)?, read(&cv)?));
    }
    for o in &outputs[1..] {
        ensure(o.1 == outputs[0].1, || format!("features differ with --jobs {}", o.0))?;
        ensure(o.2 == outputs[0].2, || format!("model differs with --jobs {}", o.0))?;
        ensure(o.3 == outputs[0].3, || format!("CV log differs with --jobs {}", o.0))?;
    }
    let text = String::from_utf8_lossy(&outputs[0].1);
    ensure(text.lines().any(|l| l == "# seed 7"), || "seed missing from header".into())?;
    within(start.elapsed(), 60)
}

// 7. Tagger accuracy on the bundled held-out split.
fn tagger_quality() -> Check {
    let start = Instant::now();
    let (train_set, held_out) = bundled_split();
    let model = train(&train_set, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let trained_in = start.elapsed();
    let acc = model.accuracy(&held_out).map_err(|e| e.to_string())?;
    ensure(acc >= 0.85, || format!("held-out accuracy {acc:.4}"))?;
    within(trained_in, 60)
}

// 8. Compression ratio grows with repetition.
fn repetition_monotonicity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let vocab: Vec<String> = (0..500).map(|i| format!("w{i}")).collect();
    for trial in 0..100 {
        let n = rng.random_range(5..120);
        let list: Vec<&str> = (0..n).map(|_| vocab[rng.random_range(0..vocab.len())].as_str()).collect();
        let doubled: Vec<&str> = list.iter().chain(list.iter()).copied().collect();
        let (a, b) = (compression_ratio(&list).unwrap(), compression_ratio(&doubled).unwrap());
        ensure(b >= a, || format!("trial {trial}: doubled {b} < single {a}"))?;

        let distinct: Vec<&str> = vocab[..n].iter().map(String::as_str).collect();
        let repeated = vec![vocab[rng.random_range(0..vocab.len())].as_str(); n];
        let (d, r) = (compression_ratio(&distinct).unwrap(), compression_ratio(&repeated).unwrap());
        ensure(r > d, || format!("trial {trial}: repeated {r} <= distinct {d}"))?;
    }
    Ok(())
}

fn judge_cfg(url: String) -> JudgeConfig {
    JudgeConfig {
        endpoint: url,
        mode: JudgeMode::SpanExtract,
        timeout: Duration::from_secs(5),
        backoff: Duration::from_millis(10),
        ..JudgeConfig::default()
    }
}

// 9. Judge harness against scripted mock endpoints.
fn judge_harness() -> Check {
    let start = Instant::now();
    let (corpus, ann) = load_fixture();
    let exemplars = exemplars_from(&corpus, &ann);
    let docs: Vec<&Document> = ann.documents().iter().filter_map(|id| corpus.get(id)).collect();
    let prompts = docs
        .iter()
        .map(|d| build_prompt(d, JudgeMode::SpanExtract, 0, &exemplars, DEFAULT_GUIDE, 0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;

    let run = |server: &MockServer| -> Result<slopscope::judge::SpanReport, String> {
        let cfg = judge_cfg(server.url());
        let t = HttpTransport::new(cfg.endpoint.clone(), cfg.timeout, None);
        let mut preds = Vec::new();
        for (d, r) in docs.iter().zip(call_judge_all(&cfg, &t, &prompts)) {
            preds.push(span_prediction(&r.map_err(|e| e.to_string())?, d).map_err(|e| e.to_string())?);
        }
        evaluate_spans(&preds, &ann).map_err(|e| e.to_string())
    };

    let gold = exemplars.clone();
    let echo = MockServer::start(move |body| {
        let user = user_message(body).unwrap_or_default();
        let target = user.rsplit_once(TARGET_MARKER).map_or("", |(_, t)| t.trim_start_matches('\n'));
        let spans = gold.iter().find(|e| e.text == target).map(|e| e.spans.clone()).unwrap_or_default();
        (200, completion(&json!({ "spans": spans, "reasoning": "" }).to_string()))
    })
    .map_err(|e| e.to_string())?;
    let rep = run(&echo)?;
    ensure(rep.prf.precision == 1.0 && rep.prf.recall == 1.0, || format!("echo: {:?}", rep.prf))?;

    let empty = MockServer::start(|_| (200, completion(r#"{"spans": [], "reasoning": ""}"#))).map_err(|e| e.to_string())?;
    let rep = run(&empty)?;
    ensure(rep.prf.recall == 0.0 && rep.empty_rate == 1.0, || {
        format!("empty: recall {} empty rate {}", rep.prf.recall, rep.empty_rate)
    })?;

    let ok = completion(r#"{"spans": [], "reasoning": ""}"#);
    let flaky = MockServer::scripted(vec![(500, "{}".into()), (500, "{}".into()), (200, ok)]).map_err(|e| e.to_string())?;
    let cfg = JudgeConfig {
        max_retries: 3,
        ..judge_cfg(flaky.url())
    };
    let t = HttpTransport::new(cfg.endpoint.clone(), cfg.timeout, None);
    let r = call_judge(&cfg, &t, &prompts[0]).map_err(|e| e.to_string())?;
    ensure(r.retries == 2 && flaky.hits() == 3, || format!("retries {} hits {}", r.retries, flaky.hits()))?;
    within(start.elapsed(), 10)
}

fn load_split(dir: &Path) -> Result<(Corpus, Annotations), String> {
    let open = |name: &str| {
        File::open(dir.join(name))
            .map(BufReader::new)
            .map_err(|e| format!("{}: {e}", dir.join(name).display()))
    };
    let corpus = load_documents(open("corpus.jsonl")?).map_err(|e| e.to_string())?;
    let ann = load_annotations(open("annotations.jsonl")?, &corpus).map_err(|e| e.to_string())?;
    Ok((corpus, ann))
}

fn cv_auprc(corpus: &Corpus, ann: &Annotations) -> Result<f64, String> {
    let tagger = slopscope::tagger::bundled_model(0);
    let scorer = TrigramScorer::bundled();
    let lexicon = SubjectivityLexicon::sample();
    let ctx = MetricContext {
        tagger: &tagger,
        scorer: &scorer,
        lexicon: &lexicon,
        templates: TemplateConfig::default(),
    };
    let labels = ann.majority_labels();
    let (mut ids, mut rows, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (id, &label) in &labels {
        let doc = corpus.get(id).ok_or_else(|| format!("unknown document {id}"))?;
        let fv = feature_vector(doc, &ctx).map_err(|e| e.to_string())?;
        ids.push(id.clone());
        rows.push(fv.values().to_vec());
        y.push(label);
    }
    let cols = FeatureVector::FIELDS.map(String::from).to_vec();
    let m = FeatureMatrix::new(cols, ids, rows, y).map_err(|e| e.to_string())?;
    let t = train_slop_model(&m, 0.95, &PredictiveConfig::default()).map_err(|e| e.to_string())?;
    t.cv.iter()
        .find(|s| s.c == t.model.c_selected)
        .map(|s| s.mean_auprc)
        .ok_or_else(|| "no CV score".into())
}

fn span_count_rho(ann: &Annotations) -> Result<f64, String> {
    let (mut spans, mut votes) = (Vec::new(), Vec::new());
    for id in ann.documents() {
        spans.push(ann.spans.iter().filter(|s| s.doc_id == id).count() as f64);
        votes.push(ann.judgments.iter().filter(|j| j.doc_id == id && j.is_slop).count() as f64);
    }
    spearman_rho(&spans, &votes).map_err(|e| e.to_string())
}

// 10. Replication against released annotations, when present.
fn replication() -> Outcome {
    let Some(root) = std::env::var_os("SLOPSCOPE_REPLICATION_DIR") else {
        return Outcome::Skip("SLOPSCOPE_REPLICATION_DIR not set".into());
    };
    let root = PathBuf::from(root);
    let run = || -> Check {
        let (news_c, news_a) = load_split(&root.join("news"))?;
        let (qa_c, qa_a) = load_split(&root.join("msmarco"))?;
        for (name, c, a, want) in [("news", &news_c, &news_a, 0.52), ("msmarco", &qa_c, &qa_a, 0.55)] {
            let got = cv_auprc(c, a)?;
            ensure(close(got, want, 0.05), || format!("{name} AUPRC {got:.3}, expected {want}"))?;
        }
        let annotators = news_a.annotators();
        ensure(annotators.len() >= 3, || "news split needs three annotators".into())?;
        let spans_of = |who: &str| -> Vec<CharSpan> {
            news_a
                .spans
                .iter()
                .filter(|s| s.annotator_id == who)
                .map(|s| CharSpan::new(s.doc_id.clone(), s.start, s.end))
                .collect()
        };
        for ((x, y), want) in [((0, 1), 0.80), ((0, 2), 0.65), ((1, 2), 0.68)] {
            let got = span_precision_by_paragraph(&news_c, &spans_of(&annotators[x]), &spans_of(&annotators[y]))
                .map_err(|e| e.to_string())?;
            ensure(close(got, want, 0.03), || {
                format!("span precision {}-{}: {got:.3}, expected {want}", annotators[x], annotators[y])
            })?;
        }
        let mut all = news_a.clone();
        all.spans.extend(qa_a.spans.iter().cloned());
        all.judgments.extend(qa_a.judgments.iter().cloned());
        for (name, a, want) in [("news", &news_a, 0.70), ("msmarco", &qa_a, 0.51), ("all", &all, 0.63)] {
            let got = span_count_rho(a)?;
            ensure(close(got, want, 0.05), || format!("{name} span-count rho {got:.3}, expected {want}"))?;
        }
        Ok(())
    };
    match run() {
        Ok(()) => Outcome::Pass,
        Err(e) => Outcome::Fail(e),
    }
}

fn guarded(f: fn() -> Check) -> Outcome {
    match std::panic::catch_unwind(f) {
        Ok(Ok(())) => Outcome::Pass,
        Ok(Err(e)) => Outcome::Fail(e),
        Err(_) => Outcome::Fail("panicked".into()),
    }
}

fn main() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 9] = [
        ("readability oracle", readability),
        ("agreement oracle", agreement),
        ("span metrics", span_metrics),
        ("regression recovery", regression_recovery),
        ("AUPRC properties", auprc_properties),
        ("pipeline determinism", pipeline_determinism),
        ("tagger quality", tagger_quality),
        ("repetition monotonicity", repetition_monotonicity),
        ("judge harness", judge_harness),
    ];
    let mut failed = 0;
    let mut report = |i: usize, name: &str, outcome: Outcome, secs: f64| {
        let (tag, detail) = match outcome {
            Outcome::Pass => ("PASS", String::new()),
            Outcome::Fail(e) => {
                failed += 1;
                ("FAIL", format!(": {e}"))
            }
            Outcome::Skip(why) => ("SKIP", format!(": {why}")),
        };
        println!("criterion {:>2} {tag} {name} ({secs:.2}s){detail}", i);
    };
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = guarded(*f);
        report(i + 1, name, outcome, start.elapsed().as_secs_f64());
    }
    let start = Instant::now();
    let outcome = replication();
    report(10, "replication", outcome, start.elapsed().as_secs_f64());
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
