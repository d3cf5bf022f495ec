use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;

use super::{emit, header_lines, AgreeArgs, CliError, FitArgs, Globals, JudgeArgs, MeasureArgs, PredictArgs, ReportArgs, TagTrainArgs};
use crate::agreement::{agreement_report, span_precision, span_precision_by_paragraph, write_agreement_csv, CharSpan};
use crate::corpus::{load_annotations, load_documents, Annotations, Corpus};
use crate::judge::{
    build_prompt, call_judge_all, evaluate_binary, evaluate_spans, exemplars_from, span_overlap_f1, span_prediction,
    write_binary_csv, write_span_csv, HttpTransport, JudgeConfig, JudgeMode, RecordingTransport, ReplayTransport,
    SpanPrediction, Transport, API_KEY_ENV, DEFAULT_GUIDE,
};
use crate::metrics::{
    code_count_features, code_feature_names, code_presence_features, feature_vector, ExternalScorer, FeatureVector,
    MetricContext, SubjectivityLexicon, TemplateConfig, TokenScorer, TrigramScorer, MISSING,
};
use crate::slopmodel::{
    auprc, fit_inferential, pr_curve, read_features_csv, read_labels_csv, standardize, train_slop_model,
    FeatureMatrix, FeatureTable, FittedSlopModel, InferentialConfig, PredictiveConfig, SlopModelError,
};
use crate::tagger::{bundled_model, bundled_split, parse_tagged_corpus, train, TaggerModel, TrainConfig};

fn open(path: &Path, what: &str) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("{what} {}: {e}", path.display())))
}

fn read_text(path: &Path, what: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{what} {}: {e}", path.display())))
}

fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    Ok(load_documents(open(path, "corpus")?)?)
}

fn load_ann(path: &Path, corpus: &Corpus) -> Result<Annotations, CliError> {
    Ok(load_annotations(open(path, "annotations")?, corpus)?)
}

fn num(x: f64) -> String {
    x.to_string()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), num)
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Input(format!("CSV error: {e}")))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| CliError::Input(format!("{what}: {t:?}: {e}"))))
        .collect()
}

enum Scorer {
    Trigram(Box<TrigramScorer>),
    External(ExternalScorer),
}

impl Scorer {
    fn as_dyn(&self) -> &dyn TokenScorer {
        match self {
            Scorer::Trigram(s) => s.as_ref(),
            Scorer::External(s) => s,
        }
    }
}

/// Parses a scorer spec; returns the scorer and the file it was built from.
fn load_scorer(spec: &str) -> Result<(Scorer, Option<PathBuf>), CliError> {
    if spec == "builtin-trigram" {
        return Ok((Scorer::Trigram(Box::new(TrigramScorer::bundled())), None));
    }
    if let Some(path) = spec.strip_prefix("builtin-trigram:") {
        let path = PathBuf::from(path);
        let scorer = if path.extension().is_some_and(|e| e == "jsonl") {
            let corpus = load_corpus(&path)?;
            let text: Vec<&str> = corpus.iter().map(|d| d.text.as_str()).collect();
            TrigramScorer::from_text(&text.join("\n\n"))
        } else {
            TrigramScorer::from_text(&read_text(&path, "scorer corpus")?)
        };
        return Ok((Scorer::Trigram(Box::new(scorer)), Some(path)));
    }
    if let Some(path) = spec.strip_prefix("external:") {
        let path = PathBuf::from(path);
        let scorer = ExternalScorer::load(open(&path, "scorer")?)?;
        return Ok((Scorer::External(scorer), Some(path)));
    }
    Err(CliError::Input(format!(
        "unknown scorer {spec:?} (expected builtin-trigram, builtin-trigram:<file> or external:<file>)"
    )))
}

fn load_tagger(path: Option<&Path>, seed: u64) -> Result<TaggerModel, CliError> {
    match path {
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| CliError::Input(format!("tagger {}: {e}", p.display())))?;
            Ok(TaggerModel::from_bytes(&bytes)?)
        }
        None => Ok(bundled_model(seed)),
    }
}

pub fn measure(g: &Globals, a: &MeasureArgs) -> Result<(), CliError> {
    let c = &g.conf;
    let corpus_path: PathBuf = c.require(a.corpus.clone(), "corpus")?;
    let lexicon_path: Option<PathBuf> = c.pick(a.lexicon.clone(), "lexicon")?;
    let tagger_path: Option<PathBuf> = c.pick(a.tagger.clone(), "tagger")?;
    let scorer_spec: String = c.pick(a.scorer.clone(), "scorer")?.unwrap_or_else(|| "builtin-trigram".into());
    let defaults = TemplateConfig::default();
    let templates = TemplateConfig {
        n: c.pick(a.template_n, "template_n")?.unwrap_or(defaults.n),
        min_count: c.pick(a.template_min_count, "template_min_count")?.unwrap_or(defaults.min_count),
    };
    let ann_path: Option<PathBuf> = c.pick(a.annotations.clone(), "annotations")?;
    let codes_mode: String = c.pick(a.codes.clone(), "codes")?.unwrap_or_else(|| "counts".into());
    if codes_mode != "counts" && codes_mode != "presence" {
        return Err(CliError::Input(format!("--codes must be counts or presence, got {codes_mode:?}")));
    }

    let lexicon = match &lexicon_path {
        Some(p) => {
            let f = File::open(p)
                .map_err(|e| CliError::Input(format!("LexiconError: lexicon {}: {e}", p.display())))?;
            SubjectivityLexicon::load(BufReader::new(f))?
        }
        None => SubjectivityLexicon::sample(),
    };
    let corpus = load_corpus(&corpus_path)?;
    let ann = ann_path.as_deref().map(|p| load_ann(p, &corpus)).transpose()?;
    let tagger = load_tagger(tagger_path.as_deref(), g.seed)?;
    let (scorer, scorer_path) = load_scorer(&scorer_spec)?;
    let ctx = MetricContext {
        tagger: &tagger,
        scorer: scorer.as_dyn(),
        lexicon: &lexicon,
        templates,
    };

    let docs: Vec<_> = corpus.iter().collect();
    let vectors: Vec<FeatureVector> = docs
        .par_iter()
        .map(|d| feature_vector(d, &ctx).map_err(|e| (d.id.clone(), e)))
        .collect::<Result<_, _>>()
        .map_err(|(id, e)| {
            let err = CliError::from(e);
            match err {
                CliError::Compute(m) => CliError::Compute(format!("document {id}: {m}")),
                CliError::Input(m) => CliError::Input(format!("document {id}: {m}")),
                other => other,
            }
        })?;

    let mut header: Vec<String> = std::iter::once("doc_id").chain(FeatureVector::FIELDS).map(String::from).collect();
    if ann.is_some() {
        header.extend(code_feature_names().map(String::from));
    }
    let annotated = ann.as_ref().map(Annotations::documents).unwrap_or_default();
    let rows: Vec<Vec<String>> = docs
        .iter()
        .zip(&vectors)
        .map(|(d, fv)| {
            let mut r = vec![d.id.clone()];
            r.extend(fv.values().iter().map(|v| cell(*v)));
            if let Some(ann) = &ann {
                if annotated.contains(&d.id) {
                    let spans = ann.spans.iter().filter(|s| s.doc_id == d.id);
                    let counts = if codes_mode == "counts" {
                        code_count_features(spans)
                    } else {
                        code_presence_features(spans)
                    };
                    r.extend(counts.iter().map(usize::to_string));
                } else {
                    r.extend(std::iter::repeat_n(MISSING.to_string(), 7));
                }
            }
            r
        })
        .collect();

    let mut inputs: Vec<(&str, Option<&Path>)> = vec![
        ("corpus", Some(&corpus_path)),
        ("lexicon", lexicon_path.as_deref()),
        ("tagger", tagger_path.as_deref()),
        ("scorer", scorer_path.as_deref()),
    ];
    if let Some(p) = &ann_path {
        inputs.push(("annotations", Some(p)));
    }
    let mut hdr = header_lines("measure", g.seed, &inputs)?;
    hdr.push(format!(
        "settings scorer={} template_n={} template_min_count={} codes={}",
        scorer_spec.split(':').next().unwrap_or_default(),
        templates.n,
        templates.min_count,
        codes_mode
    ));
    emit(g.out.as_deref(), &hdr, &csv_bytes(&header, &rows)?)
}

pub fn tag_train(g: &Globals, a: &TagTrainArgs) -> Result<(), CliError> {
    let c = &g.conf;
    let tagged: Option<PathBuf> = c.pick(a.tagged.clone(), "tagged")?;
    let heldout: Option<PathBuf> = c.pick(a.heldout.clone(), "heldout")?;
    let epochs: usize = c.pick(a.epochs, "epochs")?.unwrap_or(TrainConfig::default().epochs);
    let out = g
        .out
        .clone()
        .ok_or_else(|| CliError::Input("tag-train needs --out for the model file".into()))?;
    let (train_set, eval_set) = match &tagged {
        Some(p) => {
            let train_set = parse_tagged_corpus(&read_text(p, "tagged corpus")?)?;
            let eval_set = match &heldout {
                Some(h) => parse_tagged_corpus(&read_text(h, "held-out corpus")?)?,
                None => Vec::new(),
            };
            (train_set, eval_set)
        }
        None => bundled_split(),
    };
    let cfg = TrainConfig {
        epochs,
        seed: g.seed,
        ..TrainConfig::default()
    };
    let model = train(&train_set, &cfg)?;
    if !eval_set.is_empty() {
        eprintln!("held-out accuracy: {:.4}", model.accuracy(&eval_set)?);
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&out, model.to_bytes()).map_err(|e| CliError::Input(format!("{}: {e}", out.display())))
}

fn annotator_spans(ann: &Annotations, annotator: &str) -> Vec<CharSpan> {
    ann.spans
        .iter()
        .filter(|s| s.annotator_id == annotator)
        .map(|s| CharSpan::new(s.doc_id.clone(), s.start, s.end))
        .collect()
}

pub fn agree(g: &Globals, a: &AgreeArgs) -> Result<(), CliError> {
    let c = &g.conf;
    let corpus_path: PathBuf = c.require(a.corpus.clone(), "corpus")?;
    let ann_path: PathBuf = c.require(a.annotations.clone(), "annotations")?;
    let spans_out: Option<PathBuf> = c.pick(a.spans_out.clone(), "spans_out")?;
    let corpus = load_corpus(&corpus_path)?;
    let ann = load_ann(&ann_path, &corpus)?;
    let rows = agreement_report(&ann)?;
    let mut body = Vec::new();
    write_agreement_csv(&mut body, &rows)?;
    let inputs = [("corpus", Some(corpus_path.as_path())), ("annotations", Some(ann_path.as_path()))];
    let hdr = header_lines("agree", g.seed, &inputs)?;
    emit(g.out.as_deref(), &hdr, &body)?;

    if let Some(path) = spans_out {
        let annotators = ann.annotators();
        let mut out_rows = Vec::new();
        for x in &annotators {
            for y in &annotators {
                if x == y {
                    continue;
                }
                let (sx, sy) = (annotator_spans(&ann, x), annotator_spans(&ann, y));
                let doc = span_precision(&corpus, &sx, &sy).ok();
                let par = span_precision_by_paragraph(&corpus, &sx, &sy).ok();
                out_rows.push(vec![x.clone(), y.clone(), cell(doc), cell(par)]);
            }
        }
        let header = ["annotator_a", "annotator_b", "precision", "precision_paragraph"].map(String::from);
        let hdr = header_lines("agree spans", g.seed, &inputs)?;
        emit(Some(&path), &hdr, &csv_bytes(&header, &out_rows)?)?;
    }
    Ok(())
}

/// Labels plus the files they came from.
type LabelSource = (BTreeMap<String, bool>, Vec<(&'static str, PathBuf)>);

/// Labels from a CSV or, failing that, majority votes from annotations.
fn resolve_labels(
    g: &Globals,
    labels: Option<PathBuf>,
    annotations: Option<PathBuf>,
    corpus: Option<PathBuf>,
) -> Result<LabelSource, CliError> {
    let c = &g.conf;
    let labels: Option<PathBuf> = c.pick(labels, "labels")?;
    if let Some(p) = labels {
        let map = read_labels_csv(open(&p, "labels")?)?;
        return Ok((map, vec![("labels", p)]));
    }
    let ann_path: Option<PathBuf> = c.pick(annotations, "annotations")?;
    let Some(ann_path) = ann_path else {
        return Err(CliError::Input("need --labels or --annotations with --corpus".into()));
    };
    let corpus_path: PathBuf = c.require(corpus, "corpus")?;
    let corpus = load_corpus(&corpus_path)?;
    let ann = load_ann(&ann_path, &corpus)?;
    Ok((ann.majority_labels(), vec![("corpus", corpus_path), ("annotations", ann_path)]))
}

/// Keeps rows that have a label.
fn labelled(table: FeatureTable, labels: &BTreeMap<String, bool>) -> Result<FeatureMatrix, CliError> {
    let (mut ids, mut rows, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (id, row) in table.ids.into_iter().zip(table.rows) {
        if let Some(&l) = labels.get(&id) {
            ids.push(id);
            rows.push(row);
            y.push(l);
        }
    }
    if ids.is_empty() {
        return Err(CliError::Input("no feature row has a label".into()));
    }
    Ok(FeatureMatrix::new(table.columns, ids, rows, y)?)
}

pub fn fit(g: &Globals, a: &FitArgs) -> Result<(), CliError> {
    let c = &g.conf;
    let features_path: PathBuf = c.require(a.features.clone(), "features")?;
    let mode: String = c.pick(a.mode.clone(), "fit_mode")?.unwrap_or_else(|| "predictive".into());
    let columns: Option<String> = c.pick(a.columns.clone(), "columns")?;
    let prune: f64 = c.pick(a.prune, "prune")?.unwrap_or(0.95);
    let (labels, label_inputs) = resolve_labels(g, a.labels.clone(), a.annotations.clone(), a.corpus.clone())?;
    let table = read_features_csv(open(&features_path, "features")?)?;
    let mut m = labelled(table, &labels)?;
    let code_names = code_feature_names();
    let selected: Option<Vec<String>> = match &columns {
        Some(s) => Some(parse_list(s, "--columns")?),
        None if mode == "inferential" && code_names.iter().all(|n| m.columns().iter().any(|c| c == n)) => {
            Some(code_names.iter().map(|s| s.to_string()).collect())
        }
        None => None,
    };
    if let Some(sel) = &selected {
        let names: Vec<&str> = sel.iter().map(String::as_str).collect();
        m = m.select(&names)?;
    }

    let mut inputs: Vec<(&str, Option<&Path>)> = vec![("features", Some(features_path.as_path()))];
    inputs.extend(label_inputs.iter().map(|(n, p)| (*n, Some(p.as_path()))));

    match mode.as_str() {
        "predictive" => {
            let defaults = PredictiveConfig::default();
            let c_grid = match c.pick::<String>(a.c_grid.clone(), "c_grid")? {
                Some(s) => parse_list(&s, "--c-grid")?,
                None => defaults.c_grid,
            };
            let cfg = PredictiveConfig {
                c_grid,
                folds: c.pick(a.folds, "folds")?.unwrap_or(defaults.folds),
                seed: g.seed,
            };
            let cv_log: Option<PathBuf> = c.pick(a.cv_log.clone(), "cv_log")?;
            let trained = train_slop_model(&m, prune, &cfg)?;
            let mut hdr = header_lines("fit", g.seed, &inputs)?;
            hdr.push(format!("rows {} prevalence {}", m.n_rows(), num(m.prevalence())));
            hdr.push(format!("dropped_constant {}", trained.dropped_constant.join(",")));
            hdr.push(format!("dropped_correlated {}", trained.dropped_correlated.join(",")));
            let mut body = Vec::new();
            trained.model.write_with_comments(&mut body, &hdr)?;
            emit_raw(g.out.as_deref(), &body)?;

            let mut header = vec!["c".to_string(), "mean_auprc".to_string()];
            header.extend((1..=cfg.folds).map(|k| format!("fold_{k}")));
            let rows: Vec<Vec<String>> = trained
                .cv
                .iter()
                .map(|s| {
                    let mut r = vec![num(s.c), num(s.mean_auprc)];
                    r.extend(s.fold_auprc.iter().copied().map(num));
                    r
                })
                .collect();
            let bytes = csv_bytes(&header, &rows)?;
            let mut hdr = header_lines("fit cv", g.seed, &inputs)?;
            hdr.push(format!("selected_c {}", num(trained.model.c_selected)));
            match cv_log {
                Some(p) => emit(Some(&p), &hdr, &bytes),
                None => {
                    eprint!("{}", String::from_utf8_lossy(&bytes));
                    Ok(())
                }
            }
        }
        "inferential" => {
            let bonferroni_m: Option<usize> = c.pick(a.bonferroni_m, "bonferroni_m")?;
            let (design, st) = standardize(&m)?;
            if !st.dropped.is_empty() {
                eprintln!("dropped constant columns: {}", st.dropped.join(","));
            }
            let cfg = InferentialConfig {
                bonferroni_m,
                ..InferentialConfig::default()
            };
            let rep = fit_inferential(&design, &cfg)?;
            let header = ["name", "beta", "se", "z", "p", "p_bonferroni", "significant", "ci_low", "ci_high"]
                .map(String::from);
            let rows: Vec<Vec<String>> = std::iter::once(&rep.intercept)
                .chain(&rep.rows)
                .map(|r| {
                    vec![
                        r.name.clone(),
                        num(r.beta),
                        num(r.se),
                        num(r.z),
                        num(r.p),
                        num(r.p_bonferroni),
                        u8::from(r.significant).to_string(),
                        num(r.ci_low),
                        num(r.ci_high),
                    ]
                })
                .collect();
            let mut hdr = header_lines("fit inferential", g.seed, &inputs)?;
            hdr.push(format!("rows {} prevalence {}", m.n_rows(), num(m.prevalence())));
            hdr.push(format!(
                "bonferroni_m {} iterations {} gradient_norm {:e} log_likelihood {}",
                rep.bonferroni_m,
                rep.iterations,
                rep.gradient_norm,
                num(rep.log_likelihood)
            ));
            emit(g.out.as_deref(), &hdr, &csv_bytes(&header, &rows)?)
        }
        other => Err(CliError::Input(format!(
            "--mode must be predictive or inferential, got {other:?}"
        ))),
    }
}

fn emit_raw(out: Option<&Path>, body: &[u8]) -> Result<(), CliError> {
    emit(out, &[], body)
}

pub fn predict(g: &Globals, a: &PredictArgs) -> Result<(), CliError> {
    let c = &g.conf;
    let model_path: PathBuf = c.require(a.model.clone(), "model")?;
    let features_path: PathBuf = c.require(a.features.clone(), "features")?;
    let model = FittedSlopModel::read(open(&model_path, "model")?)?;
    let table = read_features_csv(open(&features_path, "features")?)?;
    let rows: Vec<Vec<String>> = table
        .ids
        .iter()
        .zip(&table.rows)
        .map(|(id, r)| Ok(vec![id.clone(), num(model.predict_proba(&table.columns, r)?)]))
        .collect::<Result<_, SlopModelError>>()?;
    let hdr = header_lines(
        "predict",
        g.seed,
        &[("model", Some(&model_path)), ("features", Some(&features_path))],
    )?;
    let header = ["doc_id", "probability"].map(String::from);
    emit(g.out.as_deref(), &hdr, &csv_bytes(&header, &rows)?)
}

/// Text table of an inferential coefficient CSV.
fn coefficient_table(path: &Path) -> Result<String, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(open(path, "inference")?);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("inference {}: missing column {name}", path.display())))
    };
    let idx = [col("name")?, col("beta")?, col("ci_low")?, col("ci_high")?, col("p_bonferroni")?, col("significant")?];
    let mut out = format!(
        "{:<22} {:>9} {:>21} {:>10} {}\n",
        "feature", "beta", "95% CI", "p_adj", "sig"
    );
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64, CliError> {
            let s = rec.get(idx[i]).unwrap_or_default();
            s.parse()
                .map_err(|_| CliError::Input(format!("inference {}: bad number {s:?}", path.display())))
        };
        let ci = format!("[{:.3}, {:.3}]", f(2)?, f(3)?);
        let sig = if rec.get(idx[5]) == Some("1") { "*" } else { "" };
        out.push_str(&format!(
            "{:<22} {:>9.3} {:>21} {:>10.3e} {}\n",
            rec.get(idx[0]).unwrap_or_default(),
            f(1)?,
            ci,
            f(4)?,
            sig
        ));
    }
    Ok(out)
}

pub fn report(g: &Globals, a: &ReportArgs) -> Result<(), CliError> {
    let c = &g.conf;
    let pred_path: PathBuf = c.require(a.predictions.clone(), "predictions")?;
    let inference: Option<PathBuf> = c.pick(a.inference.clone(), "inference")?;
    let summary: Option<PathBuf> = c.pick(a.summary.clone(), "summary")?;
    let (labels, label_inputs) = resolve_labels(g, a.labels.clone(), a.annotations.clone(), a.corpus.clone())?;
    let table = read_features_csv(open(&pred_path, "predictions")?)?;
    let col = table
        .columns
        .iter()
        .position(|c| c == "probability")
        .ok_or_else(|| CliError::Input("predictions need a `probability` column".into()))?;
    let (mut scores, mut y) = (Vec::new(), Vec::new());
    for (id, row) in table.ids.iter().zip(&table.rows) {
        let Some(&l) = labels.get(id) else { continue };
        let s = row[col].ok_or_else(|| CliError::Input(format!("missing probability for `{id}`")))?;
        scores.push(s);
        y.push(l);
    }
    let curve = pr_curve(&scores, &y)?;
    let ap = auprc(&scores, &y)?;
    let positives = y.iter().filter(|&&b| b).count();
    let prevalence = positives as f64 / y.len() as f64;

    let mut inputs: Vec<(&str, Option<&Path>)> = vec![("predictions", Some(pred_path.as_path()))];
    inputs.extend(label_inputs.iter().map(|(n, p)| (*n, Some(p.as_path()))));
    if let Some(p) = &inference {
        inputs.push(("inference", Some(p.as_path())));
    }
    let hdr = header_lines("report", g.seed, &inputs)?;
    let header = ["threshold", "recall", "precision"].map(String::from);
    let rows: Vec<Vec<String>> = curve
        .iter()
        .map(|p| vec![num(p.threshold), num(p.recall), num(p.precision)])
        .collect();
    emit(g.out.as_deref(), &hdr, &csv_bytes(&header, &rows)?)?;

    let mut text = format!(
        "documents {}\npositives {}\nprevalence {:.4}\nauprc {:.4}\nauprc_minus_prevalence {:.4}\n",
        y.len(),
        positives,
        prevalence,
        ap,
        ap - prevalence
    );
    if let Some(p) = &inference {
        text.push('\n');
        text.push_str(&coefficient_table(p)?);
    }
    match summary {
        Some(p) => emit(Some(&p), &hdr, text.as_bytes()),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

pub fn judge_eval(g: &Globals, a: &JudgeArgs) -> Result<(), CliError> {
    let c = &g.conf;
    let defaults = JudgeConfig::default();
    let corpus_path: PathBuf = c.require(a.corpus.clone(), "corpus")?;
    let ann_path: PathBuf = c.require(a.annotations.clone(), "annotations")?;
    let mode: JudgeMode = match c.pick::<String>(a.mode.clone(), "judge_mode")? {
        Some(s) => s.parse().map_err(CliError::Input)?,
        None => defaults.mode,
    };
    let ks: Vec<usize> = match c.pick::<String>(a.k.clone(), "k")? {
        Some(s) => parse_list(&s, "--k")?,
        None => vec![0],
    };
    if ks.is_empty() {
        return Err(CliError::Input("--k lists no settings".into()));
    }
    let replay: Option<PathBuf> = c.pick(a.replay.clone(), "replay")?;
    let record: Option<PathBuf> = c.pick(a.record.clone(), "record")?;
    let guide_path: Option<PathBuf> = c.pick(a.guide.clone(), "guide")?;
    let timeout: f64 = c.pick(a.timeout, "timeout")?.unwrap_or(defaults.timeout.as_secs_f64());
    if !(timeout > 0.0 && timeout.is_finite()) {
        return Err(CliError::Input("--timeout must be a positive number of seconds".into()));
    }
    let base = JudgeConfig {
        endpoint: c.pick(a.endpoint.clone(), "endpoint")?.unwrap_or(defaults.endpoint.clone()),
        model: c.pick(a.model.clone(), "judge_model")?.unwrap_or(defaults.model.clone()),
        mode,
        timeout: Duration::from_secs_f64(timeout),
        max_retries: c.pick(a.max_retries, "max_retries")?.unwrap_or(defaults.max_retries),
        in_flight: c.pick(a.in_flight, "in_flight")?.unwrap_or(defaults.in_flight).max(1),
        exemplar_seed: g.seed,
        ..defaults
    };
    let guide = match &guide_path {
        Some(p) => read_text(p, "guide")?,
        None => DEFAULT_GUIDE.to_string(),
    };

    let corpus = load_corpus(&corpus_path)?;
    let ann = load_ann(&ann_path, &corpus)?;
    let exemplars = exemplars_from(&corpus, &ann);
    let docs: Vec<_> = ann.documents().into_iter().filter_map(|id| corpus.get(&id)).collect();

    let transport: Box<dyn Transport> = match &replay {
        Some(dir) => Box::new(ReplayTransport::new(dir.clone())),
        None => Box::new(HttpTransport::new(
            base.endpoint.clone(),
            base.timeout,
            std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        )),
    };
    let transport: Box<dyn Transport> = match &record {
        Some(dir) => Box::new(RecordingTransport::new(transport, dir.clone())),
        None => transport,
    };

    let mut binary_rows = Vec::new();
    let mut span_rows = Vec::new();
    let mut first_preds: Option<Vec<SpanPrediction>> = None;
    for &k in &ks {
        let cfg = JudgeConfig { k_shot: k, ..base.clone() };
        let prompts = docs
            .iter()
            .map(|d| build_prompt(d, mode, k, &exemplars, &guide, cfg.exemplar_seed))
            .collect::<Result<Vec<_>, _>>()?;
        let responses = call_judge_all(&cfg, transport.as_ref(), &prompts)
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let setting = format!("k={k}");
        match mode {
            JudgeMode::BinaryLabel => {
                let preds: BTreeMap<String, bool> = docs
                    .iter()
                    .zip(&responses)
                    .map(|(d, r)| (d.id.clone(), r.label.unwrap_or(false)))
                    .collect();
                binary_rows.push((setting, evaluate_binary(&preds, &ann)?));
            }
            JudgeMode::SpanExtract => {
                let preds = docs
                    .iter()
                    .zip(&responses)
                    .map(|(d, r)| span_prediction(r, d))
                    .collect::<Result<Vec<_>, _>>()?;
                let report = evaluate_spans(&preds, &ann)?;
                let overlap = first_preds.as_ref().map(|f| span_overlap_f1(f, &preds));
                if first_preds.is_none() {
                    first_preds = Some(preds);
                }
                span_rows.push((setting, report, overlap));
            }
        }
    }

    let mut body = Vec::new();
    match mode {
        JudgeMode::BinaryLabel => write_binary_csv(&mut body, &binary_rows)?,
        JudgeMode::SpanExtract => write_span_csv(&mut body, &span_rows)?,
    }
    let mut hdr = header_lines(
        "judge-eval",
        g.seed,
        &[
            ("corpus", Some(&corpus_path)),
            ("annotations", Some(&ann_path)),
            ("guide", guide_path.as_deref()),
        ],
    )?;
    hdr.push(format!("settings mode={mode} model={}", base.model));
    emit(g.out.as_deref(), &hdr, &body)
}
