//! Command-line front end.
//!
//! Every subcommand reads its settings from flags, falling back to a flat
//! `key = value` config file given with `--config`. Text outputs start with
//! `#` lines naming the tool version, schema, seed and the SHA-256 of each
//! input file.

mod commands;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agreement::AgreementError;
use crate::corpus::{CorpusError, SCHEMA};
use crate::judge::JudgeError;
use crate::metrics::MetricsError;
use crate::slopmodel::SlopModelError;
use crate::tagger::TaggerError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failure of a command, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing input, schema violation, bad configuration. Exit 2.
    #[error("{0}")]
    Input(String),
    /// A computation could not produce a result. Exit 3.
    #[error("{0}")]
    Compute(String),
    /// The judge endpoint could not be reached or kept failing. Exit 4.
    #[error("{0}")]
    Network(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Compute(_) => 3,
            CliError::Network(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("I/O error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("CSV error: {e}"))
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Input(format!("CorpusError: {e}"))
    }
}

impl From<TaggerError> for CliError {
    fn from(e: TaggerError) -> Self {
        CliError::Input(format!("TaggerError: {e}"))
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Lexicon { .. } => CliError::Input(format!("LexiconError: {e}")),
            MetricsError::Corpus(_)
            | MetricsError::Tagger(_)
            | MetricsError::Csv(_)
            | MetricsError::Io(_)
            | MetricsError::MissingScores(_)
            | MetricsError::Scorer(_) => CliError::Input(format!("MetricsError: {e}")),
            _ => CliError::Compute(format!("MetricsError: {e}")),
        }
    }
}

impl From<AgreementError> for CliError {
    fn from(e: AgreementError) -> Self {
        CliError::Compute(format!("AgreementError: {e}"))
    }
}

impl From<SlopModelError> for CliError {
    fn from(e: SlopModelError) -> Self {
        use SlopModelError::*;
        match e {
            Format { .. } | Csv(_) | Io(_) | MissingColumn(_) | DuplicateColumn(_) | MissingLabel(_) | Shape(_)
            | InvalidParameter(_) => CliError::Input(format!("SlopModelError: {e}")),
            _ => CliError::Compute(format!("SlopModelError: {e}")),
        }
    }
}

impl From<JudgeError> for CliError {
    fn from(e: JudgeError) -> Self {
        use JudgeError::*;
        match e {
            Timeout | HttpError(_) | Connection(_) | RetriesExhausted { .. } => {
                CliError::Network(format!("JudgeError: {e}"))
            }
            ParseError(_) => CliError::Compute(format!("JudgeError: {e}")),
            _ => CliError::Input(format!("JudgeError: {e}")),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "slopscope", version, about = "Measure and model slop in text")]
pub struct Cli {
    /// Flat key=value configuration file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-document work (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute automatic metrics for every document of a corpus.
    Measure(MeasureArgs),
    /// Train the part-of-speech tagger.
    TagTrain(TagTrainArgs),
    /// Agreement between annotators.
    Agree(AgreeArgs),
    /// Fit a slop classifier or a significance model.
    Fit(FitArgs),
    /// Score documents with a fitted model.
    Predict(PredictArgs),
    /// Evaluate an LLM judge against human annotations.
    JudgeEval(JudgeArgs),
    /// Precision-recall curve and AUPRC of predictions.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Subjectivity lexicon; a small built-in list when absent.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Tagger model from `tag-train`; the bundled model when absent.
    #[arg(long)]
    pub tagger: Option<PathBuf>,
    /// `builtin-trigram`, `builtin-trigram:<corpus>` or `external:<scores.tsv>`.
    #[arg(long)]
    pub scorer: Option<String>,
    #[arg(long)]
    pub template_n: Option<usize>,
    #[arg(long)]
    pub template_min_count: Option<usize>,
    /// Annotations; adds one column per collapsed code.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// `counts` or `presence`.
    #[arg(long)]
    pub codes: Option<String>,
}

#[derive(Debug, Args)]
pub struct TagTrainArgs {
    /// Tagged training text (`word_TAG` tokens); the bundled split when absent.
    #[arg(long)]
    pub tagged: Option<PathBuf>,
    /// Tagged evaluation text.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AgreeArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Also write pairwise span precision to this file.
    #[arg(long)]
    pub spans_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// `doc_id,label` CSV.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Majority-vote labels from annotations (needs --corpus).
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// `predictive` or `inferential`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Comma-separated feature columns to use.
    #[arg(long)]
    pub columns: Option<String>,
    /// Comma-separated C values.
    #[arg(long)]
    pub c_grid: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Correlation threshold for pruning.
    #[arg(long)]
    pub prune: Option<f64>,
    /// Number of tests for the Bonferroni correction.
    #[arg(long)]
    pub bonferroni_m: Option<usize>,
    /// Cross-validation log destination.
    #[arg(long)]
    pub cv_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `doc_id,probability` CSV from `predict`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Coefficient table from `fit --mode inferential`.
    #[arg(long)]
    pub inference: Option<PathBuf>,
    /// Summary destination; standard error when absent.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct JudgeArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent to the endpoint.
    #[arg(long)]
    pub model: Option<String>,
    /// `binary` or `span`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Comma-separated shot counts, e.g. `0,1,3,5`.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub in_flight: Option<usize>,
    /// Serve responses from a directory instead of the network.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Store every response under this directory.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Guide text replacing the built-in one.
    #[arg(long)]
    pub guide: Option<PathBuf>,
    /// Seconds per request.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub max_retries: Option<u32>,
}

/// Flat `key = value` settings. Keys are case-sensitive; `-` and `_` are
/// interchangeable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("config line {}: expected key = value", i + 1)))?;
            values.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&key.replace('-', "_")).map(String::as_str)
    }

    /// The flag if given, else the parsed config value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Input(format!("config key `{key}`: {e}")))
            })
            .transpose()
    }

    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.pick(flag, key)?
            .ok_or_else(|| CliError::Input(format!("missing required setting `--{}`", key.replace('_', "-"))))
    }
}

/// Resolved global settings.
#[derive(Debug, Clone)]
pub struct Globals {
    pub conf: ConfigFile,
    pub seed: u64,
    pub jobs: usize,
    pub out: Option<PathBuf>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Provenance lines (without the leading `# `).
pub fn header_lines(command: &str, seed: u64, inputs: &[(&str, Option<&Path>)]) -> Result<Vec<String>, CliError> {
    let mut lines = vec![
        format!("slopscope {VERSION}"),
        format!("schema {SCHEMA}"),
        format!("command {command}"),
        format!("seed {seed}"),
    ];
    for (name, path) in inputs {
        match path {
            Some(p) => lines.push(format!("input {name} sha256 {}", sha256_file(p)?)),
            None => lines.push(format!("input {name} builtin")),
        }
    }
    Ok(lines)
}

/// Writes header comments then `body` to `out`, or to standard output.
pub fn emit(out: Option<&Path>, header: &[String], body: &[u8]) -> Result<(), CliError> {
    let mut buf = Vec::with_capacity(body.len() + 256);
    for h in header {
        writeln!(buf, "# {h}")?;
    }
    buf.extend_from_slice(body);
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, buf).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&buf)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Parses arguments and runs one command.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            let _ = e.print();
            CliError::Input(String::new())
        }
        _ => CliError::Input(e.to_string()),
    })?;
    execute(cli)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let conf = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let globals = Globals {
        seed: conf.pick(cli.seed, "seed")?.unwrap_or(0),
        jobs: conf.pick(cli.jobs, "jobs")?.unwrap_or(0),
        out: conf.pick(cli.out.clone(), "out")?,
        conf,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(globals.jobs)
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Measure(a) => commands::measure(&globals, a),
        Command::TagTrain(a) => commands::tag_train(&globals, a),
        Command::Agree(a) => commands::agree(&globals, a),
        Command::Fit(a) => commands::fit(&globals, a),
        Command::Predict(a) => commands::predict(&globals, a),
        Command::JudgeEval(a) => commands::judge_eval(&globals, a),
        Command::Report(a) => commands::report(&globals, a),
    })
}

/// Process entry point.
pub fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let wants_info = args.iter().any(|a| a == "--help" || a == "-h" || a == "--version" || a == "-V");
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(m)) if m.is_empty() && wants_info => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_values_and_precedence() {
        let c = ConfigFile::parse("# comment\nseed = 7\ntemplate-n=3\n\ncorpus = a b.jsonl\n").unwrap();
        assert_eq!(c.pick::<u64>(None, "seed").unwrap(), Some(7));
        assert_eq!(c.pick(Some(9u64), "seed").unwrap(), Some(9));
        assert_eq!(c.pick::<usize>(None, "template_n").unwrap(), Some(3));
        assert_eq!(c.get("corpus"), Some("a b.jsonl"));
        assert!(c.pick::<u64>(None, "corpus").is_err());
        assert!(matches!(c.require::<String>(None, "lexicon"), Err(CliError::Input(_))));
        assert!(ConfigFile::parse("novalue\n").is_err());
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(JudgeError::Timeout).exit_code(), 4);
        assert_eq!(CliError::from(SlopModelError::SingleClass).exit_code(), 3);
        assert_eq!(CliError::from(SlopModelError::MissingColumn("x".into())).exit_code(), 2);
        let lex = MetricsError::Lexicon {
            line: 1,
            msg: "x".into(),
        };
        let e = CliError::from(lex);
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().starts_with("LexiconError"));
    }

    #[test]
    fn header_names_builtin_inputs() {
        let h = header_lines("measure", 5, &[("lexicon", None)]).unwrap();
        assert_eq!(h[3], "seed 5");
        assert_eq!(h[4], "input lexicon builtin");
        assert!(h[0].starts_with("slopscope "));
    }
}
