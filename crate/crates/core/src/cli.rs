//! The `phone-intent` command line.
//!
//! Exit codes: 0 success, 1 user or input error, 2 internal error. Output
//! files are written only after all work succeeded, via rename.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::classifier::{load_model, save_model, train, ModelConfig, Prediction};
use crate::corpus::{corpus_stats, parse_corpus, tokenize_phones, Corpus, CorpusStats};
use crate::eval::{delta_sweep, run_cv, vocab_sizes, CvSpec, FoldMode, VocabSize, SWEEP_CAVEAT};
use crate::fsutil::write_atomic;
use crate::ngram::{NGramOrder, PriorMode, SmoothingSpec};

#[derive(Debug, Parser)]
#[command(
    name = "phone-intent",
    version,
    about = "Intent classification over phone n-grams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it to a file.
    Train(TrainArgs),
    /// Classify utterances with a trained model.
    Predict(PredictArgs),
    /// Leave-k-out cross-validation.
    EvalCv(EvalArgs),
    /// Cross-validate absolute discounting over a grid of deltas.
    Sweep(SweepArgs),
    /// Corpus statistics.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmoothingKind {
    #[value(name = "add1", alias = "add-one")]
    AddOne,
    #[value(name = "abs", alias = "absolute")]
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Empirical,
    Uniform,
}

impl From<PriorArg> for PriorMode {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Empirical => PriorMode::Empirical,
            PriorArg::Uniform => PriorMode::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    /// JSON Lines manifest.
    #[arg(short = 'i', long = "input")]
    pub input: PathBuf,
    /// Accept utterances with no phones.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// N-gram orders, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub orders: Vec<usize>,
    #[arg(long, value_enum, default_value = "add1")]
    pub smoothing: SmoothingKind,
    /// Absolute-discounting delta: one value for all orders or one per order.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    /// Combination weights, one per order (default: all 1).
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f64>,
    #[arg(long, value_enum, default_value = "empirical")]
    pub prior: PriorArg,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// Utterances held out per fold.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Labels never used as test utterances (still trained on).
    #[arg(long = "exclude-test", value_delimiter = ',')]
    pub exclude_test: Vec<String>,
    /// Draw this many random folds instead of enumerating all of them.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Seed for --sample.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub manifest: ManifestArgs,
    /// Model file to write.
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file written by `train`.
    #[arg(short = 'm', long = "model")]
    pub model: PathBuf,
    /// Manifest of utterances to classify.
    #[arg(
        short = 'i',
        long = "input",
        conflicts_with = "phones",
        required_unless_present = "phones"
    )]
    pub input: Option<PathBuf>,
    /// A single space-separated phone string.
    #[arg(long, allow_hyphen_values = true)]
    pub phones: Option<String>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub manifest: ManifestArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub manifest: ManifestArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub orders: Vec<usize>,
    /// Delta grid, comma separated.
    #[arg(long, value_delimiter = ',', required = true, num_args = 0..)]
    pub deltas: Vec<f64>,
    #[arg(long, value_enum, default_value = "empirical")]
    pub prior: PriorArg,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub manifest: ManifestArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub orders: Vec<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::User(m) => f.write_str(m),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

fn user(e: impl std::fmt::Display) -> CliError {
    CliError::User(e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(rendered.as_bytes())
            } else {
                stderr.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(
    cmd: &Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    match cmd {
        Command::Train(a) => cmd_train(a, stdout),
        Command::Predict(a) => cmd_predict(a, stdout),
        Command::EvalCv(a) => cmd_eval_cv(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout, stderr),
        Command::Inspect(a) => cmd_inspect(a, stdout, stderr),
    }
}

fn parse_orders(orders: &[usize]) -> Result<Vec<NGramOrder>, CliError> {
    if orders.is_empty() {
        return Err(user("--orders must list at least one order"));
    }
    orders
        .iter()
        .map(|&n| NGramOrder::new(n).map_err(user))
        .collect()
}

impl ModelArgs {
    fn to_config(&self) -> Result<ModelConfig, CliError> {
        let orders = parse_orders(&self.orders)?;
        let n = orders.len();
        let smoothing = match self.smoothing {
            SmoothingKind::AddOne => {
                if !self.delta.is_empty() {
                    return Err(user("--delta requires --smoothing abs"));
                }
                vec![SmoothingSpec::AddOne; n]
            }
            SmoothingKind::Absolute => {
                let deltas = match self.delta.len() {
                    0 => return Err(user("--smoothing abs requires --delta")),
                    1 => vec![self.delta[0]; n],
                    m if m == n => self.delta.clone(),
                    m => {
                        return Err(user(format!(
                            "--delta has {m} values for {n} orders (give one or one per order)"
                        )))
                    }
                };
                deltas
                    .into_iter()
                    .map(|d| SmoothingSpec::absolute_discount(d).map_err(user))
                    .collect::<Result<_, _>>()?
            }
        };
        let weights = if self.weights.is_empty() {
            vec![1.0; n]
        } else if self.weights.len() != n {
            return Err(user(format!(
                "--weights has {} values for {n} orders (length mismatch)",
                self.weights.len()
            )));
        } else {
            self.weights.clone()
        };
        let cfg = ModelConfig {
            orders,
            smoothing,
            prior_mode: self.prior.into(),
            weights,
        };
        cfg.validate().map_err(user)?;
        Ok(cfg)
    }
}

impl CvArgs {
    fn to_spec(&self) -> Result<CvSpec, CliError> {
        if self.k == 0 {
            return Err(user("--k must be at least 1"));
        }
        let mode = match (self.sample, self.seed) {
            (None, None) => FoldMode::Exhaustive,
            (Some(count), Some(seed)) => {
                if count == 0 {
                    return Err(user("--sample must be at least 1"));
                }
                FoldMode::RandomSample { count, seed }
            }
            (Some(_), None) => return Err(user("--sample requires an explicit --seed")),
            (None, Some(_)) => return Err(user("--seed is only meaningful with --sample")),
        };
        Ok(CvSpec::exhaustive(self.k)
            .excluding(self.exclude_test.iter().cloned())
            .with_mode(mode))
    }
}

impl ManifestArgs {
    fn load(&self) -> Result<Corpus, CliError> {
        parse_corpus(&self.input, !self.lenient).map_err(user)
    }
}

/// Resolves the output format: explicit flag, else `file_default` when
/// writing to a file, else text.
fn resolve_format(
    out: &OutputArgs,
    allowed: &[Format],
    file_default: Format,
) -> Result<Format, CliError> {
    let f = match (out.format, &out.output) {
        (Some(f), _) => f,
        (None, Some(_)) => file_default,
        (None, None) => Format::Text,
    };
    if !allowed.contains(&f) {
        return Err(user(
            format!("format {f:?} is not supported by this command").to_lowercase(),
        ));
    }
    Ok(f)
}

fn emit(out: &OutputArgs, body: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &out.output {
        Some(path) => write_output(path, body),
        None => stdout
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Internal(e.to_string())),
    }
}

fn write_output(path: &Path, body: &str) -> Result<(), CliError> {
    write_atomic(path, body.as_bytes()).map_err(|e| user(format!("{}: {e}", path.display())))
}

fn format_vocab_sizes(sizes: &[VocabSize]) -> String {
    sizes
        .iter()
        .map(|v| format!("  order {}: {} unique n-grams\n", v.order, v.unique_ngrams))
        .collect()
}

fn format_label_counts(stats: &CorpusStats) -> String {
    let mut s = String::new();
    for (label, n) in &stats.per_label {
        let _ = writeln!(s, "  {label}: {n}");
    }
    let _ = writeln!(s, "  total: {}", stats.total);
    s
}

fn cmd_train(a: &TrainArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = a.model.to_config()?;
    let corpus = a.manifest.load()?;
    let model = train(&corpus, &cfg).map_err(user)?;
    save_model(&model, &a.output).map_err(user)?;

    let mut s = format!("wrote {}\nlabels:\n", a.output.display());
    s.push_str(&format_label_counts(&corpus_stats(&corpus)));
    s.push_str("vocabulary:\n");
    for (order, v) in model.vocab_sizes() {
        let _ = writeln!(s, "  order {order}: {v} unique n-grams");
    }
    stdout
        .write_all(s.as_bytes())
        .map_err(|e| CliError::Internal(e.to_string()))
}

#[derive(Serialize)]
struct PredictRecord<'a> {
    id: &'a str,
    label: &'a str,
    /// Natural-log scores in model label order; `null` stands for -inf.
    scores: Vec<(&'a str, f64)>,
}

fn cmd_predict(a: &PredictArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let format = resolve_format(
        &a.out,
        &[Format::Text, Format::Json, Format::Csv],
        Format::Json,
    )?;
    let model = load_model(&a.model).map_err(user)?;
    let inputs: Vec<(String, Vec<_>)> = match (&a.input, &a.phones) {
        (Some(path), _) => parse_corpus(path, false)
            .map_err(user)?
            .utterances()
            .iter()
            .map(|u| (u.id.clone(), u.phones.clone()))
            .collect(),
        (None, Some(raw)) => vec![("phones".to_owned(), tokenize_phones(raw))],
        (None, None) => return Err(user("either --input or --phones is required")),
    };
    let predictions: Vec<(String, Prediction)> = inputs
        .into_iter()
        .map(|(id, toks)| {
            let p = model.predict(&toks);
            (id, p)
        })
        .collect();
    let records: Vec<PredictRecord> = predictions
        .iter()
        .map(|(id, p)| PredictRecord {
            id,
            label: &p.label,
            scores: p
                .scores
                .labels
                .iter()
                .map(String::as_str)
                .zip(p.scores.log_scores.iter().copied())
                .collect(),
        })
        .collect();

    let body = match format {
        Format::Text => {
            let mut s = String::new();
            for r in &records {
                let scores: Vec<String> = r
                    .scores
                    .iter()
                    .map(|(l, v)| format!("{l}={v:.6}"))
                    .collect();
                let _ = writeln!(s, "{}\t{}\t{}", r.id, r.label, scores.join(" "));
            }
            s
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&records)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["id".to_owned(), "label".to_owned()];
            header.extend(model.labels().iter().cloned());
            w.write_record(&header)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            for r in &records {
                let mut row = vec![r.id.to_owned(), r.label.to_owned()];
                row.extend(r.scores.iter().map(|(_, v)| v.to_string()));
                w.write_record(&row)
                    .map_err(|e| CliError::Internal(e.to_string()))?;
            }
            String::from_utf8(
                w.into_inner()
                    .map_err(|e| CliError::Internal(e.to_string()))?,
            )
            .map_err(|e| CliError::Internal(e.to_string()))?
        }
    };
    emit(&a.out, &body, stdout)
}

fn cmd_eval_cv(a: &EvalArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let format = resolve_format(
        &a.out,
        &[Format::Text, Format::Json, Format::Csv],
        Format::Json,
    )?;
    let cfg = a.model.to_config()?;
    let spec = a.cv.to_spec()?;
    let corpus = a.manifest.load()?;
    let report = run_cv(&corpus, &cfg, &spec).map_err(user)?;
    let body = match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "accuracy: {:.2} ({}/{}) over {} folds",
                report.accuracy,
                report.correct,
                report.total,
                report.folds.len()
            );
            s.push_str("confusion (rows gold, columns predicted):\n");
            let _ = writeln!(s, "  {}", report.confusion.labels.join("\t"));
            for (label, row) in report.confusion.labels.iter().zip(&report.confusion.counts) {
                let cells: Vec<String> = row.iter().map(usize::to_string).collect();
                let _ = writeln!(s, "  {label}\t{}", cells.join("\t"));
            }
            s.push_str("vocabulary (whole corpus):\n");
            s.push_str(&format_vocab_sizes(&report.vocab_sizes));
            s
        }
    };
    emit(&a.out, &body, stdout)
}

fn cmd_sweep(
    a: &SweepArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let format = resolve_format(
        &a.out,
        &[Format::Text, Format::Json, Format::Csv],
        Format::Csv,
    )?;
    let orders = parse_orders(&a.orders)?;
    if a.deltas.is_empty() {
        return Err(user("--deltas must list at least one value"));
    }
    let spec = a.cv.to_spec()?;
    let corpus = a.manifest.load()?;
    let table = delta_sweep(&corpus, &orders, &a.deltas, &spec, a.prior.into()).map_err(user)?;
    let body = match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
        Format::Text => {
            let mut s = format!("note: {SWEEP_CAVEAT}\norder\tdelta\taccuracy\n");
            for r in &table.rows {
                let _ = writeln!(s, "{}\t{}\t{:.4}", r.order, r.delta, r.accuracy);
            }
            s.push_str("best:\n");
            for r in &table.best {
                let _ = writeln!(
                    s,
                    "  order {}: delta {} (accuracy {:.4})",
                    r.order, r.delta, r.accuracy
                );
            }
            s
        }
    };
    if format != Format::Text {
        let _ = writeln!(stderr, "note: {SWEEP_CAVEAT}");
    }
    emit(&a.out, &body, stdout)
}

#[derive(Serialize)]
struct InspectReport {
    labels: CorpusStats,
    vocab_sizes: Vec<VocabSize>,
    /// Phone-sequence length -> number of utterances.
    length_histogram: BTreeMap<usize, usize>,
}

fn cmd_inspect(
    a: &InspectArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let format = resolve_format(&a.out, &[Format::Text, Format::Json], Format::Json)?;
    let orders = parse_orders(&a.orders)?;
    let corpus = a.manifest.load()?;
    if corpus.is_empty() {
        let _ = writeln!(
            stderr,
            "warning: {} contains no utterances",
            a.manifest.input.display()
        );
    }
    let mut length_histogram = BTreeMap::new();
    for u in corpus.utterances() {
        *length_histogram.entry(u.phones.len()).or_insert(0) += 1;
    }
    let report = InspectReport {
        labels: corpus_stats(&corpus),
        vocab_sizes: vocab_sizes(&corpus, &orders),
        length_histogram,
    };
    let body = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            s.push('\n');
            s
        }
        _ => {
            let mut s = String::from("labels:\n");
            s.push_str(&format_label_counts(&report.labels));
            s.push_str("vocabulary:\n");
            s.push_str(&format_vocab_sizes(&report.vocab_sizes));
            s.push_str("phone-sequence lengths:\n");
            for (len, n) in &report.length_histogram {
                let _ = writeln!(s, "  {len}: {n}");
            }
            s
        }
    };
    emit(&a.out, &body, stdout)
}
