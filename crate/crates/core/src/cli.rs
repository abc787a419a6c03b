//! The `reintel` command line.
//!
//! Exit status is 0 on success, 1 for invalid arguments, configuration or
//! input data, and 2 for I/O and numeric failures. Commands that write
//! outputs also write a manifest with the tool version, the arguments, the
//! effective config and a SHA-256 digest of every input file.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::corpus::{
    generate_synthetic_corpus, load_split, missingness_report, synthetic_vectors, synthetic_word_lexicon,
    write_split, Split, SplitName,
};
use crate::error::{Error, Result};
use crate::eval::{auc, ensemble_average, read_submission, write_submission};
use crate::kv;
use crate::tokenization::{Lexicon, Strategy, Tokenizer, TokenizerSpec};
use crate::training::{self, rank_records, ExperimentConfig, RunRecord};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Config keys that name data files rather than hyperparameters.
const DATA_KEYS: [&str; 2] = ["train_data", "valid_data"];

#[derive(Debug, Parser)]
#[command(name = "reintel", version, about = "Unreliable-news classification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled synthetic corpus (and optionally matching word vectors).
    MakeSynthetic(MakeSyntheticArgs),
    /// Count missing values per field and split.
    ReportMissing(ReportMissingArgs),
    /// Train a tokenizer on the messages of a split.
    TrainTokenizer(TrainTokenizerArgs),
    /// Train one model from a config file.
    Train(TrainArgs),
    /// Train a grid of configs and print the results table.
    Sweep(SweepArgs),
    /// Score a split with a saved run.
    Predict(PredictArgs),
    /// Average several prediction files.
    Ensemble(EnsembleArgs),
    /// AUC of a prediction file against gold labels.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct MakeSyntheticArgs {
    #[arg(long)]
    records: usize,
    /// Probability that an unreliable record carries rumor-lexicon tokens.
    #[arg(long, default_value_t = 1.0)]
    signal: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write word vectors for the synthetic vocabulary here.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long, default_value_t = 48)]
    dim: usize,
    /// Also write a word-segmentation lexicon here.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportMissingArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, alias = "test")]
    public_test: Option<PathBuf>,
    #[arg(long)]
    private_test: Option<PathBuf>,
    /// Directory for report.kv and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainTokenizerArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value = "subword")]
    strategy: String,
    #[arg(long, default_value_t = 512)]
    vocab_size: usize,
    #[arg(long, default_value_t = 32)]
    max_len: usize,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `train_data` from the config.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Overrides `valid_data`; without either, a seeded slice of the training data is held out.
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Base config shared by every run.
    #[arg(long)]
    config: PathBuf,
    /// CSV whose header names config keys; each row is one run.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Directory written by `train`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EnsembleArgs {
    #[arg(long = "preds", required = true, num_args = 1..)]
    preds: Vec<PathBuf>,
    /// Comma-separated, one per prediction file.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    preds: PathBuf,
    /// CSV with `id` and `label` columns, such as a labelled split.
    #[arg(long)]
    gold: PathBuf,
}

/// Parses `args` (program name first) and runs the command. Returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::MakeSynthetic(a) => make_synthetic(a, out),
        Command::ReportMissing(a) => report_missing(a, out),
        Command::TrainTokenizer(a) => train_tokenizer(a, out),
        Command::Train(a) => train(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Ensemble(a) => ensemble(a, out),
        Command::Evaluate(a) => evaluate(a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Reproducibility record for one command invocation.
#[derive(Debug, Default)]
pub struct Manifest {
    command: String,
    args: Vec<(String, String)>,
    config: Vec<(String, String)>,
    inputs: Vec<PathBuf>,
}

impl Manifest {
    fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            ..Default::default()
        }
    }

    fn arg(mut self, key: &str, value: impl ToString) -> Self {
        self.args.push((key.to_string(), value.to_string()));
        self
    }

    fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    fn config(mut self, pairs: Vec<(String, String)>) -> Self {
        self.config = pairs;
        self
    }

    pub fn render(&self) -> Result<String> {
        let mut s = format!("tool = reintel {VERSION}\ncommand = {}\n", self.command);
        for (k, v) in &self.args {
            let _ = writeln!(s, "arg.{k} = {v}");
        }
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k} = {v}");
        }
        for p in &self.inputs {
            let _ = writeln!(s, "input.{} = sha256:{}", p.display(), sha256_file(p)?);
        }
        Ok(s)
    }

    fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()?).map_err(|e| Error::io(path, e))
    }
}

/// Manifest path for a single output file: `<file>.manifest`.
fn manifest_beside(file: &Path) -> PathBuf {
    let mut name = file.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest");
    file.with_file_name(name)
}

fn make_synthetic(a: MakeSyntheticArgs, out: &mut dyn Write) -> Result<()> {
    let split = generate_synthetic_corpus(a.records, a.signal, a.seed)?;
    write_split(&split, &a.out)?;
    let mut m = Manifest::new("make-synthetic")
        .arg("records", a.records)
        .arg("signal", a.signal)
        .arg("seed", a.seed)
        .arg("out", a.out.display());
    if let Some(p) = &a.vectors {
        synthetic_vectors(a.dim, a.seed).write(p)?;
        m = m.arg("vectors", p.display()).arg("dim", a.dim);
    }
    if let Some(p) = &a.lexicon {
        let text: String = synthetic_word_lexicon().iter().map(|w| format!("{w}\n")).collect();
        std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
        m = m.arg("lexicon", p.display());
    }
    m.write(&manifest_beside(&a.out))?;
    emit(out, &format!("wrote {} records to {}\n", split.len(), a.out.display()))
}

fn report_missing(a: ReportMissingArgs, out: &mut dyn Write) -> Result<()> {
    let mut splits = Vec::new();
    let mut m = Manifest::new("report-missing");
    for (path, name, labelled) in [
        (&a.train, SplitName::Train, true),
        (&a.public_test, SplitName::PublicTest, false),
        (&a.private_test, SplitName::PrivateTest, false),
    ] {
        if let Some(p) = path {
            splits.push(load_split(p, name, labelled)?);
            m = m.arg(name.as_str(), p.display()).input(p);
        }
    }
    if splits.is_empty() {
        return Err(Error::Input(
            "report-missing needs at least one of --train, --public-test, --private-test".into(),
        ));
    }
    let report = missingness_report(&splits);
    emit(out, &report.render_table())?;
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let p = dir.join("report.kv");
        std::fs::write(&p, report.to_kv()).map_err(|e| Error::io(&p, e))?;
        m.arg("out", dir.display()).write(&dir.join(MANIFEST_FILE))?;
    }
    Ok(())
}

fn train_tokenizer(a: TrainTokenizerArgs, out: &mut dyn Write) -> Result<()> {
    let strategy: Strategy = a.strategy.parse()?;
    let spec = TokenizerSpec {
        strategy,
        vocab_size: a.vocab_size,
        max_len: a.max_len,
    };
    let lexicon = match &a.lexicon {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Lexicon::new(text.lines().filter(|l| !l.trim().is_empty()))
        }
        None => Lexicon::default(),
    };
    let split = load_split(&a.train, SplitName::Train, false)?;
    let texts: Vec<String> = split.records.iter().filter_map(|r| r.message.clone()).collect();
    let tok = Tokenizer::train(spec, &texts, lexicon)?;
    tok.save(&a.out)?;
    let mut m = Manifest::new("train-tokenizer")
        .arg("strategy", strategy)
        .arg("vocab_size", a.vocab_size)
        .arg("max_len", a.max_len)
        .input(&a.train);
    if let Some(p) = &a.lexicon {
        m = m.input(p);
    }
    m.write(&a.out.join(MANIFEST_FILE))?;
    emit(
        out,
        &format!(
            "vocabulary of {} tokens ({} merges) written to {}\n",
            tok.vocab.len(),
            tok.merges().len(),
            a.out.display()
        ),
    )
}

/// Config plus the data paths named in it or on the command line.
struct Loaded {
    config: ExperimentConfig,
    train: PathBuf,
    valid: Option<PathBuf>,
}

fn load_config(path: &Path, train: Option<PathBuf>, valid: Option<PathBuf>) -> Result<Loaded> {
    let map = kv::read(path)?;
    let config = ExperimentConfig::from_kv(&map, &DATA_KEYS)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |k: &str| map.get(k).map(|v| base.join(v));
    let train = train.or_else(|| resolve("train_data")).ok_or_else(|| {
        Error::Config(format!(
            "no training data: pass --train or set train_data in {}",
            path.display()
        ))
    })?;
    Ok(Loaded {
        config,
        train,
        valid: valid.or_else(|| resolve("valid_data")),
    })
}

fn config_inputs(mut m: Manifest, config: &ExperimentConfig) -> Manifest {
    for p in [&config.lexicon, &config.embeddings].into_iter().flatten() {
        m = m.input(p);
    }
    m
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut loaded = load_config(&a.config, a.train, a.valid)?;
    if let Some(seed) = a.seed {
        loaded.config.seed = seed;
    }
    let train_split = load_split(&loaded.train, SplitName::Train, true)?;
    let valid_split = match &loaded.valid {
        Some(p) => Some(load_split(p, SplitName::PublicTest, true)?),
        None => None,
    };
    let mut outcome = training::train(&loaded.config, &train_split, valid_split.as_ref())?;
    outcome.save(&a.out)?;

    let mut m = Manifest::new("train")
        .arg("config", a.config.display())
        .arg("out", a.out.display())
        .config(loaded.config.to_pairs())
        .input(&a.config)
        .input(&loaded.train);
    if let Some(p) = &loaded.valid {
        m = m.input(p);
    }
    config_inputs(m, &loaded.config).write(&a.out.join(MANIFEST_FILE))?;

    let mut text = String::new();
    for e in &outcome.record.epochs {
        let auc = e.valid_auc.map(|v| format!("{v:.6}")).unwrap_or_else(|| "n/a".into());
        let _ = writeln!(text, "epoch {}  loss {:.6}  valid AUC {auc}", e.epoch, e.train_loss);
    }
    let _ = writeln!(text, "saved {} parameters to {}", outcome.model.num_params(), a.out.display());
    emit(out, &text)
}

/// Fixed-width table with columns Model, Epochs, Random Seed, Learning Rate, AUC.
pub fn emit_results_table(records: &[RunRecord]) -> String {
    let header = ["Model", "Epochs", "Random Seed", "Learning Rate", "AUC"];
    let mut rows: Vec<[String; 5]> = vec![header.map(String::from)];
    for r in records {
        let auc = match (&r.failure, r.final_auc()) {
            (Some(_), _) => "failed".to_string(),
            (None, Some(a)) => format!("{a:.6}"),
            (None, None) => "n/a".to_string(),
        };
        rows.push([
            r.config.name.clone(),
            r.config.epochs.to_string(),
            r.config.seed.to_string(),
            format!("{:.2e}", r.config.learning_rate),
            auc,
        ]);
    }
    let widths: Vec<usize> = (0..5)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let mut line = format!("{:<w$}", row[0], w = widths[0]);
        for c in 1..5 {
            let _ = write!(line, "  {:>w$}", row[c], w = widths[c]);
        }
        out.push_str(line.trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 8));
            out.push('\n');
        }
    }
    out
}

/// Reads a sweep grid: a CSV whose header names config keys.
fn read_grid(path: &Path, base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut grid = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        let pairs: Vec<(String, String)> = header
            .iter()
            .cloned()
            .zip(row.iter().map(str::to_string))
            .collect();
        grid.push(
            base.with_overrides(&pairs)
                .map_err(|e| Error::parse(path, i + 2, e.to_string()))?,
        );
    }
    Ok(grid)
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> Result<()> {
    let loaded = load_config(&a.config, a.train, a.valid)?;
    let grid = read_grid(&a.grid, &loaded.config)?;
    let train_split = load_split(&loaded.train, SplitName::Train, true)?;
    let valid_split = match &loaded.valid {
        Some(p) => Some(load_split(p, SplitName::PublicTest, true)?),
        None => None,
    };
    create_dir(&a.out)?;
    let records = training::sweep(&grid, &train_split, valid_split.as_ref(), Some(&a.out))?;
    let ranked = rank_records(&records);
    let table = emit_results_table(&ranked);

    let p = a.out.join("results.txt");
    std::fs::write(&p, &table).map_err(|e| Error::io(&p, e))?;
    let mut csv_text = String::from("run,name,model,epochs,seed,learning_rate,final_valid_auc,status\n");
    for (i, r) in records.iter().enumerate() {
        let _ = writeln!(
            csv_text,
            "{i},{},{},{},{},{},{},{}",
            r.config.name,
            r.config.model,
            r.config.epochs,
            r.config.seed,
            r.config.learning_rate,
            r.final_auc().map(|v| v.to_string()).unwrap_or_default(),
            if r.failure.is_some() { "failed" } else { "ok" }
        );
    }
    let p = a.out.join("sweep.csv");
    std::fs::write(&p, csv_text).map_err(|e| Error::io(&p, e))?;

    let mut m = Manifest::new("sweep")
        .arg("config", a.config.display())
        .arg("grid", a.grid.display())
        .arg("runs", grid.len())
        .config(loaded.config.to_pairs())
        .input(&a.config)
        .input(&a.grid)
        .input(&loaded.train);
    if let Some(p) = &loaded.valid {
        m = m.input(p);
    }
    config_inputs(m, &loaded.config).write(&a.out.join(MANIFEST_FILE))?;
    emit(out, &table)?;
    for (i, r) in records.iter().enumerate() {
        if let Some(f) = &r.failure {
            emit(out, &format!("run {i} ({}) failed: {f}\n", r.config.name))?;
        }
    }
    Ok(())
}

fn predict(a: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let split: Split = load_split(&a.input, SplitName::PrivateTest, false)?;
    let preds = training::predict(&a.run, &split)?;
    write_submission(&preds, &a.out)?;
    Manifest::new("predict")
        .arg("run", a.run.display())
        .input(&a.run.join(training::CHECKPOINT_FILE))
        .input(&a.input)
        .write(&manifest_beside(&a.out))?;
    emit(out, &format!("wrote {} predictions to {}\n", preds.len(), a.out.display()))
}

fn ensemble(a: EnsembleArgs, out: &mut dyn Write) -> Result<()> {
    let sets = a
        .preds
        .iter()
        .map(read_submission)
        .collect::<Result<Vec<_>>>()?;
    let avg = ensemble_average(&sets, a.weights.as_deref())?;
    write_submission(&avg, &a.out)?;
    let mut m = Manifest::new("ensemble");
    if let Some(w) = &a.weights {
        m = m.arg(
            "weights",
            w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        );
    }
    for p in &a.preds {
        m = m.input(p);
    }
    m.write(&manifest_beside(&a.out))?;
    emit(out, &format!("wrote {} averaged predictions to {}\n", avg.len(), a.out.display()))
}

/// `id -> label` from any CSV with `id` and `label` columns.
fn read_gold(path: &Path) -> Result<HashMap<String, u8>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::parse(path, 1, format!("missing column {name:?}")))
    };
    let (id_col, label_col) = (col("id")?, col("label")?);
    let mut gold = HashMap::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let raw = row.get(label_col).unwrap_or("").trim();
        let label = match raw {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::parse(path, line, format!("label {other:?} is not 0 or 1"))),
        };
        let id = row.get(id_col).unwrap_or("").to_string();
        if gold.insert(id.clone(), label).is_some() {
            return Err(Error::parse(path, line, format!("duplicate id {id}")));
        }
    }
    Ok(gold)
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let preds = read_submission(&a.preds)?;
    let gold = read_gold(&a.gold)?;
    let result = auc(&preds.with_labels(&gold)?)?;
    emit(out, &format!("{result}\n"))
}
