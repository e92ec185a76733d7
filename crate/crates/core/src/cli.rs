//! The `textshift` command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime
//! failure. Outputs are written atomically and only after validation.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{self, Direction, PointMeta, TsneConfig};
use crate::cnn::{CnnConfig, CnnModel};
use crate::corpus::{load_corpus_checked, load_corpus_open, tokenize, Corpus, LabelSet, LoadOptions, SynthConfig};
use crate::embeddings::read_word2vec_binary;
use crate::error::Error;
use crate::fasttext::{FastTextConfig, FastTextModel};
use crate::ingest::{self, IngestConfig, SystemClock};
use crate::model::{Classifier, Model};
use crate::training::checkpoint::{load_model, save_model, Checkpoint, ScheduleState};
use crate::training::{evaluate, train_with, TrainConfig};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "textshift", version, about = "Cross-domain short-text classification")]
pub struct Cli {
    /// Append line-JSON run records to this file.
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,
    /// Worker threads; 1 forces the serial deterministic path.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print progress to standard error (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download labeled snippets from a search API.
    Ingest(IngestArgs),
    /// Generate a synthetic source/target corpus pair.
    Synth(SynthArgs),
    /// Train a classifier and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a labeled corpus.
    Evaluate(EvaluateArgs),
    /// Predict labels for raw text lines.
    Classify(ClassifyArgs),
    /// Compare word frequencies of two corpora.
    Compare(CompareArgs),
    /// Project CNN features of a corpus to 2-D with t-SNE.
    Project(ProjectArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// JSON file with the API settings.
    #[arg(long)]
    pub config: PathBuf,
    /// Label set file; each label is used as a search keyword.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_records: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON file with generator settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub keyword_rate: Option<f64>,
    #[arg(long)]
    pub src_per_class: Option<usize>,
    #[arg(long)]
    pub tgt_per_class: Option<usize>,
    #[arg(long)]
    pub out_src: PathBuf,
    #[arg(long)]
    pub out_tgt: PathBuf,
    /// Also write the label set.
    #[arg(long)]
    pub out_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Cnn,
    Fasttext,
}

/// JSON run configuration for `train`. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds training and model initialization when set.
    pub seed: Option<u64>,
    pub train: TrainConfig,
    pub cnn: CnnConfig,
    pub fasttext: FastTextConfig,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: KindArg,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pretrained word2vec binary vectors for the CNN.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Overrides the config file's seed; 0 when neither is given.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fixed-order gradient reduction.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Confusion matrix CSV.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    /// Per-class recall CSV.
    #[arg(long)]
    pub recall: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Text file, one document per line; standard input when omitted or "-".
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub topk: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    #[arg(long, default_value_t = 15)]
    pub top: usize,
    #[arg(long, default_value_t = crate::corpus::DEFAULT_MAX_LEN)]
    pub max_len: usize,
    /// Writes a_over_b.csv, b_over_a.csv and summary.txt here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with t-SNE settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: Error,
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

trait Stage<T> {
    fn config(self) -> CliResult<T>;
    fn data(self) -> CliResult<T>;
    fn runtime(self) -> CliResult<T>;
}

impl<T, E: Into<Error>> Stage<T> for std::result::Result<T, E> {
    fn config(self) -> CliResult<T> {
        self.map_err(|e| CliError { code: EXIT_CONFIG, error: e.into() })
    }

    fn data(self) -> CliResult<T> {
        self.map_err(|e| CliError { code: EXIT_DATA, error: e.into() })
    }

    fn runtime(self) -> CliResult<T> {
        self.map_err(|e| CliError { code: EXIT_RUNTIME, error: e.into() })
    }
}

/// Collected line-JSON records, written once at the end of a command.
struct RunLog {
    path: Option<PathBuf>,
    lines: Vec<String>,
}

impl RunLog {
    fn event(&mut self, value: Value) {
        if self.path.is_some() {
            self.lines.push(value.to_string());
        }
    }

    fn flush(&self) -> crate::Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        let mut text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(Error::io(path, e)),
        };
        for l in &self.lines {
            text.push_str(l);
            text.push('\n');
        }
        crate::io::write_atomic(path, text.as_bytes())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();

    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.error);
            e.code
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be positive".into())).config();
        }
        // A global pool can only be installed once per process.
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
    if let Some(p) = &cli.log {
        check_parent(p)?;
    }
    let mut log = RunLog {
        path: cli.log.clone(),
        lines: Vec::new(),
    };
    let forced_serial = cli.threads == Some(1);
    let result = match &cli.command {
        Command::Ingest(a) => cmd_ingest(a, &mut log),
        Command::Synth(a) => cmd_synth(a, &mut log),
        Command::Train(a) => cmd_train(a, forced_serial, &mut log),
        Command::Evaluate(a) => cmd_evaluate(a, &mut log),
        Command::Classify(a) => cmd_classify(a),
        Command::Compare(a) => cmd_compare(a, &mut log),
        Command::Project(a) => cmd_project(a, &mut log),
    };
    if result.is_ok() || !log.lines.is_empty() {
        log.flush().runtime()?;
    }
    result
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e)).config()?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
        .config()
}

/// Output paths must have an existing parent directory before work starts.
fn check_parent(path: &Path) -> CliResult {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if parent.is_dir() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("output directory {} does not exist", parent.display()))).config()
    }
}

fn check_input(path: &Path) -> CliResult {
    if path.is_file() || path == Path::new("-") {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"))).data()
    }
}

fn cmd_ingest(a: &IngestArgs, log: &mut RunLog) -> CliResult {
    let mut config: IngestConfig = read_json(&a.config)?;
    if let Some(n) = a.max_records {
        config.max_records_per_label = n;
    }
    config.validate().config()?;
    let labels = LabelSet::load(&a.labels).config()?;
    check_parent(&a.out)?;

    let records = ingest::fetch_all(&config, &labels, &SystemClock::default()).runtime()?;
    ingest::write_records(&records, &a.out).runtime()?;
    let mut per_label = serde_json::Map::new();
    for name in labels.names() {
        per_label.insert(name.clone(), json!(records.iter().filter(|r| &r.label == name).count()));
    }
    log.event(json!({"event": "ingest", "records": records.len(), "per_label": per_label}));
    println!("records\t{}", records.len());
    Ok(())
}

fn cmd_synth(a: &SynthArgs, log: &mut RunLog) -> CliResult {
    let mut config: SynthConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(c) = a.classes {
        config.num_classes = c;
    }
    if let Some(r) = a.keyword_rate {
        config.keyword_rate = r;
    }
    if let Some(n) = a.src_per_class {
        config.docs_per_class_source = n;
    }
    if let Some(n) = a.tgt_per_class {
        config.docs_per_class_target = n;
    }
    config.validate().config()?;
    for p in [Some(&a.out_src), Some(&a.out_tgt), a.out_labels.as_ref()].into_iter().flatten() {
        check_parent(p)?;
    }

    let s = crate::corpus::synth_generate(&config).runtime()?;
    s.source.save_jsonl(&a.out_src).runtime()?;
    s.target.save_jsonl(&a.out_tgt).runtime()?;
    if let Some(p) = &a.out_labels {
        s.source.label_set.save(p).runtime()?;
    }
    log.event(json!({
        "event": "synth",
        "seed": config.seed,
        "source_docs": s.source.len(),
        "target_docs": s.target.len(),
    }));
    println!("source\t{}\ntarget\t{}", s.source.len(), s.target.len());
    Ok(())
}

fn cmd_train(a: &TrainArgs, forced_serial: bool, log: &mut RunLog) -> CliResult {
    let mut rc: RunConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    let seed = a.seed.or(rc.seed).unwrap_or(0);
    rc.train.seed = seed;
    rc.cnn.seed = seed;
    rc.fasttext.seed = seed;
    if a.deterministic || forced_serial {
        rc.train.deterministic = true;
    }
    if let Some(e) = a.epochs {
        rc.train.max_epochs = e;
    }
    if let Some(p) = a.patience {
        rc.train.patience = p;
    }
    if let Some(b) = a.batch_size {
        rc.train.batch_size = b;
    }
    rc.train.validate().config()?;
    let max_len = match a.model {
        KindArg::Cnn => {
            rc.cnn.validate().config()?;
            rc.cnn.max_len
        }
        KindArg::Fasttext => {
            rc.fasttext.validate().config()?;
            rc.fasttext.max_len
        }
    };
    if a.embeddings.is_some() && a.model == KindArg::Fasttext {
        return Err(Error::InvalidConfig("--embeddings applies to the cnn model only".into())).config();
    }
    let labels = LabelSet::load(&a.labels).config()?;
    check_parent(&a.out)?;
    check_input(&a.train)?;
    check_input(&a.val)?;

    let pretrained = match &a.embeddings {
        Some(p) => {
            let w2v = read_word2vec_binary(p).data()?;
            if w2v.dim != rc.cnn.embed_dim {
                return Err(Error::DimensionMismatch {
                    expected: rc.cnn.embed_dim,
                    got: w2v.dim,
                })
                .config();
            }
            Some(w2v)
        }
        None => None,
    };
    let train = load_checked(&a.train, max_len, &labels)?;
    let val = load_checked(&a.val, max_len, &labels)?;

    let model = match a.model {
        KindArg::Cnn => Model::Cnn(CnnModel::from_corpus(rc.cnn.clone(), &train, pretrained.as_ref()).data()?),
        KindArg::Fasttext => Model::FastText(FastTextModel::from_corpus(rc.fasttext.clone(), &train).data()?),
    };
    log.event(json!({
        "event": "start",
        "command": "train",
        "model": model.kind().name(),
        "seed": seed,
        "deterministic": rc.train.deterministic,
        "train_docs": train.len(),
        "val_docs": val.len(),
        "config": rc,
    }));
    let outcome = train_with(model, &train, &val, &rc.train, |r| {
        log.event(json!({
            "event": "epoch",
            "epoch": r.epoch,
            "train_loss": r.train_loss,
            "train_accuracy": r.train_accuracy,
            "val_accuracy": r.val_accuracy,
        }));
    })
    .runtime()?;

    let selected = outcome.history.selected().cloned().expect("at least one epoch");
    let checkpoint = Checkpoint {
        model: outcome.model,
        train_config: Some(rc.train.clone()),
        optimizer: outcome.optimizer,
        schedule: outcome.schedule.as_ref().map(ScheduleState::from),
    };
    save_model(&checkpoint, &a.out).runtime()?;
    log.event(json!({
        "event": "summary",
        "seed": seed,
        "epochs_run": outcome.history.epochs.len(),
        "selected_epoch": selected.epoch,
        "train_accuracy": selected.train_accuracy,
        "val_accuracy": selected.val_accuracy,
    }));
    println!("selected_epoch\t{}", selected.epoch);
    println!("train_accuracy\t{:.6}", selected.train_accuracy);
    println!("val_accuracy\t{:.6}", selected.val_accuracy);
    Ok(())
}

fn load_checked(path: &Path, max_len: usize, labels: &LabelSet) -> CliResult<Corpus> {
    let opts = LoadOptions {
        max_len,
        ..LoadOptions::for_path(path)
    };
    let loaded = load_corpus_checked(path, opts, labels).data()?;
    if loaded.dropped_empty > 0 {
        log::warn!("{}: dropped {} empty documents", path.display(), loaded.dropped_empty);
    }
    if loaded.corpus.is_empty() {
        return Err(Error::EmptyCorpus).data();
    }
    Ok(loaded.corpus)
}

fn load_checkpoint(path: &Path) -> CliResult<Model> {
    check_input(path)?;
    Ok(load_model(path).data()?.model)
}

fn cmd_evaluate(a: &EvaluateArgs, log: &mut RunLog) -> CliResult {
    for p in [a.confusion.as_ref(), a.recall.as_ref()].into_iter().flatten() {
        check_parent(p)?;
    }
    let model = load_checkpoint(&a.model)?;
    check_input(&a.data)?;
    let corpus = load_checked(&a.data, model.max_len(), model.label_set())?;
    let eval = evaluate(&model, &corpus).runtime()?;
    if let Some(p) = &a.confusion {
        crate::io::write_atomic(p, &eval.confusion.to_csv(model.label_set()).runtime()?).runtime()?;
    }
    if let Some(p) = &a.recall {
        crate::io::write_atomic(p, &eval.confusion.recall_csv(model.label_set()).runtime()?).runtime()?;
    }
    log.event(json!({
        "event": "evaluate",
        "documents": corpus.len(),
        "accuracy": eval.accuracy,
        "recall": eval.recall,
    }));
    println!("accuracy\t{:.6}", eval.accuracy);
    Ok(())
}

fn cmd_classify(a: &ClassifyArgs) -> CliResult {
    if a.topk == 0 {
        return Err(Error::InvalidConfig("--topk must be positive".into())).config();
    }
    let model = load_checkpoint(&a.model)?;
    let k = a.topk.min(model.label_set().len());
    let reader: Box<dyn BufRead> = match &a.input {
        Some(p) if p != Path::new("-") => {
            let f = std::fs::File::open(p).map_err(|e| Error::io(p, e)).data()?;
            Box::new(std::io::BufReader::new(f))
        }
        _ => Box::new(std::io::stdin().lock()),
    };
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let mut skipped = 0usize;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<input>", e)).data()?;
        let tokens = tokenize(&line, model.max_len());
        if tokens.is_empty() {
            skipped += 1;
            continue;
        }
        let probs = model.predict(&tokens).runtime()?;
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&x, &y| probs[y].total_cmp(&probs[x]).then(x.cmp(&y)));
        let fields: Vec<String> = order[..k]
            .iter()
            .map(|&c| format!("{}\t{:.9}", model.label_set().name(c), probs[c]))
            .collect();
        writeln!(out, "{}", fields.join("\t")).map_err(|e| Error::io("<stdout>", e)).runtime()?;
    }
    out.flush().map_err(|e| Error::io("<stdout>", e)).runtime()?;
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} empty lines");
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs, log: &mut RunLog) -> CliResult {
    if a.max_len == 0 {
        return Err(Error::InvalidConfig("--max-len must be positive".into())).config();
    }
    if let Some(d) = &a.out_dir {
        if !d.is_dir() {
            return Err(Error::InvalidConfig(format!("{} is not a directory", d.display()))).config();
        }
    }
    check_input(&a.a)?;
    check_input(&a.b)?;
    let load = |p: &PathBuf| {
        let opts = LoadOptions {
            max_len: a.max_len,
            ..LoadOptions::for_path(p)
        };
        load_corpus_open(p, opts).map(|l| l.corpus).data()
    };
    let (ca, cb) = (load(&a.a)?, load(&a.b)?);
    let cmp = analysis::compare_domains(&ca, &cb, a.min_count).data()?;
    let ab = cmp.table_csv(Direction::AOverB, a.top).runtime()?;
    let ba = cmp.table_csv(Direction::BOverA, a.top).runtime()?;
    let summary = cmp.summary_line();
    if let Some(d) = &a.out_dir {
        crate::io::write_atomic(&d.join("a_over_b.csv"), &ab).runtime()?;
        crate::io::write_atomic(&d.join("b_over_a.csv"), &ba).runtime()?;
        crate::io::write_atomic(&d.join("summary.txt"), format!("{summary}\n").as_bytes()).runtime()?;
    }
    log.event(json!({
        "event": "compare",
        "pearson": cmp.pearson,
        "shared_tokens": cmp.shared.len(),
        "min_count": a.min_count,
    }));
    println!("# A/B\n{}", String::from_utf8_lossy(&ab));
    println!("# B/A\n{}", String::from_utf8_lossy(&ba));
    println!("{summary}");
    Ok(())
}

fn cmd_project(a: &ProjectArgs, log: &mut RunLog) -> CliResult {
    let mut config: TsneConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TsneConfig::default(),
    };
    config.seed = a.seed;
    if let Some(p) = a.perplexity {
        config.perplexity = p;
    }
    if let Some(i) = a.iterations {
        config.iterations = i;
    }
    check_parent(&a.out)?;
    let model = match load_checkpoint(&a.model)? {
        Model::Cnn(m) => m,
        Model::FastText(_) => {
            return Err(Error::BadModelKind {
                expected: "cnn",
                found: "fasttext",
            })
            .config()
        }
    };
    check_input(&a.input)?;
    let corpus = load_checked(&a.input, model.config.max_len, &model.labels)?;
    config.validate(corpus.len()).config()?;

    let features = analysis::corpus_features(&model, &corpus).runtime()?;
    let out = analysis::tsne(&features, &config).runtime()?;
    analysis::export_projection(&out.y, &PointMeta::from_corpus(&corpus), &a.out).runtime()?;
    log.event(json!({
        "event": "project",
        "seed": config.seed,
        "points": corpus.len(),
        "initial_kl": out.initial_kl(),
        "final_kl": out.final_kl(),
    }));
    println!("points\t{}\nfinal_kl\t{:.6}", corpus.len(), out.final_kl());
    Ok(())
}
