//! The `entail-rank` command line.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 runtime or scorer
//! failure. Errors go to stderr as a single line
//! `error[input]: ...` or `error[runtime]: ...`.

use std::ffi::OsString;
use std::fmt::{self, Display, Write as _};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use crate::attention::{
    cross_attention_mass, cross_fraction_table, layer_mean_table, layer_trend, token_attention_slice, AttentionExport,
    AttnError, CrossMassProfile,
};
use crate::data::{
    load_nli_corpus, load_sc_release, load_sc_triples, write_canonical_nli, write_canonical_triples, CorpusDescriptor,
    CorpusFormat, Split, TripleDataset, TripleFormat,
};
use crate::finetune::{run_pipeline, CheckpointStore, TrainConfig, TrainError};
use crate::nli::entailment_prob;
use crate::rank_eval::{
    evaluate_sc, mine_failures, rank_candidates, ratio_histogram, EvalError, EvalReport, DEFAULT_BINS,
    DEFAULT_FAILURE_THRESHOLD,
};
use crate::scorer::{Backend, EntailmentScorer, ScoreError, Scorer, ScorerConfig, DEFAULT_MAX_LEN};

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "entail-rank",
    version,
    about = "Entailment-based summary ranking and NLI scorer evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert an upstream corpus to canonical JSONL.
    Convert(ConvertArgs),
    /// Fine-tune in stages from a TOML config.
    Train(TrainArgs),
    /// Pairwise accuracy of a scorer on summary-correctness triples.
    Evaluate(EvaluateArgs),
    /// Rank candidate summaries of one document.
    Rank(RankArgs),
    /// Ratio histogram and failure list of an evaluation report.
    AnalyzeRatios(AnalyzeRatiosArgs),
    /// Cross-segment attention mass of exported attention tensors.
    AnalyzeAttention(AnalyzeAttentionArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    MnliTsv,
    AnliJsonl,
    CanonicalJsonl,
    /// Summary-correctness release (JSON array or JSONL).
    ScRelease,
    /// Canonical triple JSONL.
    ScJsonl,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: InputFormat,
    #[arg(long)]
    pub output: PathBuf,
    /// Corpus name; defaults to the input file stem.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScorerArgs {
    #[arg(long, default_value = "lookup")]
    pub scorer: String,
    /// Checkpoint directory for `--scorer model`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Score table (JSONL) for `--scorer lookup`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    pub max_len: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
}

impl ScorerArgs {
    fn config(&self, emit_attentions: bool) -> Result<ScorerConfig, CliError> {
        Ok(ScorerConfig {
            backend: self.scorer.parse::<Backend>().map_err(CliError::input)?,
            checkpoint_ref: self.checkpoint.clone(),
            table: self.table.clone(),
            max_len: self.max_len,
            batch_size: self.batch_size,
            emit_attentions,
        })
    }

    fn build(&self, emit_attentions: bool) -> Result<Scorer, CliError> {
        let config = self.config(emit_attentions)?;
        config.validate().map_err(CliError::input)?;
        Scorer::from_config(&config).map_err(score_error)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Checkpoint store directory.
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub base_model: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub max_grad_norm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[arg(long)]
    pub triples: PathBuf,
    #[arg(long, value_enum, default_value = "sc-jsonl")]
    pub triples_format: InputFormat,
    /// Where to write the JSON report.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[arg(long, conflicts_with = "document_file", required_unless_present = "document_file")]
    pub document: Option<String>,
    #[arg(long)]
    pub document_file: Option<PathBuf>,
    /// One candidate summary per line; blank lines are skipped.
    #[arg(long)]
    pub candidates: PathBuf,
    /// Write one attention export per candidate into this directory.
    #[arg(long)]
    pub emit_attentions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeRatiosArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_FAILURE_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub incorrect_only: bool,
    /// Also write histogram.tsv, failures.txt and outcomes.tsv here.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeAttentionArgs {
    /// An attention export, or a directory of `*.json` exports.
    #[arg(long)]
    pub input: PathBuf,
    /// Print the head-averaged attention row of this query position.
    #[arg(long, requires = "layer")]
    pub query: Option<usize>,
    #[arg(long)]
    pub layer: Option<usize>,
    /// Also write cross_fraction.tsv and layer_mean.tsv here.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(e: impl Display) -> Self {
        Self {
            code: EXIT_INPUT,
            message: e.to_string(),
        }
    }

    pub fn runtime(e: impl Display) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: e.to_string(),
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.code == EXIT_INPUT { "input" } else { "runtime" };
        let one_line = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error[{kind}]: {one_line}")
    }
}

fn score_error(e: ScoreError) -> CliError {
    match e {
        ScoreError::Config(_) => CliError::input(e),
        _ => CliError::runtime(e),
    }
}

fn eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::Scorer(_) | EvalError::ScoreCount { .. } | EvalError::Probability(_) => CliError::runtime(e),
        _ => CliError::input(e),
    }
}

fn train_error(e: &TrainError) -> i32 {
    match e {
        TrainError::Config(_)
        | TrainError::EmptyCorpus { .. }
        | TrainError::EmptyEval
        | TrainError::UnknownBase(_)
        | TrainError::Data(_) => EXIT_INPUT,
        _ => EXIT_RUNTIME,
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::input(format!("output path {} has no file name", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = fs::write(&tmp, contents).and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "corpus".to_string(), |s| s.to_string_lossy().into_owned())
}

fn load_triples(path: &Path, format: InputFormat) -> Result<TripleDataset, CliError> {
    match format {
        InputFormat::ScRelease => load_sc_release(path),
        InputFormat::ScJsonl => load_sc_triples(path, TripleFormat::CanonicalJsonl),
        other => {
            return Err(CliError::input(format!(
                "{} is not a triple format",
                other.to_possible_value().unwrap().get_name()
            )))
        }
    }
    .map_err(CliError::input)
}

pub fn cmd_convert(args: &ConvertArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let nli_format = match args.format {
        InputFormat::MnliTsv => Some(CorpusFormat::MnliTsv),
        InputFormat::AnliJsonl => Some(CorpusFormat::AnliJsonl),
        InputFormat::CanonicalJsonl => Some(CorpusFormat::CanonicalJsonl),
        InputFormat::ScRelease | InputFormat::ScJsonl => None,
    };
    let tmp = args.output.with_extension("convert-tmp");
    let (records, dropped) = match nli_format {
        Some(format) => {
            let name = args.name.clone().unwrap_or_else(|| file_stem(&args.input));
            let desc = CorpusDescriptor::new(name, &args.input, format, Split::Train);
            let loaded = load_nli_corpus(&desc).map_err(CliError::input)?;
            write_canonical_nli(&tmp, &loaded.examples).map_err(CliError::input)?;
            (loaded.examples.len(), loaded.stats.dropped)
        }
        None => {
            let dataset = load_triples(&args.input, args.format)?;
            write_canonical_triples(&tmp, &dataset.triples).map_err(CliError::input)?;
            (dataset.len(), 0)
        }
    };
    fs::rename(&tmp, &args.output)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", args.output.display())))?;
    writeln!(out, "records: {records}, dropped: {dropped}").map_err(CliError::runtime)
}

fn resolve_relative(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

/// Reads a training config; relative corpus paths resolve against the
/// config file's directory.
pub fn load_train_config(args: &TrainArgs) -> Result<TrainConfig, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = TrainConfig::from_toml(&text).map_err(CliError::input)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    for stage in &mut config.stages {
        for corpus in &mut stage.corpora {
            resolve_relative(base, &mut corpus.path);
        }
    }
    resolve_relative(base, &mut config.eval_corpus.path);
    if let Some(v) = &args.base_model {
        config.base_model_ref = v.clone();
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.epochs {
        config.epochs_per_stage = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.max_len {
        config.max_len = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.weight_decay {
        config.weight_decay = v;
    }
    if let Some(v) = args.max_grad_norm {
        config.max_grad_norm = v;
    }
    config.validate().map_err(CliError::input)?;
    Ok(config)
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = load_train_config(args)?;
    let store = CheckpointStore::open(&args.store).map_err(CliError::input)?;
    let (done, failure) = match run_pipeline(&config, &store) {
        Ok(done) => (done, None),
        Err(e) => (e.completed, Some((e.failed_stage, e.source))),
    };
    for ck in &done {
        let acc = ck.metrics.dev_accuracy_per_epoch.last().copied().unwrap_or(0.0);
        writeln!(
            out,
            "{}\tparent={}\tdev accuracy = {:.2}%",
            ck.id,
            ck.parent_id.as_deref().unwrap_or("-"),
            acc * 100.0
        )
        .map_err(CliError::runtime)?;
    }
    match failure {
        None => Ok(()),
        Some((stage, source)) => Err(CliError {
            code: train_error(&source),
            message: format!("stage {stage:?} failed: {source}"),
        }),
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let dataset = load_triples(&args.triples, args.triples_format)?;
    let scorer = args.scorer.build(false)?;
    let label = scorer.label();
    let mut report = evaluate_sc(&scorer, &dataset, &label).map_err(eval_error)?;
    let s = &args.scorer;
    report.provenance.insert("backend".into(), s.scorer.clone());
    report.provenance.insert("max_len".into(), s.max_len.to_string());
    report.provenance.insert("batch_size".into(), s.batch_size.to_string());
    if let Some(p) = &s.checkpoint {
        report.provenance.insert("checkpoint".into(), p.display().to_string());
    }
    if let Some(p) = &s.table {
        report.provenance.insert("table".into(), p.display().to_string());
    }
    write_atomic(&args.output, &(report.to_json() + "\n"))?;
    writeln!(out, "{}", report.summary_line()).map_err(CliError::runtime)
}

pub fn cmd_rank(args: &RankArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let document = match (&args.document, &args.document_file) {
        (Some(d), _) => d.clone(),
        (None, Some(p)) => {
            fs::read_to_string(p).map_err(|e| CliError::input(format!("cannot read {}: {e}", p.display())))?
        }
        (None, None) => return Err(CliError::input("a document is required")),
    };
    let text = fs::read_to_string(&args.candidates)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.candidates.display())))?;
    let candidates: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if candidates.is_empty() {
        return Err(CliError::input("no candidates"));
    }
    if document.trim().is_empty() {
        return Err(CliError::input("document is empty"));
    }
    let scorer = args.scorer.build(args.emit_attentions.is_some())?;
    let result = rank_candidates(&scorer, &document, &candidates).map_err(eval_error)?;

    let mut table = String::from("rank\tindex\tp_entail\tchosen\tcandidate\n");
    for (rank, &i) in result.ordering.iter().enumerate() {
        let mark = if i == result.chosen_index { "*" } else { "" };
        writeln!(
            table,
            "{}\t{}\t{:.6}\t{}\t{}",
            rank + 1,
            i,
            entailment_prob(&result.scores[i]),
            mark,
            candidates[i]
        )
        .unwrap();
    }
    out.write_all(table.as_bytes()).map_err(CliError::runtime)?;

    if let (Some(dir), Scorer::Model(model)) = (&args.emit_attentions, &scorer) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
        for (i, c) in candidates.iter().enumerate() {
            let export = model.attention_export(&document, c).map_err(score_error)?;
            let json = serde_json::to_string(&export).map_err(CliError::runtime)?;
            write_atomic(&dir.join(format!("candidate-{i}.json")), &json)?;
        }
    }
    Ok(())
}

pub fn cmd_analyze_ratios(args: &AnalyzeRatiosArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let report = EvalReport::read(&args.report).map_err(CliError::input)?;
    let histogram = ratio_histogram(&report.outcomes, args.bins, args.incorrect_only).map_err(eval_error)?;
    let failures = mine_failures(&report.outcomes, args.threshold).map_err(eval_error)?;
    let failure_list: String = failures.iter().map(|id| format!("{id}\n")).collect();

    let mut text = histogram.table();
    writeln!(text, "total\t{}", histogram.total).unwrap();
    writeln!(text, "failures below {}: {}", args.threshold, failures.len()).unwrap();
    text.push_str(&failure_list);
    out.write_all(text.as_bytes()).map_err(CliError::runtime)?;

    if let Some(dir) = &args.output_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
        write_atomic(&dir.join("histogram.tsv"), &histogram.table())?;
        write_atomic(&dir.join("failures.txt"), &failure_list)?;
        write_atomic(&dir.join("outcomes.tsv"), &report.outcomes_table())?;
    }
    Ok(())
}

fn attention_inputs(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !input.is_dir() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", input.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::input(format!("no attention exports in {}", input.display())));
    }
    Ok(files)
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Per-head and per-layer means over several profiles of the same shape,
/// skipping undefined entries.
pub fn average_profiles(profiles: &[CrossMassProfile]) -> Result<CrossMassProfile, AttnError> {
    let first = &profiles[0];
    let shape: Vec<usize> = first.cross_fraction.iter().map(Vec::len).collect();
    for p in profiles {
        if p.cross_fraction.iter().map(Vec::len).collect::<Vec<_>>() != shape {
            return Err(AttnError::Read {
                path: "attention exports".into(),
                message: "exports differ in layer or head count".into(),
            });
        }
    }
    let cross_fraction: Vec<Vec<Option<f64>>> = shape
        .iter()
        .enumerate()
        .map(|(l, &heads)| {
            (0..heads)
                .map(|h| mean_of(profiles.iter().map(|p| p.cross_fraction[l][h])))
                .collect()
        })
        .collect();
    let per_layer_mean = (0..shape.len())
        .map(|l| mean_of(profiles.iter().map(|p| p.per_layer_mean[l])))
        .collect();
    Ok(CrossMassProfile {
        cross_fraction,
        per_layer_mean,
    })
}

pub fn cmd_analyze_attention(args: &AnalyzeAttentionArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let files = attention_inputs(&args.input)?;
    let mut profiles = Vec::with_capacity(files.len());
    let mut first_export = None;
    for path in &files {
        let export = AttentionExport::read(path).map_err(CliError::input)?;
        profiles.push(cross_attention_mass(&export.attention, &export.segments).map_err(CliError::input)?);
        first_export.get_or_insert(export);
    }
    let profile = average_profiles(&profiles).map_err(CliError::input)?;

    let mut text = format!("exports\t{}\n", files.len());
    text.push_str(&cross_fraction_table(&profile));
    text.push_str(&layer_mean_table(&profile));
    match layer_trend(&profile) {
        Ok((early, late)) => writeln!(text, "trend\tearly={early:.6}\tlate={late:.6}").unwrap(),
        Err(e) => writeln!(text, "trend\t{e}").unwrap(),
    }
    if let (Some(query), Some(layer), Some(export)) = (args.query, args.layer, &first_export) {
        let slice = token_attention_slice(&export.attention, layer, query).map_err(CliError::input)?;
        writeln!(text, "key\ttoken\tweight").unwrap();
        for (key, weight) in slice {
            writeln!(text, "{key}\t{}\t{weight:.6}", export.tokens[key]).unwrap();
        }
    }
    out.write_all(text.as_bytes()).map_err(CliError::runtime)?;

    if let Some(dir) = &args.output_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
        write_atomic(&dir.join("cross_fraction.tsv"), &cross_fraction_table(&profile))?;
        write_atomic(&dir.join("layer_mean.tsv"), &layer_mean_table(&profile))?;
    }
    Ok(())
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Convert(a) => cmd_convert(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Rank(a) => cmd_rank(a, out),
        Command::AnalyzeRatios(a) => cmd_analyze_ratios(a, out),
        Command::AnalyzeAttention(a) => cmd_analyze_attention(a, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ")
                .to_string();
            let _ = writeln!(err, "{}", CliError::input(first));
            return EXIT_INPUT;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.code
        }
    }
}

pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
