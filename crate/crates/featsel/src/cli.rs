//! Command-line interface: `sample`, `importance`, `select`, `run`.
//!
//! Every subcommand accepts `--config`, `--seed`, and `--out`; flag values
//! override config-file values. Exit codes: 0 success, 1 usage error,
//! 2 runtime error.

use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::attribution::ImportanceScores;
use crate::dataset::{load_csv, TaskKind};
use crate::pipeline::{
    run_pipeline, select_features, PipelineConfig, PipelineError, RawConfig, SelectionRule,
};
use crate::sampler::diversity_sample;

#[derive(Debug, Parser)]
#[command(
    name = "featsel",
    version,
    about = "Game-theoretic feature selection for tabular data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select a representative observation subset by diversity sampling
    Sample(SampleArgs),
    /// Train an initial model and score every feature
    Importance(ImportanceArgs),
    /// Apply a selection rule to a scores artifact
    Select(SelectArgs),
    /// Run the full pipeline: sample, score, select, retrain, compare
    Run(RunArgs),
}

#[derive(Debug, Args, Default)]
struct CommonArgs {
    /// TOML config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file for the JSON artifact (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; repeat the flag for multi-seed runs
    #[arg(long)]
    seed: Vec<u64>,
}

#[derive(Debug, Args, Default)]
struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the target column
    #[arg(long)]
    target: Option<String>,
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskKind>,
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    match s {
        "regression" => Ok(TaskKind::Regression),
        "binclass" => Ok(TaskKind::Binclass),
        "multiclass" => Ok(TaskKind::Multiclass),
        other => Err(format!("unknown task {other:?} (expected regression, binclass, multiclass)")),
    }
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Number of observations to select
    #[arg(long)]
    sample_size: Option<usize>,
    /// Cluster count override (default: floor(sqrt(s)))
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct ImportanceArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Importance method: shapg, pfi, shapley, cis
    #[arg(long)]
    method: Option<String>,
    /// Characteristic function: output, sample-perf, global-perf
    #[arg(long)]
    char_fn: Option<String>,
    /// Metric: r2, neg_mae, neg_rmse, accuracy, f1_macro
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Collaborator-set size below which ShapG computes exact Shapley values
    #[arg(long)]
    l_threshold: Option<usize>,
    /// Monte Carlo permutation budget per feature
    #[arg(long)]
    mc_perms: Option<usize>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Importance scores JSON produced by `importance` or `run`
    #[arg(long)]
    scores: PathBuf,
    /// Keep the top fraction of features by score
    #[arg(long, conflicts_with = "threshold")]
    top_q: Option<f64>,
    /// Keep features whose score is strictly greater than this
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    char_fn: Option<String>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long, conflicts_with = "threshold")]
    top_q: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l_threshold: Option<usize>,
    #[arg(long)]
    mc_perms: Option<usize>,
}

/// Entry point behind `main`; returns the process exit code.
pub fn cli_main(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    // clap errors carry the offending flag plus usage synopsis
                    eprint!("{e}");
                    1
                }
            };
        }
    };

    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            2
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error(transparent)]
    Sampler(#[from] crate::sampler::SamplerError),
    #[error(transparent)]
    Attribution(#[from] crate::attribution::AttributionError),
    #[error("{0}")]
    Other(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sample(args) => cmd_sample(args),
        Command::Importance(args) => cmd_importance(args),
        Command::Select(args) => cmd_select(args),
        Command::Run(args) => cmd_run(args),
    }
}

/// Loads the config file when given, then layers flag overrides on top.
fn merged_raw(common: &CommonArgs, data: &DataArgs) -> Result<RawConfig, CliError> {
    let mut raw = match &common.config {
        Some(path) => RawConfig::from_toml_str(&std::fs::read_to_string(path)?)?,
        None => RawConfig::default(),
    };
    if let Some(path) = &data.data {
        raw.data.path = Some(path.display().to_string());
    }
    if let Some(target) = &data.target {
        raw.data.target = Some(target.clone());
    }
    if let Some(task) = data.task {
        raw.data.task = Some(task);
    }
    if !common.seed.is_empty() {
        raw.run.seeds = Some(common.seed.clone());
    }
    Ok(raw)
}

fn write_artifact(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text.as_bytes())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> Result<(), CliError> {
    let mut raw = merged_raw(&args.common, &args.data)?;
    if let Some(s) = args.sample_size {
        raw.sampling.s = Some(s);
    }
    if let Some(k) = args.k {
        raw.sampling.k = Some(k);
    }
    let cfg = raw.resolve()?;
    let data = load_csv(&cfg.data.path, &cfg.data.target, cfg.data.task, None)?;
    let s = cfg.sampling.s.min(data.n());
    let seed = cfg.seeds[0];
    let sample = diversity_sample(&data, s, cfg.sampling.k, seed)?;
    write_artifact(&args.common.out, &sample.to_json_string())
}

fn cmd_importance(args: ImportanceArgs) -> Result<(), CliError> {
    let mut raw = merged_raw(&args.common, &args.data)?;
    apply_importance_flags(
        &mut raw,
        &args.method,
        &args.char_fn,
        &args.metric,
        args.l_threshold,
        args.mc_perms,
    );
    if let Some(s) = args.sample_size {
        raw.sampling.s = Some(s);
    }
    if let Some(k) = args.k {
        raw.sampling.k = Some(k);
    }
    let cfg = raw.resolve()?;
    let data = load_csv(&cfg.data.path, &cfg.data.target, cfg.data.task, None)?;
    let scores = crate::pipeline::importance_only(&cfg, &data, cfg.seeds[0])?;
    write_artifact(&args.common.out, &scores.to_json_string())
}

fn cmd_select(args: SelectArgs) -> Result<(), CliError> {
    let rule = match (args.top_q, args.threshold) {
        (Some(q), None) => SelectionRule::TopQ(q),
        (None, Some(t)) => SelectionRule::Threshold(t),
        (None, None) => match &args.common.config {
            Some(path) => {
                let raw = RawConfig::from_toml_str(&std::fs::read_to_string(path)?)?;
                match (raw.selection.top_q, raw.selection.threshold) {
                    (Some(q), None) => SelectionRule::TopQ(q),
                    (None, Some(t)) => SelectionRule::Threshold(t),
                    (Some(_), Some(_)) => {
                        return Err(CliError::Other(
                            "selection.top_q and selection.threshold are mutually exclusive".into(),
                        ))
                    }
                    (None, None) => SelectionRule::TopQ(crate::pipeline::config::DEFAULT_TOP_Q),
                }
            }
            None => SelectionRule::TopQ(crate::pipeline::config::DEFAULT_TOP_Q),
        },
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let text = std::fs::read_to_string(&args.scores)?;
    let scores = ImportanceScores::from_json_str(&text)?;
    let mask = select_features(&scores, rule)?;
    write_artifact(&args.common.out, &mask.to_json_string())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let mut raw = merged_raw(&args.common, &args.data)?;
    apply_importance_flags(
        &mut raw,
        &args.method,
        &args.char_fn,
        &args.metric,
        args.l_threshold,
        args.mc_perms,
    );
    if let Some(q) = args.top_q {
        raw.selection.top_q = Some(q);
        raw.selection.threshold = None;
    }
    if let Some(t) = args.threshold {
        raw.selection.threshold = Some(t);
        raw.selection.top_q = None;
    }
    if let Some(s) = args.sample_size {
        raw.sampling.s = Some(s);
    }
    if let Some(k) = args.k {
        raw.sampling.k = Some(k);
    }
    let cfg: PipelineConfig = raw.resolve()?;
    let report = run_pipeline(&cfg)?;
    write_artifact(&args.common.out, &report.to_json_string())
}

fn apply_importance_flags(
    raw: &mut RawConfig,
    method: &Option<String>,
    char_fn: &Option<String>,
    metric: &Option<String>,
    l_threshold: Option<usize>,
    mc_perms: Option<usize>,
) {
    if let Some(m) = method {
        raw.importance.method = Some(m.clone());
    }
    if let Some(c) = char_fn {
        raw.importance.char_fn = Some(c.clone());
    }
    if let Some(m) = metric {
        raw.importance.metric = Some(m.clone());
    }
    if let Some(l) = l_threshold {
        raw.importance.l_threshold = Some(l);
    }
    if let Some(p) = mc_perms {
        raw.importance.mc_perms = Some(p);
    }
}
