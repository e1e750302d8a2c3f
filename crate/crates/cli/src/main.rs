//! `sparce`: synthesize data, train a classifier, explain it, aggregate and plot.
//!
//! Exit status is 0 on success, 1 on a configuration or usage error and 2 on a
//! runtime failure.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sparce", version, about = "Sparse counterfactual explanations for multivariate time series")]
struct Cli {
    /// Base directory for outputs whose location is not given explicitly.
    #[arg(long, global = true, env = "SPARCE_RUN_ROOT", default_value = "runs")]
    run_root: PathBuf,

    /// TOML configuration file; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a Moving Box dataset.
    Synthesize(SynthesizeArgs),
    /// Train the recurrent classifier on a dataset's training split.
    TrainClassifier(TrainClassifierArgs),
    /// Generate counterfactuals for the test queries, one run directory per repetition.
    Explain(ExplainArgs),
    /// Aggregate metrics over run directories into mean ± std tables.
    Evaluate(EvaluateArgs),
    /// Draw heatmaps, mean ROC curves or realism embeddings.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    /// Output dataset directory [default: <run-root>/dataset].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Class-conditional mean shift inside the box.
    #[arg(long)]
    signal_shift: Option<f64>,
    /// Background process: iid_gaussian or ar1.
    #[arg(long)]
    background: Option<String>,
    #[arg(long)]
    ar_coefficient: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainClassifierArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory [default: <run-root>/classifier].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// none, minmax or zscore.
    #[arg(long)]
    normalization: Option<String>,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    /// Directory written by `train-classifier`.
    #[arg(long)]
    classifier: PathBuf,
    /// Dataset directory [default: the one the classifier was trained on].
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// ics, gan, countergan or sparce.
    #[arg(long)]
    approach: Option<String>,
    #[arg(long)]
    target_class: Option<usize>,
    /// Adversarial loss weight.
    #[arg(long)]
    lambda1: Option<f64>,
    /// Classification loss weight.
    #[arg(long)]
    lambda2: Option<f64>,
    /// Similarity loss weight.
    #[arg(long)]
    lambda3: Option<f64>,
    /// Sparsity loss weight.
    #[arg(long)]
    lambda4: Option<f64>,
    /// Jerk loss weight.
    #[arg(long)]
    lambda5: Option<f64>,
    /// Repetitions; repetition i uses seed + i.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    generator_hidden: Option<usize>,
    #[arg(long)]
    generator_layers: Option<usize>,
    #[arg(long)]
    ics_steps: Option<usize>,
    /// Explain at most this many test queries.
    #[arg(long)]
    max_queries: Option<usize>,
    /// Parent of the run directories [default: <run-root>].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Run directories, or parents whose subdirectories are runs.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Output directory [default: <run-root>/summary].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PlotKind {
    Heatmap,
    Roc,
    Embedding,
}

#[derive(Debug, Args)]
struct PlotArgs {
    kind: PlotKind,
    /// Run directories, or parents whose subdirectories are runs.
    #[arg(long, required = true, num_args = 1..)]
    runs: Vec<PathBuf>,
    /// Output directory [default: <run-root>/plots].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Heatmap: number of queries drawn.
    #[arg(long, default_value_t = 4)]
    samples: usize,
    /// Embedding: points per group (queries, targets, counterfactuals).
    #[arg(long, default_value_t = 100)]
    per_group: usize,
    /// Embedding: dataset directory [default: the one recorded in the run].
    #[arg(long)]
    dataset: Option<PathBuf>,
}

/// Invalid input supplied by the user; maps to exit status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<sparce::Error>() {
            if matches!(
                e,
                sparce::Error::Config { .. } | sparce::Error::UnknownApproach(_) | sparce::Error::EmptyPartition { .. }
            ) {
                return 1;
            }
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let file = match config::FileConfig::load(cli.config.as_deref()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Synthesize(a) => commands::synthesize(&cli.run_root, file, a),
        Command::TrainClassifier(a) => commands::train_classifier(&cli.run_root, file, a),
        Command::Explain(a) => commands::explain(&cli.run_root, file, a),
        Command::Evaluate(a) => commands::evaluate(&cli.run_root, a),
        Command::Plot(a) => plot::plot(&cli.run_root, file, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}
