use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

mod analyze;
mod commands;
mod config;

use config::{ModelOverrides, TrainOverrides};

/// Fake-news short-video detection: synthetic data, splits, training,
/// benchmarks and corpus analyses.
#[derive(Debug, Parser)]
#[command(name = "svfend", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with feature caches.
    Synth(SynthArgs),
    /// Compute an event five-fold or temporal split and write it as JSON.
    Split(SplitArgs),
    /// Train the fusion model on a dataset and save a checkpoint.
    Train(TrainArgs),
    /// Train and evaluate methods on every fold; write CSV and JSON reports.
    Benchmark(BenchmarkArgs),
    /// Corpus analyses, one CSV each.
    Analyze(analyze::AnalyzeArgs),
    /// Summarize a dataset or a checkpoint.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Number of news events.
    #[arg(long)]
    events: usize,
    /// Videos per event.
    #[arg(long, default_value_t = 4)]
    per_event: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// 1 plants a perfectly predictive signal, 0 none.
    #[arg(long, default_value_t = 1.0)]
    separability: f64,
    /// Output directory for dataset.jsonl and features/.
    #[arg(long, default_value = "synthetic")]
    out: PathBuf,
}

/// Options shared by commands that read a dataset.
#[derive(Debug, Args, Clone)]
struct DataArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset file, one JSON object per line.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Root that feature-cache references resolve against (default: the
    /// dataset's directory).
    #[arg(long, env = "SVFEND_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Skip invalid records instead of failing.
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// event5 or temporal.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "split.json")]
    out: PathBuf,
}

#[derive(Debug, Args, Clone, Default)]
struct ModelFlags {
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    coattn_heads: Option<usize>,
    #[arg(long)]
    fusion_heads: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    positional_encoding: Option<bool>,
    #[arg(long)]
    max_text_tokens: Option<usize>,
    #[arg(long)]
    max_audio_frames: Option<usize>,
    #[arg(long)]
    max_frames: Option<usize>,
    #[arg(long)]
    max_comments: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Stop once training accuracy reaches this value.
    #[arg(long)]
    target_train_accuracy: Option<f64>,
}

impl ModelFlags {
    fn overrides(&self) -> ModelOverrides {
        ModelOverrides {
            hidden_dim: self.hidden_dim,
            coattn_heads: self.coattn_heads,
            fusion_heads: self.fusion_heads,
            dropout: self.dropout,
            ff_multiplier: None,
            use_positional_encoding: self.positional_encoding,
            max_text_tokens: self.max_text_tokens,
            max_audio_frames: self.max_audio_frames,
            max_frames: self.max_frames,
            max_comments: self.max_comments,
        }
    }
}

impl TrainFlags {
    fn overrides(&self) -> TrainOverrides {
        TrainOverrides {
            epochs: self.epochs,
            patience: self.patience,
            learning_rate: self.lr,
            batch_size: self.batch_size,
            validation_fraction: self.val_fraction,
            target_train_accuracy: self.target_train_accuracy,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the checkpoint and training history.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    train: TrainFlags,
    /// event5 or temporal.
    #[arg(long)]
    split: Option<String>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory of lexicon files overriding the bundled lists.
    #[arg(long)]
    lexicon_dir: Option<PathBuf>,
    /// Output directory for report.csv and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long, conflicts_with = "checkpoint")]
    dataset: Option<PathBuf>,
    /// Checkpoint stem (path without .json/.bin).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

/// Success or a run in which some method cells failed.
enum Outcome {
    Done,
    Partial,
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Synth(a) => commands::synth(&a).map(|_| Outcome::Done),
        Command::Split(a) => commands::split(&a).map(|_| Outcome::Done),
        Command::Train(a) => commands::train(&a).map(|_| Outcome::Done),
        Command::Benchmark(a) => commands::benchmark(&a),
        Command::Analyze(a) => analyze::run(&a).map(|_| Outcome::Done),
        Command::Inspect(a) => commands::inspect(&a).map(|_| Outcome::Done),
    }
}

fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    match p {
        Some(p) => Ok(p),
        None => bail!("missing {what}; pass --{what} or set it in the config file"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
