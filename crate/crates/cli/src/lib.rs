//! Command-line front end: detect, evaluate, build-dataset, simulate.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod config;
pub mod dataset;
pub mod detect;
pub mod evaluate;
pub mod imageio;
pub mod simulate;

/// Exit code for success.
pub const EXIT_OK: i32 = 0;
/// Exit code for configuration and usage errors.
pub const EXIT_USAGE: i32 = 1;
/// Exit code when some inputs failed but the rest were processed.
pub const EXIT_PARTIAL: i32 = 2;

/// Environment variable naming the directory holding `cnn1.onnx` .. `cnn5.onnx`.
pub const MODEL_DIR_ENV: &str = "SYNTHDETECT_MODEL_DIR";

/// How a command finished when it did not hit a fatal error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// `n` inputs failed and were recorded or skipped.
    Partial(usize),
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => EXIT_OK,
            Outcome::Partial(_) => EXIT_PARTIAL,
        }
    }
}

/// Marks an error caused by input data rather than by configuration.
#[derive(Debug)]
pub struct DataFailure(pub String);

impl fmt::Display for DataFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataFailure {}

/// Exit code for a fatal error.
pub fn error_exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<DataFailure>()) {
        EXIT_PARTIAL
    } else {
        EXIT_USAGE
    }
}

#[derive(Debug, Parser)]
#[command(name = "synthdetect", version, about = "Patch-based detection of synthetic images")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Base seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

impl GlobalArgs {
    pub const DEFAULT_SEED: u64 = 0;

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(Self::DEFAULT_SEED)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score images with a scorer ensemble and write one verdict per image.
    Detect(detect::DetectArgs),
    /// Compute AUC, ROC and confusion from labelled scores.
    Evaluate(evaluate::EvaluateArgs),
    /// Materialize a training-patch manifest from a recipe.
    BuildDataset(dataset::BuildDatasetArgs),
    /// Compare aggregation policies on simulated patch scores.
    Simulate(simulate::SimulateArgs),
}

/// Runs a parsed command inside a pool of `--workers` threads.
pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.workers {
        anyhow::ensure!(n > 0, "--workers must be at least 1");
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let global = cli.global;
    pool.install(|| match cli.command {
        Command::Detect(args) => detect::cmd_detect(&global, &args),
        Command::Evaluate(args) => evaluate::cmd_evaluate(&args),
        Command::BuildDataset(args) => dataset::cmd_build_dataset(&global, &args),
        Command::Simulate(args) => simulate::cmd_simulate(&global, &args),
    })
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn write_output(path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    use anyhow::Context;
    use std::io::Write;
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}
