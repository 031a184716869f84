//! Command-line front end: `ingest`, `stats`, `train`, `detect` and
//! `evaluate`, all driven by one JSON run configuration.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub use config::{
    derive_seed, ConlluPaths, DataConfig, EmbeddingSource, Method, RunConfig, SplitFractions,
    TransformSpec, ZeroshotConfig,
};

use crate::classifiers::ClassifierError;
use crate::embeddings::EmbeddingError;
use crate::eval::EvalError;
use crate::ingest::IngestError;
use crate::stats::StatsError;
use crate::zeroshot::ZeroshotError;

pub const CORPUS_FILE: &str = "corpus.json";
pub const SPLITS_FILE: &str = "splits.json";
pub const STATS_FILE: &str = "stats.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const MODEL_FILE: &str = "model.json";
pub const LM_FILE: &str = "lm.json";
pub const THRESHOLDS_FILE: &str = "thresholds.json";
pub const VALIDATION_FILE: &str = "validation_metrics.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const ROBUSTNESS_FILE: &str = "robustness.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 configuration, 3 data or model, 4 output I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::InvalidSplit(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::InvalidParameter(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ZeroshotError> for CliError {
    fn from(e: ZeroshotError) -> Self {
        match e {
            ZeroshotError::InvalidConfig(_) | ZeroshotError::UnknownMethod(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::UnknownTransform(_) | EvalError::InvalidIntensity(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mgt-detect", version, about = "Detect machine-generated text")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Override the configured global seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize the corpus and write split manifests.
    Ingest,
    /// Per-class corpus statistics.
    Stats,
    /// Train embeddings, the classifier and the zero-shot scorer.
    Train,
    /// Score each line of a text file.
    Detect {
        #[arg(long)]
        input: PathBuf,
        /// `classifier`, `detect_gpt` or `single_revise`.
        #[arg(long, default_value = "classifier")]
        method: String,
        /// Print language-model scoring passes per document to stderr.
        #[arg(long)]
        report_passes: bool,
    },
    /// Test-set metrics and adversarial robustness.
    Evaluate,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &cli.output {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Stats => commands::stats(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Detect {
            input,
            method,
            report_passes,
        } => commands::detect(&cfg, input, method, *report_passes),
        Command::Evaluate => commands::evaluate(&cfg),
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    write_file(path, &s)
}

pub(crate) fn read_input(path: &Path, hint: &str) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {} ({hint}): {e}", path.display())))
}
