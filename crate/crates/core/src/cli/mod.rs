//! Command-line front end.
//!
//! Every command resolves a [`RunConfig`] (defaults, then `--config`, then
//! flags), writes it to `<run_dir>/config.json` and puts all outputs in
//! the run directory. Exit codes: 0 success, 1 data error, 2 config error.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{ablation_settings, AblationRow, MetricsReport};
pub use config::{manifest_path, Provenance, RunConfig};

use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::graph::AdjacencyKind;
use crate::model::AttentionCombine;
use crate::training::MiSource;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mgnet", version, about = "Mutual-information graph attention network for motor-imagery EEG")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset and list every problem found.
    Validate {
        /// Manifest file or its directory.
        data: PathBuf,
    },
    /// Build one graph from the training split and write it as JSON.
    BuildAdjacency {
        #[command(flatten)]
        common: CommonArgs,
        /// Use the training split of this fold instead of every trial.
        #[arg(long)]
        fold: Option<usize>,
        /// Output path (default `<run_dir>/adjacency.json`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// K-fold cross-validation with per-fold checkpoints and histories.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score a dataset with a saved checkpoint.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output path (default `<run_dir>/evaluation.json`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate every setting along one axis.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Deepest model of the depth sweep.
        #[arg(long, default_value_t = 8)]
        max_depth: usize,
    },
    /// Summarize the metrics and ablation tables of a run directory.
    Report {
        #[arg(long, default_value = "runs/default")]
        run_dir: PathBuf,
    },
    /// Write a synthetic dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        n_trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1.5)]
        amplitude: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Adjacency,
    Feature,
    Depth,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Adjacency => "adjacency",
            Axis::Feature => "feature",
            Axis::Depth => "depth",
        }
    }
}

/// Flags shared by the pipeline commands; each mirrors a config key.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub feature_kind: Option<FeatureKind>,
    #[arg(long)]
    pub adjacency_kind: Option<AdjacencyKind>,
    #[arg(long)]
    pub filter_lo: Option<f64>,
    #[arg(long)]
    pub filter_hi: Option<f64>,
    #[arg(long)]
    pub cue_sample: Option<usize>,
    #[arg(long)]
    pub mi_bins: Option<usize>,
    #[arg(long, value_parser = parse_mi_source)]
    pub mi_source: Option<MiSource>,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub random_density: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub flood_level: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_blocks: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub cheb_order: Option<usize>,
    #[arg(long)]
    pub temporal_kernel: Option<usize>,
    #[arg(long, value_parser = parse_combine)]
    pub combine: Option<AttentionCombine>,
}

fn parse_mi_source(s: &str) -> std::result::Result<MiSource, String> {
    match s {
        "signal" => Ok(MiSource::Signal),
        "features" => Ok(MiSource::Features),
        _ => Err(format!("expected signal or features, got {s}")),
    }
}

fn parse_combine(s: &str) -> std::result::Result<AttentionCombine, String> {
    match s {
        "product" => Ok(AttentionCombine::Product),
        "substitute" => Ok(AttentionCombine::Substitute),
        _ => Err(format!("expected product or substitute, got {s}")),
    }
}

impl CommonArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        if self.data.is_some() {
            c.data = self.data.clone();
        }
        set(&mut c.run_dir, &self.run_dir);
        let p = &mut c.pipeline;
        set(&mut p.feature_kind, &self.feature_kind);
        set(&mut p.adjacency_kind, &self.adjacency_kind);
        set(&mut p.filter_lo, &self.filter_lo);
        set(&mut p.filter_hi, &self.filter_hi);
        if self.cue_sample.is_some() {
            p.cue_sample = self.cue_sample;
        }
        set(&mut p.mi_bins, &self.mi_bins);
        set(&mut p.mi_source, &self.mi_source);
        set(&mut p.knn_k, &self.knn_k);
        set(&mut p.random_density, &self.random_density);
        let t = &mut p.train;
        set(&mut t.learning_rate, &self.learning_rate);
        set(&mut t.batch_size, &self.batch_size);
        set(&mut t.epochs, &self.epochs);
        set(&mut t.flood_level, &self.flood_level);
        set(&mut t.dropout, &self.dropout);
        set(&mut t.folds, &self.folds);
        set(&mut t.seed, &self.seed);
        let h = &mut p.hyper;
        set(&mut h.n_blocks, &self.n_blocks);
        set(&mut h.width, &self.width);
        set(&mut h.cheb_order, &self.cheb_order);
        set(&mut h.temporal_kernel, &self.temporal_kernel);
        set(&mut h.combine, &self.combine);
        h.dropout = p.train.dropout;
        c.validate()?;
        Ok(c)
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_data_error() {
        EXIT_DATA
    } else {
        EXIT_CONFIG
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
