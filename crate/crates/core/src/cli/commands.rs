use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{manifest_path, write_echo, write_json, Provenance, RunConfig};
use super::{Axis, Command, EXIT_DATA, EXIT_OK};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureTensor, ScalerState};
use crate::graph::{basis_for, Adjacency, AdjacencyKind};
use crate::ingest::{load_dataset, save_dataset, validate_dataset, TrialSet};
use crate::model::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::synth::{synthetic_trials, SynthConfig};
use crate::training::{
    check_model_fit, evaluate, fit_split, kfold_split, prepare, run_cv, CvReport, Labeled,
    MeanMetrics, Metrics, PipelineConfig,
};

pub(super) fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Validate { data } => cmd_validate(&data),
        Command::BuildAdjacency { common, fold, out } => {
            cmd_build_adjacency(&common.resolve()?, fold, out)
        }
        Command::Train { common } => cmd_train(&common.resolve()?),
        Command::Evaluate {
            common,
            checkpoint,
            out,
        } => cmd_evaluate(&common.resolve()?, &checkpoint, out),
        Command::Ablate {
            common,
            axis,
            max_depth,
        } => cmd_ablate(&common.resolve()?, axis, max_depth),
        Command::Report { run_dir } => cmd_report(&run_dir),
        Command::Synth {
            out,
            n_trials,
            seed,
            amplitude,
        } => cmd_synth(&out, n_trials, seed, amplitude),
    }
}

fn cmd_validate(data: &Path) -> Result<i32> {
    let report = match validate_dataset(&manifest_path(data)) {
        Ok(r) => r,
        Err(e) => {
            println!("{e}");
            println!("1 issues");
            return Ok(EXIT_DATA);
        }
    };
    if report.n_trials == 0 {
        println!("warning: manifest lists no trials");
    }
    for issue in &report.issues {
        println!("{issue}");
    }
    println!("{} trials, {} issues", report.n_trials, report.issues.len());
    Ok(if report.is_clean() { EXIT_OK } else { EXIT_DATA })
}

fn load(cfg: &RunConfig) -> Result<TrialSet> {
    let set = load_dataset(&cfg.manifest()?)?;
    if set.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Ok(set)
}

fn cmd_build_adjacency(cfg: &RunConfig, fold: Option<usize>, out: Option<PathBuf>) -> Result<i32> {
    write_echo(cfg, "build-adjacency")?;
    let set = load(cfg)?;
    let prepared = prepare(&set, &cfg.pipeline)?;
    let train: Vec<usize> = match fold {
        None => (0..set.len()).collect(),
        Some(k) => {
            let folds = kfold_split(set.len(), cfg.pipeline.train.folds, cfg.pipeline.train.seed)?;
            folds
                .get(k)
                .ok_or_else(|| Error::InvalidArgument(format!("fold {k} of {}", folds.len())))?
                .train
                .clone()
        }
    };
    let fitted = fit_split(&prepared, &train, &cfg.pipeline)?;
    let path = out.unwrap_or_else(|| cfg.run_dir.join("adjacency.json"));
    fitted.adjacency.save(&path)?;
    let (lo, hi) = fitted.adjacency.weight_range();
    println!(
        "{} graph over {} nodes from {} trials: density {:.4}, weights [{lo:.6}, {hi:.6}] -> {}",
        fitted.adjacency.kind,
        fitted.adjacency.n(),
        train.len(),
        fitted.adjacency.density(),
        path.display()
    );
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub best_epoch: Option<usize>,
    pub train: Metrics,
    pub val: Metrics,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub folds: Vec<FoldMetrics>,
    pub mean_val: MeanMetrics,
}

impl MetricsReport {
    fn new(cfg: &RunConfig, report: &CvReport) -> Self {
        Self {
            provenance: Provenance::of(cfg),
            folds: report
                .folds
                .iter()
                .map(|f| FoldMetrics {
                    fold: f.fold,
                    n_train: f.n_train,
                    n_val: f.n_val,
                    best_epoch: f.history.best_epoch,
                    train: f.train.clone(),
                    val: f.val.clone(),
                })
                .collect(),
            mean_val: report.mean_val.clone(),
        }
    }
}

fn adjacency_value(adj: &Adjacency) -> serde_json::Value {
    serde_json::from_str(&adj.to_json()).expect("adjacency json parses")
}

fn cmd_train(cfg: &RunConfig) -> Result<i32> {
    write_echo(cfg, "train")?;
    let set = load(cfg)?;
    let report = run_cv(&set, &cfg.pipeline)?;
    let dir = &cfg.run_dir;
    for f in &report.folds {
        f.history.write_csv(&dir.join(format!("history_fold{}.csv", f.fold)))?;
        f.adjacency.save(&dir.join(format!("adjacency_fold{}.json", f.fold)))?;
        let ckpt = Checkpoint {
            hyper: cfg.pipeline.model_hyper(),
            seed: cfg.pipeline.train.seed,
            params: f.params.clone(),
            meta: serde_json::json!({
                "fold": f.fold,
                "pipeline": cfg.pipeline,
                "scaler": f.scaler,
                "adjacency": adjacency_value(&f.adjacency),
            }),
        };
        save_checkpoint(&ckpt, &dir.join(format!("fold{}.ckpt", f.fold)))?;
        println!(
            "fold {}: train acc {:.4}, val acc {:.4}, val f1 {:.4}",
            f.fold, f.train.accuracy, f.val.accuracy, f.val.macro_f1
        );
    }
    if let Some(first) = report.folds.first() {
        first.adjacency.save(&dir.join("adjacency.json"))?;
    }
    write_json(&dir.join("metrics.json"), &MetricsReport::new(cfg, &report))?;
    println!(
        "mean val: accuracy {:.4}, macro F1 {:.4}, macro precision {:.4}",
        report.mean_val.accuracy, report.mean_val.macro_f1, report.mean_val.macro_precision
    );
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EvaluationReport {
    #[serde(flatten)]
    provenance: Provenance,
    checkpoint: PathBuf,
    n_trials: usize,
    metrics: Metrics,
}

fn meta_field<T: for<'de> Deserialize<'de>>(meta: &serde_json::Value, key: &str) -> Result<T> {
    let v = meta
        .get(key)
        .ok_or_else(|| Error::Checkpoint(format!("metadata lacks `{key}`")))?;
    serde_json::from_value(v.clone()).map_err(|e| Error::Checkpoint(format!("metadata `{key}`: {e}")))
}

fn cmd_evaluate(cfg: &RunConfig, checkpoint: &Path, out: Option<PathBuf>) -> Result<i32> {
    write_echo(cfg, "evaluate")?;
    let ckpt = load_checkpoint(checkpoint)?;
    let pipeline: PipelineConfig = meta_field(&ckpt.meta, "pipeline")?;
    let scaler: ScalerState = meta_field(&ckpt.meta, "scaler")?;
    let adj_value: serde_json::Value = meta_field(&ckpt.meta, "adjacency")?;
    let adjacency = Adjacency::from_json(&adj_value.to_string())?;
    let set = load(cfg)?;
    check_model_fit(&set, &pipeline)?;
    let prepared = prepare(&set, &pipeline)?;
    let scaled: Vec<FeatureTensor> = scaler.transform_all(&prepared.features)?;
    let basis = basis_for(&adjacency, ckpt.hyper.cheb_order)?;
    let metrics = evaluate(
        &ckpt.params,
        &ckpt.hyper,
        &basis,
        Labeled::new(&scaled, &prepared.labels)?,
    )?;
    let path = out.unwrap_or_else(|| cfg.run_dir.join("evaluation.json"));
    let report = EvaluationReport {
        provenance: Provenance::of(cfg),
        checkpoint: checkpoint.to_path_buf(),
        n_trials: set.len(),
        metrics,
    };
    write_json(&path, &report)?;
    println!(
        "{} trials: accuracy {:.4}, macro F1 {:.4}, macro precision {:.4}",
        report.n_trials, report.metrics.accuracy, report.metrics.macro_f1, report.metrics.macro_precision
    );
    Ok(EXIT_OK)
}

/// One line of `ablation_<axis>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub setting: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub macro_precision: f64,
    /// Multiply-adds of one forward pass.
    pub forward_macs: u64,
}

/// Pipeline configurations swept along `axis`, labelled.
pub fn ablation_settings(base: &PipelineConfig, axis: Axis, max_depth: usize) -> Vec<(String, PipelineConfig)> {
    match axis {
        Axis::Adjacency => AdjacencyKind::ALL
            .iter()
            .map(|&k| {
                let mut c = base.clone();
                c.adjacency_kind = k;
                (k.to_string(), c)
            })
            .collect(),
        Axis::Feature => FeatureKind::ALL
            .iter()
            .map(|&k| {
                let mut c = base.clone();
                c.feature_kind = k;
                (k.to_string(), c)
            })
            .collect(),
        Axis::Depth => (1..=max_depth)
            .map(|d| {
                let mut c = base.clone();
                c.hyper.n_blocks = d;
                (d.to_string(), c)
            })
            .collect(),
    }
}

fn cmd_ablate(cfg: &RunConfig, axis: Axis, max_depth: usize) -> Result<i32> {
    if max_depth == 0 {
        return Err(Error::InvalidArgument("max_depth must be >= 1".into()));
    }
    write_echo(cfg, &format!("ablate {}", axis.as_str()))?;
    let set = load(cfg)?;
    let path = cfg.run_dir.join(format!("ablation_{}.csv", axis.as_str()));
    let mut w = csv::Writer::from_path(&path)?;
    for (setting, pipeline) in ablation_settings(&cfg.pipeline, axis, max_depth) {
        let report = run_cv(&set, &pipeline)?;
        let row = AblationRow {
            setting,
            accuracy: report.mean_val.accuracy,
            macro_f1: report.mean_val.macro_f1,
            macro_precision: report.mean_val.macro_precision,
            forward_macs: pipeline.model_hyper().forward_macs(),
        };
        println!(
            "{:>8}  accuracy {:.4}  macro F1 {:.4}  macro precision {:.4}",
            row.setting, row.accuracy, row.macro_f1, row.macro_precision
        );
        w.serialize(&row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    println!("-> {}", path.display());
    Ok(EXIT_OK)
}

fn cmd_report(run_dir: &Path) -> Result<i32> {
    let mut found = false;
    let metrics_path = run_dir.join("metrics.json");
    if metrics_path.is_file() {
        found = true;
        let text = fs::read_to_string(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
        let m: MetricsReport = serde_json::from_str(&text).map_err(|e| Error::json(&metrics_path, e))?;
        println!("## Cross-validation ({} {}, config {})", m.provenance.tool, m.provenance.version, &m.provenance.config_hash[..12]);
        println!();
        println!("| fold | train acc | val acc | val F1 | val precision | best epoch |");
        println!("|---|---|---|---|---|---|");
        for f in &m.folds {
            println!(
                "| {} | {:.4} | {:.4} | {:.4} | {:.4} | {} |",
                f.fold,
                f.train.accuracy,
                f.val.accuracy,
                f.val.macro_f1,
                f.val.macro_precision,
                f.best_epoch.map_or("-".to_string(), |e| e.to_string())
            );
        }
        println!(
            "| mean | | {:.4} | {:.4} | {:.4} | |",
            m.mean_val.accuracy, m.mean_val.macro_f1, m.mean_val.macro_precision
        );
    }
    for axis in [Axis::Adjacency, Axis::Feature, Axis::Depth] {
        let path = run_dir.join(format!("ablation_{}.csv", axis.as_str()));
        if !path.is_file() {
            continue;
        }
        found = true;
        println!();
        println!("## Ablation: {}", axis.as_str());
        println!();
        println!("| setting | accuracy | macro F1 | macro precision | forward MACs |");
        println!("|---|---|---|---|---|");
        let mut r = csv::Reader::from_path(&path)?;
        for row in r.deserialize() {
            let row: AblationRow = row?;
            println!(
                "| {} | {:.4} | {:.4} | {:.4} | {} |",
                row.setting, row.accuracy, row.macro_f1, row.macro_precision, row.forward_macs
            );
        }
    }
    if !found {
        println!("no metrics.json or ablation tables in {}", run_dir.display());
        return Ok(EXIT_DATA);
    }
    Ok(EXIT_OK)
}

fn cmd_synth(out: &Path, n_trials: usize, seed: u64, amplitude: f64) -> Result<i32> {
    let set = synthetic_trials(&SynthConfig {
        n_trials,
        seed,
        amplitude,
        ..SynthConfig::default()
    });
    let path = save_dataset(&set, out)?;
    println!("{} synthetic trials -> {}", set.len(), path.display());
    Ok(EXIT_OK)
}
