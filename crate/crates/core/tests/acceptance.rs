//! Acceptance suite. Runs every criterion in sequence, prints one
//! PASS/FAIL line each and exits nonzero if any failed.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mgnet::graph::{
    basis_for, histogram_entropy, mutual_information, normalized_laplacian, scaled_laplacian, Adjacency,
    AdjacencyKind,
};
use mgnet::model::{backward, forward, Dropout, Hyper, ModelParams};
use mgnet::synth::{synthetic_trials, SynthConfig};
use mgnet::training::{
    cross_entropy_grad, fit_split, flooded_loss, prepare, train_fold_with, Labeled, Metrics, PipelineConfig,
    TrainConfig,
};
use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64())
    })
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Adjacency {
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < 0.7 {
                let v = rng.random_range(0.01..2.0);
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
    }
    Adjacency::new(w, AdjacencyKind::Mi).unwrap()
}

fn to_na(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

fn mi_suite() -> Outcome {
    let start = Instant::now();
    let alternating = Array1::from_iter((0..100).map(|i| (i % 2) as f64 * 3.0));
    let h = histogram_entropy(alternating.view(), 2).map_err(|e| e.to_string())?;
    ensure(h == 1.0, || format!("alternating entropy {h}"))?;
    let constant = Array1::from_elem(33, -1.25);
    let h = histogram_entropy(constant.view(), 8).map_err(|e| e.to_string())?;
    ensure(h == 0.0, || format!("constant entropy {h}"))?;
    let four = Array1::from_iter((0..40).map(|i| (i % 4) as f64));
    let h = histogram_entropy(four.view(), 4).map_err(|e| e.to_string())?;
    ensure(h == 2.0, || format!("four-value entropy {h}"))?;

    let x = Array1::from_iter((0..64).map(|i| (i % 2) as f64));
    let mi = mutual_information(x.view(), x.mapv(|v| 1.0 - v).view(), 2).unwrap();
    ensure(mi == 1.0, || format!("complement MI {mi}"))?;
    let a = Array1::from_iter((0..64).map(|i| (i % 2) as f64));
    let b = Array1::from_iter((0..64).map(|i| ((i / 2) % 2) as f64));
    let mi = mutual_information(a.view(), b.view(), 2).unwrap();
    ensure(mi == 0.0, || format!("independent MI {mi}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..400);
        let bins = rng.random_range(2..24);
        let x = Array1::from_shape_simple_fn(n, || rng.random_range(-3.0..3.0));
        let y = Array1::from_shape_simple_fn(n, || rng.random_range(-3.0..3.0)) + &x * rng.random_range(0.0..1.0);
        let xy = mutual_information(x.view(), y.view(), bins).unwrap();
        let yx = mutual_information(y.view(), x.view(), bins).unwrap();
        let xx = mutual_information(x.view(), x.view(), bins).unwrap();
        let hx = histogram_entropy(x.view(), bins).unwrap();
        ensure(xy >= 0.0 && yx >= 0.0, || format!("negative MI {xy}"))?;
        worst = worst.max((xy - yx).abs()).max((xx - hx).abs());
    }
    ensure(worst < 1e-12, || format!("symmetry or self-information error {worst:e}"))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("max error {worst:.1e}, {:.3}s", start.elapsed().as_secs_f64()))
}

/// `T_p(x)` from its closed form.
fn cheb_scalar(p: usize, x: f64) -> f64 {
    if x.abs() <= 1.0 {
        (p as f64 * x.acos()).cos()
    } else if x > 1.0 {
        (p as f64 * x.acosh()).cosh()
    } else {
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        sign * (p as f64 * (-x).acosh()).cosh()
    }
}

fn spectral_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let k = rng.random_range(1..=6);
        let a = random_graph(&mut rng, n);
        let basis = basis_for(&a, k).map_err(|e| e.to_string())?;
        let theta: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Array1::from_shape_simple_fn(n, || rng.random_range(-1.0..1.0));
        let mut recurrence = Array1::<f64>::zeros(n);
        for (p, t) in basis.terms.iter().enumerate() {
            recurrence += &(t.dot(&x) * theta[p]);
        }
        let scaled = scaled_laplacian(&normalized_laplacian(&a), basis.lambda_max);
        let eig = to_na(&scaled).symmetric_eigen();
        let gains: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&lam| (0..k).map(|p| theta[p] * cheb_scalar(p, lam)).sum())
            .collect();
        let u = &eig.eigenvectors;
        let xv = nalgebra::DVector::from_iterator(n, x.iter().copied());
        let spectral = u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(gains)) * u.transpose() * xv;
        for i in 0..n {
            worst = worst.max((recurrence[i] - spectral[i]).abs());
        }
    }
    ensure(worst < 1e-8, || format!("max deviation {worst:e}"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!("max deviation {worst:.1e}, {:.3}s", start.elapsed().as_secs_f64()))
}

fn laplacian_spectrum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let a = random_graph(&mut rng, n);
        for &e in to_na(&normalized_laplacian(&a)).symmetric_eigenvalues().iter() {
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    ensure(lo >= -1e-9 && hi <= 2.0 + 1e-9, || format!("eigenvalues span [{lo}, {hi}]"))?;
    Ok(format!("eigenvalues within [{lo:.3e}, {hi:.6}]"))
}

fn tiny_hyper() -> Hyper {
    Hyper {
        n_nodes: 4,
        n_segments: 3,
        in_channels: 2,
        n_blocks: 1,
        width: 2,
        cheb_order: 2,
        temporal_kernel: 3,
        dropout: 0.5,
        n_classes: 4,
        ..Hyper::default()
    }
}

fn gradient_fidelity() -> Outcome {
    const STEP: f64 = 1e-6;
    let start = Instant::now();
    let h = tiny_hyper();
    let mut checked = 0usize;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut p = ModelParams::init(&h, seed).unwrap();
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        let x = Array3::from_shape_simple_fn((4, 2, 3), || rng.random_range(-1.5..1.5));
        let adj = random_graph(&mut rng, 4);
        let basis = basis_for(&adj, h.cheb_order).unwrap();
        let label = rng.random_range(0..4);
        let out = forward(x.view(), &p, &h, &basis, Dropout::Sample(&mut rng)).unwrap();
        let cache = out.cache.unwrap();
        let masks = cache.masks();
        let (_, dlogits) = cross_entropy_grad(out.logits.view(), label).unwrap();
        let grads = backward(Some(&cache), &p, &h, &basis, &dlogits).unwrap();
        let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
        let loss = |p: &ModelParams| {
            let o = forward(x.view(), p, &h, &basis, Dropout::Fixed(&masks)).unwrap();
            cross_entropy_grad(o.logits.view(), label).unwrap().0
        };
        let names = p.layout();
        for (ti, (name, _)) in names.iter().enumerate() {
            for i in 0..analytic[ti].len() {
                let orig = p.tensors()[ti][i];
                p.tensors_mut()[ti][i] = orig + STEP;
                let up = loss(&p);
                p.tensors_mut()[ti][i] = orig - STEP;
                let down = loss(&p);
                p.tensors_mut()[ti][i] = orig;
                let numeric = (up - down) / (2.0 * STEP);
                let a = analytic[ti][i];
                let abs = (a - numeric).abs();
                let rel = abs / a.abs().max(numeric.abs());
                ensure(abs <= 1e-6 || rel <= 1e-4, || {
                    format!("seed {seed} {name}[{i}]: analytic {a}, numeric {numeric}")
                })?;
                checked += 1;
            }
        }
    }
    within(start.elapsed(), 60.0)?;
    Ok(format!("{checked} partials over 20 seeds, {:.2}s", start.elapsed().as_secs_f64()))
}

fn flooding_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut samples: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..=3.0)).collect();
    samples.extend([0.0, 0.5, 3.0, 0.5 - f64::EPSILON, 0.5 + f64::EPSILON]);
    for &raw in &samples {
        let f = flooded_loss(raw, 0.5);
        ensure(f == (raw - 0.5).abs() + 0.5, || format!("raw {raw}: flooded {f}"))?;
        ensure(f >= 0.5, || format!("raw {raw}: flooded {f} below the floor"))?;
    }
    Ok(format!("{} raw losses", samples.len()))
}

fn overfit_sanity() -> Outcome {
    let start = Instant::now();
    let set = synthetic_trials(&SynthConfig::default());
    let cfg = PipelineConfig::default();
    let prepared = prepare(&set, &cfg).map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..set.len()).collect();
    let fitted = fit_split(&prepared, &all, &cfg).map_err(|e| e.to_string())?;
    let train = TrainConfig {
        epochs: 300,
        ..TrainConfig::default()
    };
    let data = Labeled::new(&fitted.scaled, &prepared.labels).map_err(|e| e.to_string())?;
    let mut reached = None;
    train_fold_with(data, None, &cfg.model_hyper(), &fitted.basis, &train, |rec| {
        if rec.train_accuracy >= 0.95 {
            reached = Some((rec.epoch, rec.train_accuracy));
        }
        reached.is_none()
    })
    .map_err(|e| e.to_string())?;
    let (epoch, acc) = reached.ok_or("training accuracy stayed below 95% for 300 epochs")?;
    within(start.elapsed(), 600.0)?;
    Ok(format!(
        "{acc:.4} training accuracy after epoch {epoch} ({} trials, lr {}, batch {}, dropout {}), {:.1}s",
        set.len(),
        train.learning_rate,
        train.batch_size,
        train.dropout,
        start.elapsed().as_secs_f64()
    ))
}

/// Scores recomputed from the expanded (label, prediction) pairs.
fn oracle_scores(confusion: &[Vec<u64>]) -> (f64, f64, f64) {
    let k = confusion.len();
    let mut pairs = Vec::new();
    for (y, row) in confusion.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            pairs.extend(std::iter::repeat_n((y, p), count as usize));
        }
    }
    let correct = pairs.iter().filter(|(y, p)| y == p).count();
    let mut precision_total = 0.0;
    let mut f1_total = 0.0;
    for c in 0..k {
        let tp = pairs.iter().filter(|&&(y, p)| y == c && p == c).count();
        let fp = pairs.iter().filter(|&&(y, p)| y != c && p == c).count();
        let fneg = pairs.iter().filter(|&&(y, p)| y == c && p != c).count();
        let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
        let recall = if tp + fneg > 0 { tp as f64 / (tp + fneg) as f64 } else { 0.0 };
        precision_total += precision;
        f1_total += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    (
        correct as f64 / pairs.len() as f64,
        f1_total / k as f64,
        precision_total / k as f64,
    )
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for m in 0..10 {
        let confusion: Vec<Vec<u64>> = (0..4)
            .map(|_| (0..4).map(|_| if rng.random::<f64>() < 0.2 { 0 } else { rng.random_range(0..40) }).collect())
            .collect();
        let got = Metrics::from_confusion(confusion.clone()).map_err(|e| e.to_string())?;
        let (acc, f1, prec) = oracle_scores(&confusion);
        ensure(got.accuracy == acc && got.macro_f1 == f1 && got.macro_precision == prec, || {
            format!("matrix {m}: got ({}, {}, {}), oracle ({acc}, {f1}, {prec})", got.accuracy, got.macro_f1, got.macro_precision)
        })?;
    }
    Ok("10 matrices match".into())
}

fn mgnet(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mgnet"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("mgnet {} failed: {}", args[0], String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn determinism(dir: &Path) -> Outcome {
    let data = dir.join("det_data");
    mgnet(&["synth", "--out", p(&data), "--n-trials", "32", "--seed", "3"])?;
    let mut files = Vec::new();
    for run in ["det_a", "det_b"] {
        let run = dir.join(run);
        mgnet(&[
            "train", "--data", p(&data), "--run-dir", p(&run), "--epochs", "10", "--width", "16", "--n-blocks", "2",
            "--seed", "11",
        ])?;
        files.push(fs::read(run.join("metrics.json")).map_err(|e| e.to_string())?);
    }
    ensure(files[0] == files[1], || "metrics.json differs between runs".into())?;
    Ok(format!("{} identical bytes", files[0].len()))
}

fn ablation_rows(run: &Path, axis: &str) -> Result<Vec<String>, String> {
    let mut reader = csv::Reader::from_path(run.join(format!("ablation_{axis}.csv"))).map_err(|e| e.to_string())?;
    reader
        .records()
        .map(|r| r.map(|r| r[0].to_string()).map_err(|e| e.to_string()))
        .collect()
}

fn end_to_end(dir: &Path) -> Outcome {
    let data = dir.join("e2e_data");
    mgnet(&["synth", "--out", p(&data)])?;
    let run = dir.join("e2e");
    mgnet(&[
        "train", "--data", p(&data), "--run-dir", p(&run), "--folds", "4", "--epochs", "100", "--width", "32",
        "--n-blocks", "2",
    ])?;
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(run.join("metrics.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let folds = report["folds"].as_array().map_or(0, Vec::len);
    ensure(folds == 4, || format!("{folds} folds reported"))?;
    let accuracy = report["mean_val"]["accuracy"].as_f64().ok_or("no mean accuracy")?;

    let tiny = ["--epochs", "1", "--width", "4", "--n-blocks", "1", "--folds", "2"];
    for axis in ["adjacency", "feature"] {
        let mut args = vec!["ablate", "--data", p(&data), "--run-dir", p(&run), "--axis", axis];
        args.extend(tiny);
        mgnet(&args)?;
    }
    let adjacency = ablation_rows(&run, "adjacency")?;
    ensure(adjacency == ["MI", "KNN", "ED", "RANDOM", "MUL_KNN", "MUL_ED"], || {
        format!("adjacency rows {adjacency:?}")
    })?;
    let feature = ablation_rows(&run, "feature")?;
    ensure(feature == ["DE", "PSD", "DASM", "RASM", "ASM", "DCAU"], || format!("feature rows {feature:?}"))?;
    let chance = if accuracy > 0.25 { "above" } else { "not above" };
    Ok(format!(
        "4-fold mean validation accuracy {accuracy:.4} on the synthetic stand-in ({chance} 0.25 chance); ablation rows complete"
    ))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("mutual information oracles", Box::new(mi_suite)),
        ("spectral equivalence", Box::new(spectral_equivalence)),
        ("laplacian spectrum", Box::new(laplacian_spectrum)),
        ("gradient fidelity", Box::new(gradient_fidelity)),
        ("flooding law", Box::new(flooding_law)),
        ("overfit sanity", Box::new(overfit_sanity)),
        ("metric oracle", Box::new(metric_oracle)),
        ("determinism", Box::new(|| determinism(tmp.path()))),
        ("end-to-end cross-validation", Box::new(|| end_to_end(tmp.path()))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
