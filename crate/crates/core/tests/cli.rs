use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mgnet::graph::{euclidean_adjacency, Adjacency, Montage2D};
use mgnet::ingest::load_dataset;
use mgnet::training::kfold_split;
use sha2::{Digest, Sha256};

fn mgnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path, n: usize, amplitude: &str) -> PathBuf {
    let data = dir.join("data");
    let o = mgnet(&["synth", "--out", data.to_str().unwrap(), "--n-trials", &n.to_string(), "--amplitude", amplitude]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    data
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_reports_issues() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 8, "1.5");
    let o = mgnet(&["validate", s(&data)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 issues"));

    let victim = data.join("trial_00003.f32");
    let bytes = fs::read(&victim).unwrap();
    fs::write(&victim, &bytes[..bytes.len() - 6]).unwrap();
    let o = mgnet(&["validate", s(&data)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("trial_00003.f32"));

    let manifest = data.join("manifest.json");
    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    doc["trials"] = serde_json::json!([]);
    fs::write(&manifest, doc.to_string()).unwrap();
    let o = mgnet(&["validate", s(&data)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("warning"));
}

#[test]
fn adjacency_builds() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 12, "1.5");
    let run = tmp.path().join("run");

    let o = mgnet(&["build-adjacency", "--data", s(&data), "--run-dir", s(&run), "--adjacency-kind", "MI"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("density"));
    let mi = Adjacency::load(&run.join("adjacency.json")).unwrap();
    assert_eq!(mi.weights, mi.weights.t());
    assert!(run.join("config.json").is_file());

    let hash = |name: &str| {
        let out = run.join(name);
        let o = mgnet(&[
            "build-adjacency", "--data", s(&data), "--run-dir", s(&run), "--adjacency-kind", "RANDOM",
            "--seed", "17", "--out", s(&out),
        ]);
        assert!(o.status.success());
        hex::encode(Sha256::digest(fs::read(out).unwrap()))
    };
    assert_eq!(hash("r1.json"), hash("r2.json"));

    let o = mgnet(&["build-adjacency", "--data", s(&data), "--run-dir", s(&run), "--adjacency-kind", "MUL_ED", "--fold", "1"]);
    assert!(o.status.success());
    let mul = Adjacency::load(&run.join("adjacency.json")).unwrap();
    let ed = euclidean_adjacency(&Montage2D::iv2a(), 4).unwrap();
    for (w, m) in mul.weights.iter().zip(ed.weights.iter()) {
        if *m == 0.0 {
            assert_eq!(*w, 0.0);
        }
    }
    assert!(mul.weights.iter().any(|&w| w > 0.0));

    let o = mgnet(&["build-adjacency", "--data", s(&data), "--adjacency-kind", "PEARSON"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_evaluate_and_repeat() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 64, "3");
    let run_a = tmp.path().join("a");
    let run_b = tmp.path().join("b");
    let train = |run: &Path| {
        let o = mgnet(&[
            "train", "--data", s(&data), "--run-dir", s(run), "--epochs", "60", "--width", "32",
            "--n-blocks", "2", "--seed", "1",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    train(&run_a);
    train(&run_b);
    for f in ["config.json", "adjacency.json", "metrics.json", "history_fold0.csv", "history_fold3.csv", "fold0.ckpt"] {
        assert!(run_a.join(f).is_file(), "{f} missing");
    }
    let metrics_a = fs::read(run_a.join("metrics.json")).unwrap();
    let metrics_b = fs::read(run_b.join("metrics.json")).unwrap();
    assert_eq!(metrics_a, metrics_b);

    let report: serde_json::Value = serde_json::from_slice(&metrics_a).unwrap();
    let mean = report["mean_val"]["accuracy"].as_f64().unwrap();
    assert!(mean >= 0.9, "mean CV accuracy {mean}");

    // score fold 0's own training split with its checkpoint
    let set = load_dataset(&data.join("manifest.json")).unwrap();
    let folds = kfold_split(set.len(), 4, 1).unwrap();
    let subset = tmp.path().join("fold0_train");
    mgnet::ingest::save_dataset(&set.select(&folds[0].train), &subset).unwrap();
    let out = tmp.path().join("eval.json");
    let o = mgnet(&[
        "evaluate", "--data", s(&subset), "--run-dir", s(&run_a), "--checkpoint", s(&run_a.join("fold0.ckpt")),
        "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let eval: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    let recorded = report["folds"][0]["train"]["accuracy"].as_f64().unwrap();
    assert!(eval["metrics"]["accuracy"].as_f64().unwrap() >= recorded - 1e-6);

    let o = mgnet(&["report", "--run-dir", s(&run_a)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("| mean |"));
}

fn ablate(data: &Path, run: &Path, axis: &str) -> Vec<Vec<String>> {
    let o = mgnet(&[
        "ablate", "--data", s(data), "--run-dir", s(run), "--axis", axis, "--epochs", "1", "--width", "4",
        "--n-blocks", "1", "--folds", "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(run.join(format!("ablation_{axis}.csv"))).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn ablation_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 8, "1.5");
    let run = tmp.path().join("run");

    let adj = ablate(&data, &run, "adjacency");
    let names: Vec<&str> = adj.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["MI", "KNN", "ED", "RANDOM", "MUL_KNN", "MUL_ED"]);

    let feat = ablate(&data, &run, "feature");
    let names: Vec<&str> = feat.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["DE", "PSD", "DASM", "RASM", "ASM", "DCAU"]);

    let depth = ablate(&data, &run, "depth");
    assert_eq!(depth.len(), 8);
    let cost: Vec<u64> = depth.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(cost.windows(2).all(|w| w[1] > w[0]));

    let o = mgnet(&["ablate", "--data", s(&data), "--axis", "channels"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 8, "1.5");
    let run = tmp.path().join("run");
    let cfg = tmp.path().join("cfg.json");
    fs::write(
        &cfg,
        serde_json::json!({
            "run_dir": s(&run),
            "adjacency_kind": "KNN",
            "hyper": {"width": 4, "n_blocks": 1},
            "train": {"epochs": 2, "folds": 2}
        })
        .to_string(),
    )
    .unwrap();
    let o = mgnet(&["build-adjacency", "--config", s(&cfg), "--data", s(&data), "--knn-k", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let echo: serde_json::Value = serde_json::from_slice(&fs::read(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["config"]["knn_k"], 3);
    assert_eq!(echo["config"]["adjacency_kind"], "KNN");
    assert_eq!(echo["config"]["train"]["epochs"], 2);
    assert_eq!(echo["config_hash"].as_str().unwrap().len(), 64);
    assert!(echo["version"].is_string());

    let o = mgnet(&["train", "--config", s(&cfg), "--data", s(&data), "--dropout", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = mgnet(&["train", "--config", s(&tmp.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(1));
}
