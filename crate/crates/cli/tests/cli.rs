use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn hetgnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetgnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hetgnn(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    hetgnn(args).status.code().expect("exit code")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A 200-node synthetic dataset with three splits, plus a fast config.
fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let ds = dir.join("ds");
    ok(&[
        "synth",
        "gen",
        "--homophily",
        "0.8",
        "--nodes",
        "200",
        "--n-splits",
        "3",
        "--seed",
        "4",
        "--out",
        s(&ds),
    ]);
    let cfg = dir.join("config.json");
    std::fs::write(
        &cfg,
        r#"{"model": "gcn", "nhidden": 16, "max_epochs": 40, "patience": 20}"#,
    )
    .unwrap();
    (ds, cfg)
}

#[test]
fn synth_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, _) = fixture(dir.path());
    let report = read_json(&ds.join("synth_report.json"));
    assert!((report["edge_homophily"].as_f64().unwrap() - 0.8).abs() < 0.05);
    let out = dir.path().join("inspect");
    let text = ok(&["dataset", "inspect", s(&ds), "--out", s(&out)]);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["n_nodes"], 200);
    assert_eq!(v["n_classes"], 5);
    assert_eq!(v["n_splits"], 3);
    assert_eq!(read_json(&out.join("inspect.json")), v);
}

#[test]
fn split_generation_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, _) = fixture(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&[
        "dataset",
        "split",
        s(&ds),
        "--n-splits",
        "2",
        "--seed",
        "9",
        "--out",
        s(&a),
    ]);
    ok(&[
        "dataset",
        "split",
        s(&ds),
        "--n-splits",
        "2",
        "--seed",
        "9",
        "--out",
        s(&b),
    ]);
    for k in 0..2 {
        let f = format!("splits/split_{k}.json");
        assert_eq!(read_json(&a.join(&f)), read_json(&b.join(&f)));
    }
    let split = read_json(&a.join("splits/split_0.json"));
    assert_eq!(split["train"].as_array().unwrap().len(), 96);
    assert_eq!(split["valid"].as_array().unwrap().len(), 64);
    assert_eq!(split["test"].as_array().unwrap().len(), 40);
}

#[test]
fn bench_is_deterministic_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, cfg) = fixture(dir.path());
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        ok(&[
            "bench",
            "--dataset",
            s(&ds),
            "--config",
            s(&cfg),
            "--seed",
            "3",
            "--threads",
            threads,
            "--out",
            s(&out),
        ]);
        read_json(&out.join("bench.json"))
    };
    let a = run("a", "1");
    let b = run("b", "2");
    assert_eq!(a["accuracies"], b["accuracies"]);
    for (ra, rb) in a["runs"]
        .as_array()
        .unwrap()
        .iter()
        .zip(b["runs"].as_array().unwrap())
    {
        assert_eq!(ra["test_predictions"], rb["test_predictions"]);
        assert_eq!(ra["loss_curve"], rb["loss_curve"]);
    }
    let accs: Vec<f64> = a["accuracies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(accs.len(), 3);
    let mean = accs.iter().sum::<f64>() / 3.0;
    assert!((a["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
    let cell = a["cell"].as_str().unwrap();
    assert!(cell.contains(" ± "));
    let text = std::fs::read_to_string(dir.path().join("a/bench.txt")).unwrap();
    assert!(text.contains(cell));
    assert_eq!(a["config"]["seed"], 3);
}

#[test]
fn train_then_degree_report_and_estimated_cm() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, cfg) = fixture(dir.path());
    let t = dir.path().join("t");
    ok(&[
        "train",
        "--dataset",
        s(&ds),
        "--config",
        s(&cfg),
        "--model",
        "cmgnn",
        "--out",
        s(&t),
    ]);
    let run = read_json(&t.join("run.json"));
    assert_eq!(run["model"], "cmgnn");
    assert!(run["estimate"].is_object());
    let curves = std::fs::read_to_string(t.join("curves.csv")).unwrap();
    assert_eq!(
        curves.lines().count(),
        1 + run["epochs_run"].as_u64().unwrap() as usize
    );

    let d = dir.path().join("d");
    ok(&[
        "degree-report",
        "--dataset",
        s(&ds),
        "--runs",
        s(&t.join("run.json")),
        "--out",
        s(&d),
    ]);
    let rep = read_json(&d.join("degree_report.json"));
    assert_eq!(rep["buckets"].as_array().unwrap().len(), 5);
    let overall = rep["overall"].as_f64().unwrap();
    assert!((overall - run["test_accuracy"].as_f64().unwrap()).abs() <= 1e-9);

    let c = dir.path().join("c");
    ok(&[
        "cm",
        "--dataset",
        s(&ds),
        "--mode",
        "estimated",
        "--run",
        s(&t.join("run.json")),
        "--out",
        s(&c),
    ]);
    for f in [
        "cm.csv",
        "cm.svg",
        "cm_observed.csv",
        "cm_observed.svg",
        "cm.json",
    ] {
        assert!(c.join(f).exists(), "{f}");
    }
    let cm = read_json(&c.join("cm.json"));
    assert!(cm["max_abs_diff"].as_f64().unwrap() >= 0.0);
    let csv = std::fs::read_to_string(c.join("cm.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().all(|l| l
        .split(',')
        .all(|v| v.split('.').nth(1).unwrap().len() == 6)));
}

#[test]
fn search_budget_one() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, cfg) = fixture(dir.path());
    let space = dir.path().join("space.json");
    std::fs::write(
        &space,
        r#"{"layers": [1], "nhidden": [16], "patience": [10]}"#,
    )
    .unwrap();
    let out = dir.path().join("s");
    let text = ok(&[
        "search",
        "--dataset",
        s(&ds),
        "--config",
        s(&cfg),
        "--budget",
        "1",
        "--space",
        s(&space),
        "--out",
        s(&out),
    ]);
    assert!(text.contains("random"));
    let board = std::fs::read_to_string(out.join("leaderboard.jsonl")).unwrap();
    assert_eq!(board.lines().count(), 1);
    let row: Value = serde_json::from_str(board.lines().next().unwrap()).unwrap();
    assert_eq!(row["config"]["layers"], 1);
    let best = read_json(&out.join("best_config.json"));
    assert_eq!(best, row["config"]);
}

#[test]
fn timing_reports_refreshes_and_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, cfg) = fixture(dir.path());
    let out = dir.path().join("tm");
    ok(&[
        "timing",
        "--dataset",
        s(&ds),
        "--config",
        s(&cfg),
        "--model",
        "cmgnn",
        "--scaling-epochs",
        "3",
        "--out",
        s(&out),
    ]);
    let t = read_json(&out.join("timing.json"));
    assert!(t["timing"]["ms_per_epoch"].as_f64().unwrap() > 0.0);
    assert!(t["timing"]["refresh_count"].as_u64().is_some());
    assert!(t["scaling"]["ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, cfg) = fixture(dir.path());
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"lr": -1.0}"#).unwrap();
    assert_eq!(
        code(&["train", "--dataset", s(&ds), "--config", s(&bad)]),
        2
    );
    std::fs::write(&bad, r#"{"learning_rate": 0.1}"#).unwrap();
    assert_eq!(
        code(&["train", "--dataset", s(&ds), "--config", s(&bad)]),
        2
    );
    assert_eq!(code(&["train", "--dataset", s(&ds), "--model", "nope"]), 2);
    assert_eq!(code(&["bench", "--config", s(&cfg)]), 2);
    assert_eq!(code(&["cm", "--dataset", s(&ds), "--mode", "estimated"]), 2);
    assert_eq!(code(&["search", "--dataset", s(&ds), "--budget", "0"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);

    assert_eq!(
        code(&["dataset", "inspect", s(&dir.path().join("missing"))]),
        3
    );
    assert_eq!(code(&["train", "--dataset", s(&ds), "--split", "7"]), 3);
    let broken = dir.path().join("broken");
    std::fs::create_dir_all(&broken).unwrap();
    for f in ["meta.json", "edges.tsv", "labels.tsv", "features.tsv"] {
        std::fs::copy(ds.join(f), broken.join(f)).unwrap();
    }
    std::fs::write(broken.join("edges.tsv"), "0\tx\n").unwrap();
    assert_eq!(code(&["dataset", "inspect", s(&broken)]), 3);

    let feats = std::fs::read_to_string(ds.join("features.tsv")).unwrap();
    let (first, rest) = feats.split_once('\t').unwrap();
    assert!(!first.is_empty());
    std::fs::write(
        broken.join("edges.tsv"),
        std::fs::read(ds.join("edges.tsv")).unwrap(),
    )
    .unwrap();
    std::fs::write(broken.join("features.tsv"), format!("NaN\t{rest}")).unwrap();
    assert_eq!(code(&["dataset", "inspect", s(&broken)]), 4);
}
