use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covertrain"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path) {
    ok(dir, &["synth", "--n-pos", "20", "--n-neg", "20", "--out", "d.csv"]);
}

#[test]
fn cover_writes_outputs_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    assert!(d.join("d.csv.truth").exists());
    ok(d, &["cover", "--data", "d.csv", "--out-dir", "c1"]);
    ok(d, &["cover", "--data", "d.csv", "--out-dir", "c1", "--threads", "1"]);
    let first = std::fs::read(d.join("c1/cover.json")).unwrap();
    ok(d, &["cover", "--data", "d.csv", "--out-dir", "c1"]);
    assert_eq!(first, std::fs::read(d.join("c1/cover.json")).unwrap());
    let report = json(&d.join("c1/cover.json"));
    let r = &report["result"];
    assert!(r["f_final"].as_f64().unwrap() >= 0.9 * r["f_total"].as_f64().unwrap());
    assert_eq!(report["satisfied"], true);
    assert_eq!(report["manifest"]["dataset"]["sha256"].as_str().unwrap().len(), 64);
    let positives = std::fs::read_to_string(d.join("c1/positives.txt")).unwrap();
    assert!(positives.starts_with("# manifest: {"));
    assert!(positives.lines().filter(|l| !l.starts_with('#')).count() > 0);

    ok(d, &["cover", "--data", "d.csv", "--out-dir", "c2", "--alpha", "1.0", "--t", "1", "--g", "identity"]);
    let m = json(&d.join("c2/cover.json"));
    assert_eq!(m["manifest"]["params"]["mode"], "min_cost_cover");
    assert_eq!(m["manifest"]["params"]["cover"]["alpha"], 1.0);
}

#[test]
fn train_eval_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    ok(d, &[
        "train", "--data", "d.csv", "--method", "slsvm", "--init", "cover", "--bias", "--model", "m.txt",
        "--report", "r.json",
    ]);
    let report = json(&d.join("r.json"));
    let trace: Vec<f64> = report["slsvm"]["iterations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["objective"].as_f64().unwrap())
        .collect();
    assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    ok(d, &["eval", "--data", "d.csv", "--model", "m.txt", "--out", "e.json", "--text", "e.txt"]);
    assert!(json(&d.join("e.json"))["accuracy"].as_f64().unwrap() >= 95.0);

    ok(d, &[
        "train", "--data", "d.csv", "--method", "lsvm", "--init", "bagavg", "--model", "l.txt", "--report", "l.json",
    ]);
    assert_eq!(json(&d.join("l.json"))["init"], "bagavg");
    let trace: Vec<f64> = json(&d.join("l.json"))["lsvm"]["trace"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));

    ok(d, &[
        "train", "--data", "d.csv", "--method", "svm", "--init", "negmine", "--standardize", "--bias", "--model",
        "s.txt", "--report", "s.json",
    ]);
    assert!(d.join("s.txt.standardizer.json").exists());
    ok(d, &[
        "eval", "--data", "d.csv", "--model", "s.txt", "--standardizer", "s.txt.standardizer.json", "--out",
        "se.json",
    ]);
}

#[test]
fn error_paths_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    std::fs::write(d.join("small.txt"), "dim 3\n1\n2\n3\n").unwrap();
    let out = run(d, &["eval", "--data", "d.csv", "--model", "small.txt", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
    assert!(!d.join("x.json").exists());

    assert_eq!(run(d, &["cover", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(d, &["synth", "--n-pos", "0", "--out", "z.csv"]).status.code(), Some(1));
    assert_eq!(
        run(d, &["cover", "--data", "missing.csv", "--out-dir", "c"]).status.code(),
        Some(2)
    );
    std::fs::write(d.join("bad.csv"), "1,+2,0.5\n").unwrap();
    assert_eq!(run(d, &["graph", "--data", "bad.csv", "--out", "g.txt", "--summary", "g.json"]).status.code(), Some(2));

    // a failing train leaves no partial model behind
    let out = run(d, &[
        "train", "--data", "d.csv", "--method", "slsvm", "--smooth-loss", "hinge", "--model", "p.txt", "--report",
        "p.json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!d.join("p.txt").exists() && !d.join("p.json").exists());
}

#[test]
fn cv_grid_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let args = [
        "cv", "--data", "d.csv", "--folds", "3", "--c-grid", "1,10", "--mu-grid", "0.1,1", "--out-dir",
    ];
    let mut a = args.to_vec();
    a.push("cv1");
    ok(d, &a);
    let mut b = args.to_vec();
    b.push("cv1b");
    ok(d, &b);
    let j1 = json(&d.join("cv1/cv.json"));
    let j2 = json(&d.join("cv1b/cv.json"));
    assert_eq!(j1["report"], j2["report"]);
    let cells = j1["report"]["cells"].as_array().unwrap();
    // 2 bias variants × 2 C × (lsvm + 2 mu)
    assert_eq!(cells.len(), 12);
    let table = std::fs::read_to_string(d.join("cv1/cv.txt")).unwrap();
    assert!(table.contains("SLSVM w/o bias") && table.contains("LSVM w/ bias"));
}

#[test]
fn graph_and_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    std::fs::write(d.join("cfg.json"), r#"{"k": 3, "distances": true, "out": "from_config.txt"}"#).unwrap();
    ok(d, &["--config", "cfg.json", "graph", "--data", "d.csv", "--out", "g.txt", "--summary", "g.json"]);
    let summary = json(&d.join("g.json"));
    assert_eq!(summary["summary"]["k"], 3);
    assert!(summary["summary"]["max_degree"].as_u64().unwrap() <= 3);
    assert!(!d.join("from_config.txt").exists());
    let text = std::fs::read_to_string(d.join("g.txt")).unwrap();
    let edge = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(edge.contains(" -> "));
    assert!(edge.split_whitespace().last().unwrap().parse::<f64>().unwrap().is_finite());
}
