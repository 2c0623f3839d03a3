use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dshadow"));
    cmd.env("DSHADOW_THREADS", "2");
    cmd
}

fn write_config(dir: &Path, name: &str, doc: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn fibonacci_doc() -> Value {
    json!({
        "schema": 1,
        "name": "fibonacci",
        "system": {"d": 1, "r": 1, "kind": "autonomous", "matrices": {"A": [[[1]], [[1]]]}},
        "params": {"steps": 10, "initial": [[0], [1]]}
    })
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn simulate_fibonacci() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fib.json", &fibonacci_doc());
    let out = dir.path().join("run");
    let res = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = csv_rows(&out.join("orbit.csv"));
    let expect = [0.0, 1.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0, 55.0, 89.0];
    assert_eq!(rows.len(), expect.len());
    for (row, e) in rows.iter().zip(expect) {
        assert_eq!(row[1].parse::<f64>().unwrap(), e);
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
    }
    assert_eq!(rows.last().unwrap()[0], "10");

    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["task"], "simulate");
    assert_eq!(manifest["scenario_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["input"], fibonacci_doc());
    assert_eq!(manifest["results"], json!(["orbit.csv", "simulate.json"]));
}

#[test]
fn spectrum_geometric_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "schema": 1,
        "task": "spectrum",
        "kernel": {"d": 1, "gamma": 2f64.ln(), "type": "geometric", "terms": {"C": [[0.5]], "rho": 0.25}}
    });
    let cfg = write_config(dir.path(), "geo.json", &doc);
    let out = dir.path().join("spec");
    let res = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let spec: Value = serde_json::from_str(&fs::read_to_string(out.join("spectrum.json")).unwrap()).unwrap();
    let roots = spec["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 1);
    let v = roots[0]["value"].as_array().unwrap();
    assert!((v[0].as_f64().unwrap() - 0.75).abs() <= 1e-10);
    assert!(v[1].as_f64().unwrap().abs() <= 1e-10);
    assert_eq!(spec["hyperbolic"], true);
}

#[test]
fn missing_field_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = fibonacci_doc();
    doc["system"].as_object_mut().unwrap().remove("d");
    doc["params"]["steps"] = json!(0);
    let cfg = write_config(dir.path(), "bad.json", &doc);
    let out = dir.path().join("never");
    let res = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("\"d\""), "{err}");
    assert!(err.contains("params.steps"), "{err}");
    assert!(!out.exists());
}

#[test]
fn other_validation_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fib.json", &fibonacci_doc());
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();

    let mut with_task = fibonacci_doc();
    with_task["task"] = json!("simulate");
    let tasked = write_config(dir.path(), "tasked.json", &with_task);
    let res = run(&["dichotomy", "--config", tasked.to_str().unwrap(), "--out", out]);
    assert_eq!(res.status.code(), Some(2));

    assert_eq!(run(&["perron", "--config", cfg, "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--out", out]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["simulate", "--config", missing.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    let broken = dir.path().join("broken.json");
    assert_eq!(run(&["simulate", "--config", broken.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["verify-all", "--suite", "bogus", "--out", out]).status.code(), Some(2));
    assert!(!Path::new(out).exists());
}

#[test]
fn numeric_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "schema": 1,
        "system": {"d": 1, "r": 0, "kind": "autonomous", "matrices": {"A": [[[1]]]}},
        "params": {"window": 10, "forcing": {"constant": [1], "length": 10}}
    });
    let cfg = write_config(dir.path(), "center.json", &doc);
    let out = dir.path().join("p");
    let res = run(&["perron", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("dichotomy"));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn perron_and_shadow_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "schema": 1,
        "system": {"d": 1, "r": 0, "kind": "autonomous", "matrices": {"A": [[[2]]]}},
        "params": {"window": 20, "forcing": {"constant": [1], "length": 20}}
    });
    let cfg = write_config(dir.path(), "two.json", &doc);
    let out = dir.path().join("perron");
    let res = run(&["perron", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    // bounded solution of x(n+1) = 2x(n) + 1 on n < 20, zero forcing beyond: x(n) = 2^{n-20} - 1
    for row in csv_rows(&out.join("perron.csv")) {
        let n: i32 = row[0].parse().unwrap();
        let x: f64 = row[1].parse().unwrap();
        assert!((x - (2f64.powi(n - 20) - 1.0)).abs() < 1e-13, "n={n} x={x}");
    }

    let shadow_doc = json!({
        "schema": 1,
        "system": {"d": 1, "r": 0, "kind": "autonomous", "matrices": {"A": [[[2]]]}},
        "params": {"delta": [0.01, 0.001], "trials": 10, "window": 30}
    });
    let cfg = write_config(dir.path(), "shadow.json", &shadow_doc);
    let out = dir.path().join("shadow");
    let res = run(&["shadow", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "3"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let m: Value = serde_json::from_str(&fs::read_to_string(out.join("modulus.json")).unwrap()).unwrap();
    let stats = m["stats"].as_array().unwrap();
    assert_eq!(stats.len(), 2);
    for s in stats {
        assert_eq!(s["bound_violations"], 0);
        assert!(s["eps_max"].as_f64().unwrap() <= s["K_D"].as_f64().unwrap() * s["delta"].as_f64().unwrap());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "schema": 1,
        "system": {"d": 1, "r": 1, "kind": "autonomous", "matrices": {"A": [[[1]], [[1]]]}},
        "params": {"delta": 0.001, "trials": 20, "window": 40, "seed": 11}
    });
    let cfg = write_config(dir.path(), "fib.json", &doc);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let res = bin()
            .env("DSHADOW_THREADS", threads)
            .args(["shadow", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(res.status.success());
        outputs.push(fs::read(out.join("modulus.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn rerun_replaces_previous_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fib.json", &fibonacci_doc());
    let out = dir.path().join("run");
    for _ in 0..2 {
        let res = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(res.status.success());
    }
    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn verify_all_single_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let res = run(&["verify-all", "--suite", "duality", "--seed", "42", "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("pass  duality/duality"), "{stdout}");
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["suites"][0]["suite"], "duality");
    assert!(summary["suites"][0]["checks"][0]["max_residual"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn resonate_kernel_and_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "schema": 1,
        "kernel": {"d": 1, "gamma": 1.0, "type": "finite", "terms": [-1]},
        "params": {"steps": 2000}
    });
    let cfg = write_config(dir.path(), "k.json", &doc);
    let out = dir.path().join("r");
    let res = run(&["resonate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rep: Value = serde_json::from_str(&fs::read_to_string(out.join("resonance.json")).unwrap()).unwrap();
    assert!((rep["growth"]["slope"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(csv_rows(&out.join("growth.csv")).len(), 2001);

    let hyper = json!({
        "schema": 1,
        "kernel": {"d": 1, "gamma": 1.0, "type": "finite", "terms": [0.5]}
    });
    let cfg = write_config(dir.path(), "h.json", &hyper);
    let out = dir.path().join("h");
    let res = run(&["resonate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.exists());
}
