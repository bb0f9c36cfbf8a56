// Reference values are written with every digit of the computed result.
#![allow(clippy::excessive_precision)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;
use superhawkes::experiments::relative_error;
use superhawkes::io::save_model;
use superhawkes::simulate::{make_synthetic_suite, SuiteSpec};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_superhawkes"));
    cmd.env_remove("SUPERHAWKES_OUT_DIR");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_model(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn matrix(v: &Value) -> Vec<Vec<f64>> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|row| row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
        .collect()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

const MODEL_2D: &str = r#"{"D": 2, "w": 1.0, "mu": [0.3, 0.2], "A": [[0.3, 0.1], [0.2, 0.2]]}"#;

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("bound-check"));
    assert_eq!(run(&["fit", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["bound-check", "--D", "5", "--I", "50"]).status.code(), Some(1));
}

#[test]
fn missing_file_is_a_data_error_with_message() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = run(&["fit", "--data", p(&missing), "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.csv"), "stderr: {err}");
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let model = write_model(dir.path(), "m.json", MODEL_2D);
    let paths: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("s{i}.csv"))).collect();
    for (path, seed) in paths.iter().zip(["11", "11", "12"]) {
        ok(&["simulate", "--model", p(&model), "--T", "50", "--num-seqs", "4", "--seed", seed, "--out", p(path)]);
    }
    let read = |path: &PathBuf| fs::read(path).unwrap();
    assert_eq!(read(&paths[0]), read(&paths[1]));
    assert_eq!(read(&paths[0].with_extension("json")), read(&paths[1].with_extension("json")));
    assert_ne!(read(&paths[0]), read(&paths[2]));
}

#[test]
fn simulate_thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let model = write_model(dir.path(), "m.json", MODEL_2D);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&["--threads", "1", "simulate", "--model", p(&model), "--T", "50", "--num-seqs", "8", "--out", p(&a)]);
    ok(&["--threads", "3", "simulate", "--model", p(&model), "--T", "50", "--num-seqs", "8", "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn zero_rate_model_gives_header_only_csv() {
    let dir = TempDir::new().unwrap();
    let model = write_model(dir.path(), "m.json", r#"{"D": 2, "w": 1.0, "mu": [0.0, 0.0], "A": [[0.3, 0.1], [0.2, 0.2]]}"#);
    let csv = dir.path().join("e.csv");
    ok(&["simulate", "--model", p(&model), "--T", "100", "--num-seqs", "3", "--out", p(&csv)]);
    assert_eq!(fs::read_to_string(&csv).unwrap(), "seq_id,t,dim\n");
    let sidecar = read_json(&csv.with_extension("json"));
    assert_eq!(sidecar["num_seqs"], 3);
    assert_eq!(sidecar["D"], 2);
}

#[test]
fn nonstationary_or_malformed_model_is_rejected() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("e.csv");
    let hot = write_model(dir.path(), "hot.json", r#"{"D": 1, "w": 1.0, "mu": [0.5], "A": [[1.5]]}"#);
    let out = run(&["simulate", "--model", p(&hot), "--T", "10", "--out", p(&csv)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stationary"));
    let bad = write_model(dir.path(), "bad.json", r#"{"D": 2, "w": 1.0, "mu": [0.5]}"#);
    assert_eq!(run(&["simulate", "--model", p(&bad), "--T", "10", "--out", p(&csv)]).status.code(), Some(2));
}

#[test]
fn event_counts_match_stationary_rate_in_one_dimension() {
    // mu = 0.5, a / w = 0.5: stationary rate 1, so 50 sequences on [0, 200]
    // average 200 events with standard error about 4.
    let dir = TempDir::new().unwrap();
    let model = write_model(dir.path(), "m.json", r#"{"D": 1, "w": 2.0, "mu": [0.5], "A": [[1.0]]}"#);
    let csv = dir.path().join("e.csv");
    ok(&["simulate", "--model", p(&model), "--T", "200", "--num-seqs", "50", "--seed", "5", "--out", p(&csv)]);
    let rows = fs::read_to_string(&csv).unwrap().lines().count() - 1;
    let mean = rows as f64 / 50.0;
    assert!((mean - 200.0).abs() < 16.0, "mean count {mean}");
}

#[test]
fn multi_on_single_source_matches_single() {
    let dir = TempDir::new().unwrap();
    let model = write_model(dir.path(), "m.json", MODEL_2D);
    let csv = dir.path().join("e.csv");
    ok(&["simulate", "--model", p(&model), "--T", "100", "--num-seqs", "5", "--out", p(&csv)]);
    for estimator in ["ls", "mle"] {
        let single = dir.path().join(format!("single_{estimator}.json"));
        let multi = dir.path().join(format!("multi_{estimator}.json"));
        ok(&["fit", "--data", p(&csv), "--strategy", "single", "--estimator", estimator, "--out", p(&single)]);
        ok(&["fit", "--data", p(&csv), "--strategy", "multi", "--estimator", estimator, "--out", p(&multi)]);
        let (s, m) = (read_json(&single), read_json(&multi));
        let (sa, ma) = (matrix(&s["A"]), matrix(&m["A"]));
        for (rs, rm) in sa.iter().zip(&ma) {
            for (x, y) in rs.iter().zip(rm) {
                assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{estimator}: A {x} vs {y}");
            }
        }
        for (x, y) in floats(&s["mu"]).iter().zip(floats(&m["mu"])) {
            assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{estimator}: mu {x} vs {y}");
        }
        assert_eq!(m["sources"].as_array().unwrap().len(), 1);
    }
}

#[test]
fn fit_output_is_a_loadable_model_with_diagnostics() {
    let dir = TempDir::new().unwrap();
    let model = write_model(dir.path(), "m.json", MODEL_2D);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&["simulate", "--model", p(&model), "--T", "100", "--num-seqs", "4", "--source", "1", "--out", p(&a)]);
    ok(&["simulate", "--model", p(&model), "--T", "100", "--num-seqs", "3", "--source", "2", "--out", p(&b)]);
    let fitted = dir.path().join("fit.json");
    ok(&["fit", "--data", p(&a), "--data", p(&b), "--strategy", "super", "--out", p(&fitted)]);

    let out = read_json(&fitted);
    assert_eq!(out["strategy"], "super");
    assert_eq!(out["sources"].as_array().unwrap().len(), 2);
    let diagnostics = read_json(&dir.path().join("fit.diagnostics.json"));
    assert_eq!(diagnostics["superposed_groups"], 3);
    assert_eq!(diagnostics["sequences"], 7);
    assert!(!diagnostics["warnings"].as_array().unwrap().is_empty(), "unequal counts should warn");

    // The fitted file feeds straight back into simulate.
    let again = dir.path().join("again.csv");
    ok(&["simulate", "--model", p(&fitted), "--T", "20", "--out", p(&again)]);
}

#[test]
fn round_trip_recovers_infectivity() {
    // Default D = 5, K = 2 fixture; MLE on the multi-source layout.
    let dir = TempDir::new().unwrap();
    let trials = 10;
    let mut errors = Vec::new();
    for trial in 0..trials {
        let suite = make_synthetic_suite(&SuiteSpec::new(2, 5, 20, 100.0), 100 + trial).unwrap();
        let mut data = Vec::new();
        for (k, m) in suite.models.iter().enumerate() {
            let model = dir.path().join(format!("model_{trial}_{k}.json"));
            save_model(m, &model).unwrap();
            let csv = dir.path().join(format!("data_{trial}_{k}.csv"));
            let seed = (1000 * trial + k as u64).to_string();
            let source = k.to_string();
            ok(&[
                "simulate", "--model", p(&model), "--T", "100", "--num-seqs", "20", "--seed", &seed, "--source",
                &source, "--out", p(&csv),
            ]);
            data.push(csv);
        }
        let fitted = dir.path().join(format!("fit_{trial}.json"));
        ok(&[
            "fit", "--data", p(&data[0]), "--data", p(&data[1]), "--strategy", "multi", "--estimator", "mle", "--out",
            p(&fitted),
        ]);
        let a = matrix(&read_json(&fitted)["A"]);
        let a_hat = nalgebra::DMatrix::from_fn(5, 5, |i, j| a[i][j]);
        errors.push(relative_error(&a_hat, &suite.infectivity).unwrap());
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    assert!(mean < 0.30, "mean relative error {mean}, per trial {errors:?}");
}

fn bound(args: &[&str]) -> Value {
    let mut full = vec!["bound-check"];
    full.extend_from_slice(args);
    serde_json::from_slice(&ok(&full).stdout).unwrap()
}

#[test]
fn bound_check_single_source_is_an_equality() {
    let v = bound(&["--B-mu", "2.5", "--B-A", "1", "--B-sigma-mu", "2.5", "--D", "4", "--M", "1", "--I", "30"]);
    let (multi, sup) = (v["bound_multi"].as_f64().unwrap(), v["bound_super"].as_f64().unwrap());
    assert!((multi - sup).abs() <= 1e-12 * multi);
    assert_eq!(v["condition_holds"], true);
}

#[test]
fn bound_check_from_mus_file() {
    let dir = TempDir::new().unwrap();
    let disjoint = dir.path().join("disjoint.json");
    fs::write(&disjoint, "[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.5]]").unwrap();
    let v = bound(&["--mus", p(&disjoint), "--I", "20"]);
    assert_eq!(v["scenario"]["scenario"], "complementary");
    assert_eq!(v["condition_holds"], true);
    assert_eq!(v["sources"], 3);

    // Ten identical unit vectors in five dimensions: B_sigma_mu = 100 against
    // a threshold of 76.6157...
    let identical = dir.path().join("identical.json");
    fs::write(&identical, serde_json::to_string(&vec![vec![1.0, 0.0, 0.0, 0.0, 0.0]; 10]).unwrap()).unwrap();
    let v = bound(&["--mus", p(&identical), "--I", "50"]);
    assert_eq!(v["scenario"]["scenario"], "identical");
    assert!((v["threshold"].as_f64().unwrap() - 76.615755798057636).abs() < 1e-9);
    assert_eq!(v["b_sigma_mu"].as_f64().unwrap(), 100.0);
    assert_eq!(v["condition_holds"], false);

    let out = run(&["bound-check", "--mus", p(&identical), "--M", "3", "--I", "50"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bound_check_rejects_negative_bounds() {
    let out = run(&["bound-check", "--B-mu", "-1", "--B-sigma-mu", "1", "--D", "5", "--M", "2", "--I", "50"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("B_mu"));
}

fn summary_without_timing(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let skip = header.iter().position(|h| *h == "mean_seconds").expect("timing column");
    text.lines()
        .map(|l| l.split(',').enumerate().filter(|(i, _)| *i != skip).map(|(_, f)| f).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn tiny_experiment_matches_golden_summary() {
    let dir = TempDir::new().unwrap();
    let config = fixture("fixtures/tiny_experiment.json");
    let out1 = dir.path().join("run1");
    let start = Instant::now();
    ok(&["--threads", "1", "experiment", "--config", p(&config), "--out", p(&out1)]);
    assert!(start.elapsed() < Duration::from_secs(60));

    let golden = fs::read_to_string(fixture("golden/tiny_experiment_summary.csv")).unwrap();
    assert_eq!(summary_without_timing(&out1.join("summary.csv")), golden.trim_end());

    let manifest = read_json(&out1.join("manifest.json"));
    assert_eq!(manifest["command"], "experiment");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["trials"], 2);
    for file in ["results.csv", "summary.csv", "report.json"] {
        assert!(out1.join(file).exists(), "{file} missing");
    }

    // Output directory from the environment, more threads: same numbers.
    let out2 = dir.path().join("run2");
    let status = bin()
        .args(["--threads", "3", "experiment", "--config", p(&config)])
        .env("SUPERHAWKES_OUT_DIR", &out2)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(summary_without_timing(&out2.join("summary.csv")), golden.trim_end());
}

#[test]
fn experiment_seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let config = fixture("fixtures/tiny_experiment.json");
    let out = dir.path().join("run");
    ok(&["--seed", "8", "experiment", "--config", p(&config), "--out", p(&out)]);
    assert_eq!(read_json(&out.join("manifest.json"))["seed"], 8);
    let golden = fs::read_to_string(fixture("golden/tiny_experiment_summary.csv")).unwrap();
    assert_ne!(summary_without_timing(&out.join("summary.csv")), golden.trim_end());
}

#[test]
fn recommend_on_synthetic_ratings() {
    let dir = TempDir::new().unwrap();
    let ratings = dir.path().join("ratings.csv");
    ok(&["--seed", "3", "synth-ratings", "--users", "600", "--out", p(&ratings)]);
    let run_once = |name: &str| {
        let out = dir.path().join(name);
        ok(&["recommend", "--ratings", p(&ratings), "--min-item-ratings", "20", "--N", "5,10", "--out", p(&out)]);
        out
    };
    let (a, b) = (run_once("a"), run_once("b"));
    assert_eq!(fs::read(a.join("recs.jsonl")).unwrap(), fs::read(b.join("recs.jsonl")).unwrap());
    assert_eq!(fs::read(a.join("metrics.json")).unwrap(), fs::read(b.join("metrics.json")).unwrap());

    let metrics = read_json(&a.join("metrics.json"));
    let keys: Vec<&String> = metrics.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["10", "5"]);
    for by_rec in metrics.as_object().unwrap().values() {
        assert_eq!(by_rec.as_object().unwrap().len(), 3);
    }
    let first: Value =
        serde_json::from_str(fs::read_to_string(a.join("recs.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert!(first["lists"]["superposition_hp"].as_array().unwrap().len() <= 10);
    let manifest = read_json(&a.join("manifest.json"));
    assert_eq!(manifest["config"]["filters"]["min_item_ratings"], 20);
}

#[test]
fn recommend_rejects_bad_dates() {
    let dir = TempDir::new().unwrap();
    let ratings = dir.path().join("ratings.csv");
    fs::write(&ratings, "user,item,rating,timestamp\n").unwrap();
    let out = run(&["recommend", "--ratings", p(&ratings), "--train-end", "April", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}
