use std::path::{Path, PathBuf};
use std::process::Command;

use postshift::shiftlab::{bayes_oracle, benchmarks};
use postshift::{write_dataset, MetricSpec};
use postshift_cli::report::{read_json_lines, RunReport};
use postshift_cli::RunConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const GAUSSIAN: &str = r#"
seed = 5
method = "fw-eg-known"
output = "out"

[metric]
name = "gmean"

[synthetic]
benchmark = "gaussian-cluster-noise"
n_train = 3000
n_val = 600
n_test = 3000

[optim]
iterations = 6
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_postshift"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn report(dir: &Path) -> RunReport {
    read_json_lines::<RunReport>(&dir.join("report.jsonl")).unwrap().remove(0)
}

fn without_timing(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(std::fs::read_to_string(path).unwrap().trim()).unwrap();
    v.as_object_mut().unwrap().remove("wall_time_ms");
    v
}

fn eval(predictions: &Path, metric: &str, split: &str) -> f64 {
    let line = run_ok(&["eval", "--predictions", predictions.to_str().unwrap(), "--metric", metric, "--split", split]);
    serde_json::from_str::<Value>(&line).unwrap()["value"].as_f64().unwrap()
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", GAUSSIAN);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    run_ok(&["run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(without_timing(&a.join("report.jsonl")), without_timing(&b.join("report.jsonl")));
    for file in ["predictions.csv", "trace.jsonl", "rule.json"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    let c = dir.path().join("c");
    run_ok(&["run", cfg.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "7"]);
    assert_ne!(std::fs::read(a.join("predictions.csv")).unwrap(), std::fs::read(c.join("predictions.csv")).unwrap());
}

#[test]
fn reported_metrics_are_recomputed_from_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", GAUSSIAN);
    for method in ["fw-eg-known", "pi-ew", "plugin-train-val", "argmax-val"] {
        let out = dir.path().join(method);
        run_ok(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--method", method, "--spacing", "0.01"]);
        let r = report(&out);
        for split in ["train", "val", "test"] {
            let recomputed = eval(&out.join("predictions.csv"), "gmean", split);
            assert_eq!(Some(recomputed), r.value(split), "{method} {split}");
        }
    }
}

#[test]
fn frank_wolfe_report_has_one_trace_record_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", GAUSSIAN);
    run_ok(&["run", cfg.to_str().unwrap()]);
    let out = dir.path().join("out");
    let trace: Vec<Value> = read_json_lines(&out.join("trace.jsonl")).unwrap();
    assert_eq!(trace.len(), 6);
    let r = report(&out);
    assert_eq!(r.artifacts.iterations, Some(6));
    assert_eq!(r.artifacts.condition_numbers.len(), 6);
    assert_eq!(r.unavailable_baselines.len(), 5);
}

#[test]
fn domain_shift_pi_ew_reaches_the_bayes_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
seed = 21
method = "pi-ew"
output = "out"
[metric]
name = "accuracy"
[synthetic]
benchmark = "two-point-domain-shift"
n_train = 50000
n_val = 5000
n_test = 50000
[optim]
epsilon = 1.0
reg = 1e-8
"#;
    let cfg = write_config(dir.path(), "ds.toml", text);
    run_ok(&["run", cfg.to_str().unwrap()]);
    let (spec, _) = benchmarks::two_point_domain_shift();
    let bayes = bayes_oracle(&spec, &MetricSpec::accuracy(2), 20, None).unwrap();
    assert!((bayes.value - 0.72).abs() < 1e-12);
    let test = report(&dir.path().join("out")).value("test").unwrap();
    assert!((test - bayes.value).abs() < 0.01, "test accuracy {test} vs {}", bayes.value);
}

#[test]
fn epsilon_sweep_runs_six_children_and_keeps_the_best() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[sweep]\nepsilon = [1.0, 0.4, 0.1, 0.01, 0.001, 0.0001]\n",
        GAUSSIAN.replace("fw-eg-known", "fw-eg-unknown")
    );
    let cfg = write_config(dir.path(), "sweep.toml", &text);
    run_ok(&["sweep", cfg.to_str().unwrap()]);
    let out = dir.path().join("out");
    let records: Vec<Value> = read_json_lines(&out.join("sweep.jsonl")).unwrap();
    let candidates: Vec<&Value> = records.iter().filter(|r| r["record"] == "candidate").collect();
    assert_eq!(candidates.len(), 6);
    let best = records.iter().find(|r| r["record"] == "best").unwrap();
    let best_val = best["val"].as_f64().unwrap();
    for c in &candidates {
        if let Some(v) = c["val"].as_f64() {
            assert!(v <= best_val);
        }
    }
    let index = best["index"].as_u64().unwrap();
    assert!(out.join(format!("candidate-{index}")).join("report.jsonl").exists());
}

#[test]
fn single_candidate_sweep_matches_a_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = GAUSSIAN.replace("iterations = 6", "iterations = 6\nepsilon = 0.4");
    let run_cfg = write_config(dir.path(), "run.toml", &base);
    let sweep_cfg = write_config(dir.path(), "sweep.toml", &format!("{base}\n[sweep]\nepsilon = [0.4]\n"));
    let run_out = dir.path().join("run");
    let sweep_out = dir.path().join("sweep");
    run_ok(&["run", run_cfg.to_str().unwrap(), "--out", run_out.to_str().unwrap()]);
    run_ok(&["sweep", sweep_cfg.to_str().unwrap(), "--out", sweep_out.to_str().unwrap()]);
    let child = sweep_out.join("candidate-0");
    assert_eq!(without_timing(&run_out.join("report.jsonl")), without_timing(&child.join("report.jsonl")));
    assert_eq!(
        std::fs::read(run_out.join("predictions.csv")).unwrap(),
        std::fs::read(child.join("predictions.csv")).unwrap()
    );
}

#[test]
fn basis_sweep_selects_the_higher_validation_metric() {
    let dir = tempfile::tempdir().unwrap();
    // the third basis is collinear (a constant next to a partition) and fails
    let text = format!(
        "{}\n[[sweep.basis]]\nconstant = true\nauto_clusters = false\n\n[[sweep.basis]]\n\n[[sweep.basis]]\nconstant = true\n",
        GAUSSIAN
    );
    let cfg = write_config(dir.path(), "sweep.toml", &text);
    let config = RunConfig::load(&cfg).unwrap();
    let outcome = postshift_cli::sweep(&config).unwrap();
    assert_eq!(outcome.candidates.len(), 3);
    let failed = &outcome.candidates[2];
    assert!(!failed.ok && failed.val.is_none());
    assert!(failed.error.as_deref().unwrap().contains("singular"));
    let vals: Vec<f64> = outcome.candidates[..2].iter().map(|c| c.val.unwrap()).collect();
    let winner = if vals[1] > vals[0] { 1 } else { 0 };
    assert_eq!(outcome.best, winner);
    assert_eq!(outcome.report.value("val"), Some(vals[winner]));
}

#[test]
fn synthesized_files_load_back_through_a_data_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "synth.toml", GAUSSIAN);
    let bench = dir.path().join("bench");
    let stdout = run_ok(&["synth", cfg.to_str().unwrap(), "--out", bench.to_str().unwrap(), "--oracle-resolution", "8"]);
    assert!(stdout.contains("oracle"));
    let oracle: Value = serde_json::from_str(&std::fs::read_to_string(bench.join("oracle.json")).unwrap()).unwrap();
    assert_eq!(oracle["oracle"]["resolution"], 8);

    let data = std::fs::read_to_string(bench.join("data.toml")).unwrap();
    let text = format!(
        "seed = 5\nmethod = \"fw-eg-known\"\noutput = \"out\"\n[metric]\nname = \"gmean\"\n[optim]\niterations = 6\n{data}"
    );
    let file_cfg = write_config(&bench, "run.toml", &text);
    run_ok(&["run", file_cfg.to_str().unwrap()]);
    // same samples and the same exact probabilities, read from disk
    let from_files = report(&bench.join("out"));
    run_ok(&["run", cfg.to_str().unwrap()]);
    let simulated = report(&dir.path().join("out"));
    for split in ["train", "val", "test"] {
        let (a, b) = (from_files.value(split).unwrap(), simulated.value(split).unwrap());
        assert!((a - b).abs() < 1e-9, "{split}: {a} vs {b}");
    }
}

#[test]
fn missing_probabilities_fall_back_to_logistic_regression() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, _) = benchmarks::gaussian_cluster_noise(0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (name, n) in [("train.csv", 1500), ("val.csv", 400)] {
        let d = spec.sample_clean(n, &mut rng).unwrap();
        write_dataset(dir.path().join(name), &d, None).unwrap();
    }
    let text = r#"
seed = 1
method = "argmax-train"
output = "out"
[metric]
name = "accuracy"
[data]
train = "train.csv"
val = "val.csv"
[data.schema]
features = ["x1", "x2"]
label = "label"
n_classes = 3
group = "group"
"#;
    let cfg = write_config(dir.path(), "run.toml", text);
    run_ok(&["run", cfg.to_str().unwrap()]);
    let r = report(&dir.path().join("out"));
    // a linear model on well separated means does much better than the 0.6 majority rate
    assert!(r.value("val").unwrap() > 0.65);
    assert_eq!(r.value("test"), None);
    assert!(!r.values.contains_key("test"));
}

#[test]
fn fairness_oracle_reads_the_withheld_attribute() {
    let dir = tempfile::tempdir().unwrap();
    let spec = postshift::shiftlab::SyntheticSpec::Gaussian {
        means: vec![vec![-1.0, 0.0], vec![1.0, 0.5]],
        covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        priors: vec![0.7, 0.3],
        cluster_feature: Some(1),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (name, n) in [("train.csv", 1500), ("val.csv", 500)] {
        let d = spec.sample_clean(n, &mut rng).unwrap();
        let protected = d.groups().unwrap().to_vec();
        let d = d.with_protected(protected).unwrap();
        let p = spec.conditional_model(&d).unwrap();
        write_dataset(dir.path().join(name), &d, Some(&p)).unwrap();
    }
    let text = r#"
seed = 3
method = "fw-eg-unknown"
output = "out"
[metric]
name = "fairness"
[data]
train = "train.csv"
val = "val.csv"
[data.schema]
features = ["x1", "x2"]
label = "label"
n_classes = 2
group = "group"
protected = "protected"
probs = ["p1", "p2"]
[optim]
iterations = 4
"#;
    let cfg = write_config(dir.path(), "run.toml", text);
    run_ok(&["run", cfg.to_str().unwrap()]);
    let out = dir.path().join("out");
    let r = report(&out);
    assert_eq!(r.value("train"), None);
    let val = r.value("val").unwrap();
    assert_eq!(eval(&out.join("predictions.csv"), "fairness", "val"), val);
}

#[test]
fn failures_exit_nonzero_with_an_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
seed = 1
method = "pi-ew"
output = "out"
[metric]
name = "accuracy"
[data]
train = "absent.csv"
val = "absent.csv"
[data.schema]
features = ["x1"]
label = "label"
"#;
    let cfg = write_config(dir.path(), "run.toml", text);
    let out = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let err: Vec<Value> = read_json_lines(&dir.path().join("out").join("error.json")).unwrap();
    assert_eq!(err[0]["record"], "error");
    assert!(err[0]["message"].as_str().unwrap().contains("absent.csv"));

    // the first plug-in iterate is constant on two clusters, so the next
    // probe system has an exact null vector whatever epsilon is
    let fw = write_config(dir.path(), "fw.toml", GAUSSIAN);
    let fw_out = dir.path().join("fw");
    let out = bin().args(["run", fw.to_str().unwrap(), "--seed", "6", "--out", fw_out.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let err: Vec<Value> = read_json_lines(&fw_out.join("error.json")).unwrap();
    assert_eq!(err[0]["message"], "Frank-Wolfe iteration 1 failed");
    assert!(err[0]["causes"][0].as_str().unwrap().contains("singular"));
    let partial: Vec<Value> = read_json_lines(&fw_out.join("trace.jsonl")).unwrap();
    assert_eq!(partial.len(), 1);
    let ridge = write_config(dir.path(), "ridge.toml", &GAUSSIAN.replace("iterations = 6", "iterations = 6\nreg = 1e-8"));
    run_ok(&["run", ridge.to_str().unwrap(), "--seed", "6", "--out", dir.path().join("ridge").to_str().unwrap()]);

    let bad = write_config(dir.path(), "bad.toml", &GAUSSIAN.replace("seed = 5\n", ""));
    assert!(!bin().args(["run", bad.to_str().unwrap()]).output().unwrap().status.success());
}
