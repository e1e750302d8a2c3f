//! End-to-end runs of the `sparce` binary on tiny datasets.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

fn sparce(args: &[&str], run_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparce"))
        .args(args)
        .env("SPARCE_RUN_ROOT", run_root)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], run_root: &Path) -> String {
    let out = sparce(args, run_root);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    let path = path.as_ref();
    serde_json::from_str(&std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A 120-sample dataset and a small classifier shared by every test.
struct Fixture {
    root: PathBuf,
    dataset: PathBuf,
    classifier: PathBuf,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-fixture");
        let _ = std::fs::remove_dir_all(&root);
        std::fs::create_dir_all(&root).unwrap();
        let dataset = root.join("ds");
        let classifier = root.join("clf");
        ok(&["synthesize", "--n-samples", "120", "--seed", "3", "--out", s(&dataset)], &root);
        ok(
            &["train-classifier", "--dataset", s(&dataset), "--epochs", "2", "--hidden-size", "8", "--out", s(&classifier)],
            &root,
        );
        Fixture {
            root,
            dataset,
            classifier,
        }
    })
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const SMALL_GAN: [&str; 8] = [
    "--epochs",
    "1",
    "--generator-hidden",
    "8",
    "--generator-layers",
    "1",
    "--max-queries",
    "6",
];

fn explain(fx: &Fixture, out: &Path, extra: &[&str]) -> String {
    let mut args = vec!["explain", "--classifier", s(&fx.classifier), "--out", s(out)];
    args.extend_from_slice(extra);
    ok(&args, &fx.root)
}

#[test]
fn synthesize_defaults_to_50_by_50_and_repeats_its_hash() {
    let dir = scratch("synth");
    let a = ok(&["synthesize", "--n-samples", "20", "--out", s(&dir.join("a"))], &dir);
    ok(&["synthesize", "--n-samples", "20", "--out", s(&dir.join("b"))], &dir);
    assert!(a.contains("N=20 T=50 F=50"), "{a}");
    assert!(a.contains("classes=[10, 10]"), "{a}");
    let ha = read_json(dir.join("a/manifest.json"))["dataset_hash"].clone();
    let hb = read_json(dir.join("b/manifest.json"))["dataset_hash"].clone();
    assert!(ha.is_string());
    assert_eq!(ha, hb);
    assert_eq!(read_json(dir.join("a/meta.json"))["n_timesteps"], 50);
}

#[test]
fn zero_samples_is_a_config_error_with_a_failed_manifest() {
    let dir = scratch("synth-bad");
    let out = sparce(&["synthesize", "--n-samples", "0", "--out", s(&dir.join("d"))], &dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_samples"));
    let m = read_json(dir.join("d/manifest.json"));
    assert_eq!(m["status"], "failed");
    assert!(m["error"].as_str().unwrap().contains("n_samples"));
}

#[test]
fn run_root_environment_variable_sets_default_outputs() {
    let dir = scratch("synth-root");
    ok(&["synthesize", "--n-samples", "10"], &dir);
    assert!(dir.join("dataset/meta.json").is_file());
    assert_eq!(read_json(dir.join("dataset/manifest.json"))["status"], "succeeded");
}

#[test]
fn config_file_sets_values_and_flags_win() {
    let dir = scratch("synth-config");
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, "[movingbox]\nn_samples = 12\nn_timesteps = 30\nseed = 9\n").unwrap();
    let out = ok(&["--config", s(&cfg), "synthesize", "--seed", "4", "--out", s(&dir.join("d"))], &dir);
    assert!(out.contains("N=12 T=30 F=50"), "{out}");
    assert_eq!(read_json(dir.join("d/manifest.json"))["config"]["seed"], 4);

    std::fs::write(&cfg, "[movingbx]\nn_samples = 12\n").unwrap();
    let out = sparce(&["--config", s(&cfg), "synthesize"], &dir);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_failures_exit_1_and_help_exits_0() {
    let dir = scratch("parse");
    assert_eq!(sparce(&["frobnicate"], &dir).status.code(), Some(1));
    assert_eq!(sparce(&["--help"], &dir).status.code(), Some(0));
    assert_eq!(sparce(&["plot", "histogram", "--runs", "x"], &dir).status.code(), Some(1));
}

#[test]
fn missing_dataset_is_a_runtime_failure() {
    let dir = scratch("clf-missing");
    let out = sparce(
        &["train-classifier", "--dataset", s(&dir.join("nope")), "--out", s(&dir.join("c"))],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(read_json(dir.join("c/manifest.json"))["status"], "failed");
}

#[test]
fn train_classifier_writes_checkpoint_history_and_data_record() {
    let fx = fixture();
    let m = read_json(fx.classifier.join("manifest.json"));
    assert_eq!(m["status"], "succeeded");
    for a in m["artifacts"].as_array().unwrap() {
        assert!(fx.classifier.join(a.as_str().unwrap()).exists(), "{a}");
    }
    assert!(fx.classifier.join("classifier/weights.bin").is_file());
    let history = std::fs::read_to_string(fx.classifier.join("history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 2);
    let record = read_json(fx.classifier.join("data.json"));
    assert_eq!(record["dataset_hash"], m["dataset_hash"]);
    assert_eq!(record["normalization"], "zscore");
    assert_eq!(Path::new(record["dataset"].as_str().unwrap()), fx.dataset);
}

#[test]
fn ics_on_five_queries_runs_without_training_artifacts() {
    let fx = fixture();
    let out = scratch("ics");
    explain(fx, &out, &["--approach", "ics", "--reps", "1", "--ics-steps", "10", "--max-queries", "5"]);
    let run = out.join("ics-t1-seed0");
    let metrics = read_json(run.join("metrics.json"));
    assert_eq!(metrics["approach"], "ics");
    assert_eq!(metrics["n_samples"], 5);
    for key in ["precision", "similarity", "sparsity", "smoothness", "saliency_auc", "T", "F", "F_mutable"] {
        assert!(metrics.get(key).is_some(), "{key}");
    }
    assert!(!run.join("train_log.jsonl").exists());
    assert!(!run.join("generator").exists());
    assert!(run.join("batch/counterfactuals/data.f32").is_file());
    assert!(run.join("manifest.json").is_file());
}

#[test]
fn explain_reps_use_consecutive_seeds_and_print_the_table() {
    let fx = fixture();
    let out = scratch("reps");
    let mut args = vec!["--approach", "sparce", "--reps", "2", "--seed", "5", "--lambda4", "0", "--lambda5", "0"];
    args.extend_from_slice(&SMALL_GAN);
    let stdout = explain(fx, &out, &args);
    assert!(stdout.contains("sparsity"), "{stdout}");
    for seed in [5, 6] {
        let run = out.join(format!("sparce-t1-seed{seed}"));
        let m = read_json(run.join("manifest.json"));
        assert_eq!(m["status"], "succeeded");
        assert_eq!(m["seeds"][0], seed);
        assert_eq!(m["config"]["train"]["loss_weights"]["sparsity"], 0.0);
        assert_eq!(m["config"]["train"]["loss_weights"]["jerk"], 0.0);
        assert_eq!(m["dataset_hash"], read_json(fx.classifier.join("data.json"))["dataset_hash"]);
        let log = std::fs::read_to_string(run.join("train_log.jsonl")).unwrap();
        assert_eq!(log.lines().count(), 1);
        assert!(run.join("generator/arch.json").is_file());
        assert!(run.join("discriminator/arch.json").is_file());
        assert!(run.join("roc.csv").is_file());
    }
}

#[test]
fn same_seed_reproduces_metrics() {
    let fx = fixture();
    let a = scratch("determinism-a");
    let b = scratch("determinism-b");
    let mut args = vec!["--approach", "sparce", "--reps", "1"];
    args.extend_from_slice(&SMALL_GAN);
    explain(fx, &a, &args);
    explain(fx, &b, &args);
    let ma = std::fs::read(a.join("sparce-t1-seed0/metrics.json")).unwrap();
    let mb = std::fs::read(b.join("sparce-t1-seed0/metrics.json")).unwrap();
    assert_eq!(ma, mb);
}

#[test]
fn explain_rejects_unknown_approach_and_absent_target_class() {
    let fx = fixture();
    let out = scratch("explain-bad");
    let args = ["explain", "--classifier", s(&fx.classifier), "--out", s(&out)];
    let mut bad = args.to_vec();
    bad.extend(["--approach", "foo"]);
    assert_eq!(sparce(&bad, &fx.root).status.code(), Some(1));

    let mut bad = args.to_vec();
    bad.extend(["--approach", "ics", "--target-class", "4", "--reps", "1"]);
    let res = sparce(&bad, &fx.root);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("target_class"));
    assert_eq!(read_json(out.join("ics-t4-seed0/manifest.json"))["status"], "failed");
}

#[test]
fn explain_refuses_a_dataset_other_than_the_training_one() {
    let fx = fixture();
    let dir = scratch("explain-hash");
    ok(&["synthesize", "--n-samples", "120", "--seed", "4", "--out", s(&dir.join("other"))], &dir);
    let res = sparce(
        &[
            "explain",
            "--classifier",
            s(&fx.classifier),
            "--dataset",
            s(&dir.join("other")),
            "--approach",
            "ics",
            "--reps",
            "1",
            "--out",
            s(&dir),
        ],
        &dir,
    );
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("hash"));
}

#[test]
fn evaluate_summarises_runs_and_rejects_mixed_targets() {
    let fx = fixture();
    let out = scratch("evaluate");
    explain(fx, &out, &["--approach", "ics", "--reps", "1", "--ics-steps", "10", "--max-queries", "6"]);
    let summary = out.join("summary");
    let table = ok(&["evaluate", s(&out.join("ics-t1-seed0")), "--out", s(&summary)], &fx.root);
    assert!(table.contains("ICS"), "{table}");
    assert!(table.contains("± 0.00"), "{table}");
    let agg = read_json(summary.join("summary.json"));
    assert_eq!(agg["rows"][0]["metrics"][0]["std"], 0.0);
    assert!(std::fs::read_to_string(summary.join("summary.csv")).unwrap().starts_with("approach"));
    assert!(summary.join("summary.txt").is_file());

    explain(
        fx,
        &out,
        &["--approach", "ics", "--reps", "1", "--ics-steps", "10", "--max-queries", "6", "--target-class", "0"],
    );
    let res = sparce(&["evaluate", s(&out), "--out", s(&summary)], &fx.root);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("target_class"));
}

#[test]
fn plots_write_svg_png_and_csv() {
    let fx = fixture();
    let out = scratch("plots");
    explain(fx, &out, &["--approach", "ics", "--reps", "2", "--ics-steps", "10", "--max-queries", "6"]);
    let plots = out.join("figures");
    let runs = s(&out);
    ok(&["plot", "heatmap", "--runs", runs, "--samples", "2", "--out", s(&plots)], &fx.root);
    ok(&["plot", "roc", "--runs", runs, "--out", s(&plots)], &fx.root);
    ok(
        &["plot", "embedding", "--runs", s(&out.join("ics-t1-seed0")), "--per-group", "6", "--out", s(&plots)],
        &fx.root,
    );
    for stem in ["heatmap-sample0", "heatmap-sample1", "roc", "embedding-ics-t1-seed0"] {
        for ext in ["svg", "png", "csv"] {
            assert!(plots.join(format!("{stem}.{ext}")).is_file(), "{stem}.{ext}");
        }
    }
    let roc = std::fs::read_to_string(plots.join("roc.csv")).unwrap();
    assert_eq!(roc.lines().count(), 1 + 101);
    let svg = std::fs::read_to_string(plots.join("embedding-ics-t1-seed0.svg")).unwrap();
    for group in ["queries", "targets", "counterfactuals"] {
        assert!(svg.contains(group), "{group}");
    }
    let m = read_json(plots.join("manifest.json"));
    assert_eq!(m["status"], "succeeded");
}

#[test]
fn roc_without_saliency_is_an_error() {
    let fx = fixture();
    let out = scratch("roc-nosal");
    explain(fx, &out, &["--approach", "ics", "--reps", "1", "--ics-steps", "10", "--max-queries", "6"]);
    let run = out.join("ics-t1-seed0");
    for part in ["queries", "counterfactuals"] {
        let dir = run.join("batch").join(part);
        std::fs::remove_file(dir.join("saliency.u8")).unwrap();
        let mut meta = read_json(dir.join("meta.json"));
        meta["has_saliency"] = Value::Bool(false);
        std::fs::write(dir.join("meta.json"), meta.to_string()).unwrap();
    }
    let res = sparce(&["plot", "roc", "--runs", s(&run), "--out", s(&out.join("p"))], &fx.root);
    assert_ne!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stderr).contains("saliency"));
    assert_eq!(read_json(out.join("p/manifest.json"))["status"], "failed");
}
