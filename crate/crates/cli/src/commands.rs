//! `synthesize`, `train-classifier`, `explain` and `evaluate`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sparce::dataset::{load_dataset, save_dataset, NormalizationKind};
use sparce::experiment::{explain as run_explain, prepare, save_batch, ExplainConfig, Prepared};
use sparce::metrics::MetricsReport;
use sparce::movingbox::{generate, saliency_fraction, BackgroundProcess};
use sparce::nets::{load_classifier, save_checkpoint, ModelSpec};
use sparce::report::{aggregate, RunManifest, MANIFEST_FILE};
use sparce::training::{pretrain_classifier, write_log};
use sparce::{Approach, ClassifierNet, Dataset};

use crate::config::{DataRecord, FileConfig, DATA_RECORD};
use crate::{EvaluateArgs, ExplainArgs, SynthesizeArgs, TrainClassifierArgs, UsageError};

pub const METRICS_FILE: &str = "metrics.json";
pub const CLASSIFIER_DIR: &str = "classifier";
pub const BATCH_DIR: &str = "batch";

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn json<T: serde::Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("serializable config")
}

/// Runs `body`, then records its outcome in `dir/manifest.json`.
///
/// A successful run whose listed artifacts are not all on disk is turned into a failure.
pub(crate) fn with_manifest(
    dir: &Path,
    mut manifest: RunManifest,
    body: impl FnOnce(&mut RunManifest) -> Result<()>,
) -> Result<()> {
    let mut result = fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .and_then(|()| body(&mut manifest));
    if result.is_ok() {
        let missing = manifest.missing_artifacts(dir);
        if !missing.is_empty() {
            result = Err(anyhow::anyhow!("artifacts missing after the run: {missing:?}"));
        }
    }
    match &result {
        Ok(()) => manifest.succeed(),
        Err(e) => manifest.fail(format!("{e:#}")),
    }
    manifest.add_artifact(MANIFEST_FILE);
    let saved = manifest.save(dir);
    result?;
    saved?;
    Ok(())
}

fn run_id(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

pub fn synthesize(run_root: &Path, file: FileConfig, args: SynthesizeArgs) -> Result<()> {
    let mut cfg = file.movingbox;
    if let Some(n) = args.n_samples {
        cfg.n_samples = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = args.signal_shift {
        cfg.signal_shift = m;
    }
    if let Some(b) = args.background {
        cfg.background_process = match b.as_str() {
            "iid_gaussian" => BackgroundProcess::IidGaussian,
            "ar1" => BackgroundProcess::Ar1,
            other => return Err(usage(format!("background: expected iid_gaussian|ar1, got `{other}`"))),
        };
    }
    if let Some(a) = args.ar_coefficient {
        cfg.ar_coefficient = a;
    }
    let out = args.out.unwrap_or_else(|| run_root.join("dataset"));
    let mut manifest = RunManifest::new(run_id(&out), "synthesize", json(&cfg));
    manifest.seeds = vec![cfg.seed];
    with_manifest(&out, manifest, |m| {
        cfg.validate()?;
        let ds: Dataset = generate(&cfg)?;
        save_dataset(&ds, &out)?;
        let hash = ds.content_hash();
        m.dataset_path = Some(absolute(&out));
        m.dataset_hash = Some(hash.clone());
        m.add_artifact("meta.json");
        let counts = ds.class_counts();
        println!(
            "N={} T={} F={} classes={:?} saliency_fraction={:.4} hash={hash}",
            ds.n_samples(),
            ds.n_timesteps(),
            ds.n_features(),
            counts,
            saliency_fraction(&ds)?
        );
        println!("wrote {}", out.display());
        Ok(())
    })
}

pub(crate) fn prepared_from(dataset: &Path, record: &crate::config::DataConfig) -> Result<(Prepared<f32>, String)> {
    let ds: Dataset = load_dataset(dataset).with_context(|| format!("loading dataset {}", dataset.display()))?;
    let hash = ds.content_hash();
    let prepared = prepare(&ds, record.test_fraction, record.split_seed, record.normalization)?;
    Ok((prepared, hash))
}

pub fn train_classifier(run_root: &Path, file: FileConfig, args: TrainClassifierArgs) -> Result<()> {
    let mut data = file.data;
    if let Some(f) = args.test_fraction {
        data.test_fraction = f;
    }
    if let Some(s) = args.split_seed {
        data.split_seed = s;
    }
    if let Some(n) = args.normalization {
        data.normalization = n.parse::<NormalizationKind>()?;
    }
    let mut cfg = file.classifier;
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(h) = args.hidden_size {
        cfg.hidden_size = h;
    }
    let out = args.out.unwrap_or_else(|| run_root.join("classifier"));
    let snapshot = serde_json::json!({ "classifier": json(&cfg), "data": json(&data) });
    let mut manifest = RunManifest::new(run_id(&out), "train-classifier", snapshot);
    manifest.seeds = vec![cfg.seed, data.split_seed];
    with_manifest(&out, manifest, |m| {
        cfg.validate()?;
        let (prepared, hash) = prepared_from(&args.dataset, &data)?;
        m.dataset_path = Some(absolute(&args.dataset));
        m.dataset_hash = Some(hash.clone());
        let outcome = pretrain_classifier(&prepared.train, &prepared.test, &cfg)?;
        let spec = outcome.classifier.spec().clone();
        save_checkpoint(out.join(CLASSIFIER_DIR), ModelSpec::Classifier(spec), &outcome.classifier)?;
        m.add_artifact(CLASSIFIER_DIR);
        DataRecord {
            dataset: absolute(&args.dataset),
            dataset_hash: hash,
            data: data.clone(),
        }
        .save(&out)?;
        m.add_artifact(DATA_RECORD);
        let mut lines = String::new();
        for epoch in &outcome.history {
            lines.push_str(&serde_json::to_string(epoch)?);
            lines.push('\n');
        }
        fs::write(out.join("history.jsonl"), lines).context("writing history.jsonl")?;
        m.add_artifact("history.jsonl");
        for e in &outcome.history {
            println!(
                "epoch {:>3}  loss {:.4}  train_acc {:.4}",
                e.epoch, e.loss, e.train_accuracy
            );
        }
        println!(
            "test accuracy {:.4} on {} samples",
            outcome.test_accuracy,
            prepared.test.n_samples()
        );
        println!("wrote {}", out.display());
        Ok(())
    })
}

/// Loads a classifier directory written by `train-classifier` and rebuilds its data split.
pub(crate) fn load_trained(
    classifier_dir: &Path,
    dataset: Option<&Path>,
) -> Result<(ClassifierNet, DataRecord, Prepared<f32>)> {
    let record = DataRecord::load(classifier_dir)?;
    let classifier: ClassifierNet = load_classifier(classifier_dir.join(CLASSIFIER_DIR))?;
    let path = dataset.map(Path::to_path_buf).unwrap_or_else(|| record.dataset.clone());
    let (prepared, hash) = prepared_from(&path, &record.data)?;
    if hash != record.dataset_hash {
        return Err(usage(format!(
            "dataset {} has hash {hash}, the classifier was trained on {}",
            path.display(),
            record.dataset_hash
        )));
    }
    let record = DataRecord { dataset: absolute(&path), ..record };
    Ok((classifier, record, prepared))
}

fn explain_config(file: &FileConfig, args: &ExplainArgs) -> Result<ExplainConfig> {
    let mut train = file.train.clone();
    if let Some(a) = &args.approach {
        train.approach = a.parse::<Approach>()?;
    }
    if let Some(t) = args.target_class {
        train.target_class = t;
    }
    let w = &mut train.loss_weights;
    for (flag, slot) in [
        (args.lambda1, &mut w.adversarial),
        (args.lambda2, &mut w.classification),
        (args.lambda3, &mut w.similarity),
        (args.lambda4, &mut w.sparsity),
        (args.lambda5, &mut w.jerk),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    if let Some(s) = args.seed {
        train.seed = s;
    }
    if let Some(e) = args.epochs {
        train.epochs = e;
    }
    if let Some(b) = args.batch_size {
        train.batch_size = b;
    }
    if let Some(h) = args.generator_hidden {
        train.architecture.generator_hidden = h;
    }
    if let Some(l) = args.generator_layers {
        train.architecture.generator_layers = l;
    }
    let mut ics = file.ics.clone();
    if let Some(n) = args.ics_steps {
        ics.n_steps = n;
    }
    Ok(ExplainConfig {
        train,
        ics,
        zero_tol: file.explain.zero_tol,
        max_queries: args.max_queries.or(file.explain.max_queries),
    })
}

/// `<approach>-t<target>-seed<seed>`.
pub fn run_dir_name(cfg: &ExplainConfig) -> String {
    format!("{}-t{}-seed{}", cfg.approach(), cfg.train.target_class, cfg.seed())
}

/// The parts of the configuration that affect the chosen approach.
fn explain_snapshot(cfg: &ExplainConfig) -> serde_json::Value {
    let method = if cfg.approach() == Approach::Ics {
        ("ics", json(&cfg.ics))
    } else {
        ("train", json(&cfg.train))
    };
    serde_json::json!({
        "approach": cfg.approach(),
        "target_class": cfg.train.target_class,
        "seed": cfg.seed(),
        method.0: method.1,
        "zero_tol": cfg.zero_tol,
        "max_queries": cfg.max_queries,
    })
}

fn explain_one(dir: &Path, cfg: &ExplainConfig, classifier: &ClassifierNet, record: &DataRecord, data: &Prepared<f32>) -> Result<MetricsReport> {
    let manifest = RunManifest::new(run_id(dir), "explain", explain_snapshot(cfg))
        .with_dataset(&record.dataset, &record.dataset_hash);
    let mut report = None;
    with_manifest(dir, manifest, |m| {
        m.seeds = vec![cfg.seed()];
        let outcome = run_explain(data, classifier, cfg)?;
        outcome.report.save(dir.join(METRICS_FILE))?;
        m.add_artifact(METRICS_FILE);
        save_batch(dir.join(BATCH_DIR), &outcome.batch, &outcome.queries)?;
        m.add_artifact(BATCH_DIR);
        record.save(dir)?;
        m.add_artifact(DATA_RECORD);
        if let Some(roc) = &outcome.roc {
            sparce::metrics::write_roc_csv(dir.join("roc.csv"), roc)?;
            m.add_artifact("roc.csv");
        }
        if !outcome.log.is_empty() {
            write_log(dir.join("train_log.jsonl"), &outcome.log)?;
            m.add_artifact("train_log.jsonl");
        }
        if let Some(g) = &outcome.generator {
            save_checkpoint(dir.join("generator"), ModelSpec::Generator(g.spec().clone()), g)?;
            m.add_artifact("generator");
        }
        if let Some(d) = &outcome.discriminator {
            save_checkpoint(dir.join("discriminator"), ModelSpec::Discriminator(d.spec().clone()), d)?;
            m.add_artifact("discriminator");
        }
        report = Some(outcome.report);
        Ok(())
    })?;
    Ok(report.expect("set on success"))
}

fn format_report(r: &MetricsReport) -> String {
    let auc = r.saliency_auc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
    format!(
        "{} seed {}: precision {:.4}  similarity {:.4}  sparsity {:.4}  smoothness {:.4}  auc {auc}  (n={})",
        r.approach.display_name(),
        r.seed,
        r.precision,
        r.similarity,
        r.sparsity,
        r.smoothness,
        r.n_samples
    )
}

pub fn explain(run_root: &Path, file: FileConfig, args: ExplainArgs) -> Result<()> {
    let base = explain_config(&file, &args)?;
    let reps = args.reps.unwrap_or(file.explain.reps);
    if reps == 0 {
        return Err(usage("reps: must be at least 1"));
    }
    let out = args.out.clone().unwrap_or_else(|| run_root.to_path_buf());
    let validated = if base.approach() == Approach::Ics {
        base.ics.validate()
    } else {
        base.train.validate()
    };
    let loaded = validated
        .map_err(anyhow::Error::from)
        .and_then(|()| load_trained(&args.classifier, args.dataset.as_deref()));
    let (classifier, record, data) = match loaded {
        Ok(v) => v,
        Err(e) => {
            let dir = out.join(run_dir_name(&base));
            let mut manifest = RunManifest::new(run_id(&dir), "explain", explain_snapshot(&base));
            manifest.seeds = vec![base.seed()];
            manifest.fail(format!("{e:#}"));
            manifest.add_artifact(MANIFEST_FILE);
            manifest.save(&dir)?;
            return Err(e);
        }
    };
    let mut reports = Vec::with_capacity(reps);
    for i in 0..reps {
        let mut cfg = base.clone();
        cfg.train.seed = base.seed() + i as u64;
        let dir = out.join(run_dir_name(&cfg));
        let report = explain_one(&dir, &cfg, &classifier, &record, &data)
            .with_context(|| format!("run {}", dir.display()))?;
        println!("{}", format_report(&report));
        println!("wrote {}", dir.display());
        reports.push(report);
    }
    if reps > 1 {
        println!();
        print!("{}", aggregate(&reports)?.to_table());
    }
    Ok(())
}

/// Run directories named on the command line, expanding parents into their child runs.
pub(crate) fn expand_runs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut runs = Vec::new();
    for p in paths {
        if p.join(METRICS_FILE).is_file() {
            runs.push(p.clone());
            continue;
        }
        if !p.is_dir() {
            return Err(usage(format!("{} is not a directory", p.display())));
        }
        let mut children: Vec<PathBuf> = fs::read_dir(p)
            .with_context(|| format!("listing {}", p.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|c| c.join(METRICS_FILE).is_file())
            .collect();
        if children.is_empty() {
            return Err(usage(format!("no runs with {METRICS_FILE} under {}", p.display())));
        }
        children.sort();
        runs.extend(children);
    }
    Ok(runs)
}

pub fn evaluate(run_root: &Path, args: EvaluateArgs) -> Result<()> {
    let out = args.out.unwrap_or_else(|| run_root.join("summary"));
    let runs = expand_runs(&args.runs)?;
    let snapshot = serde_json::json!({ "runs": runs.iter().map(|r| absolute(r)).collect::<Vec<_>>() });
    let manifest = RunManifest::new(run_id(&out), "evaluate", snapshot);
    with_manifest(&out, manifest, |m| {
        let mut reports = Vec::with_capacity(runs.len());
        let mut hashes: Vec<(PathBuf, String)> = Vec::new();
        for r in &runs {
            reports.push(MetricsReport::load(r.join(METRICS_FILE))?);
            if let Ok(man) = RunManifest::load(r) {
                if let Some(h) = man.dataset_hash {
                    hashes.push((r.clone(), h));
                }
            }
        }
        if let Some((first_run, first)) = hashes.first() {
            let odd: Vec<String> = hashes
                .iter()
                .filter(|(_, h)| h != first)
                .map(|(r, h)| format!("{}: dataset {h} vs {first} in {}", r.display(), first_run.display()))
                .collect();
            if !odd.is_empty() {
                bail!(UsageError(format!("runs use different datasets: {}", odd.join("; "))));
            }
            m.dataset_hash = Some(first.clone());
        }
        let agg = aggregate(&reports).map_err(|e| match e {
            sparce::Error::InvalidDataset(msg) => {
                let names: Vec<String> = runs.iter().enumerate().map(|(i, r)| format!("run {i} = {}", r.display())).collect();
                usage(format!("{msg} ({})", names.join(", ")))
            }
            e => e.into(),
        })?;
        m.seeds = reports.iter().map(|r| r.seed).collect();
        fs::write(out.join("summary.csv"), agg.to_csv()).context("writing summary.csv")?;
        fs::write(out.join("summary.txt"), agg.to_table()).context("writing summary.txt")?;
        fs::write(out.join("summary.json"), serde_json::to_string_pretty(&agg)?).context("writing summary.json")?;
        for a in ["summary.csv", "summary.txt", "summary.json"] {
            m.add_artifact(a);
        }
        print!("{}", agg.to_table());
        println!("wrote {}", out.display());
        Ok(())
    })
}
