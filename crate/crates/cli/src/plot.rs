//! `plot heatmap|roc|embedding`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ndarray::{s, Axis};
use sparce::dataset::partition_by_target;
use sparce::experiment::load_batch;
use sparce::losses::LossWeights;
use sparce::metrics::{embed_2d, mean_roc, saliency_roc, MetricsReport};
use sparce::report::{
    embedding_figure, heatmap_figure, roc_figure, write_embedding_csv, write_heatmap_csv, write_mean_roc_csv,
    HeatmapPanel, RunManifest,
};
use sparce::{Approach, Batch, Dataset};

use crate::commands::{expand_runs, prepared_from, with_manifest, BATCH_DIR, METRICS_FILE};
use crate::config::{DataRecord, FileConfig};
use crate::{PlotArgs, PlotKind, UsageError};

/// Points on the shared false-positive-rate grid of a mean ROC curve.
const ROC_GRID: usize = 101;

struct Run {
    dir: PathBuf,
    report: MetricsReport,
    batch: Batch,
    queries: Dataset,
    label: String,
}

fn load_run(dir: &Path) -> Result<Run> {
    let report = MetricsReport::load(dir.join(METRICS_FILE))?;
    let (batch, queries) = load_batch(dir.join(BATCH_DIR))?;
    let label = run_label(dir, report.approach);
    Ok(Run {
        dir: dir.to_path_buf(),
        report,
        batch,
        queries,
        label,
    })
}

/// Approach name, with the loss weights appended when a generator ran with a subset of them.
fn run_label(dir: &Path, approach: Approach) -> String {
    let name = approach.display_name().to_string();
    if approach != Approach::Sparce {
        return name;
    }
    let weights = RunManifest::load(dir)
        .ok()
        .and_then(|m| m.config.get("train")?.get("loss_weights").cloned())
        .and_then(|w| serde_json::from_value::<LossWeights>(w).ok());
    match weights {
        Some(w) if w != LossWeights::all() => {
            let active: Vec<String> = [w.adversarial, w.classification, w.similarity, w.sparsity, w.jerk]
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(k, _)| (k + 1).to_string())
                .collect();
            format!("{name} λ{}", active.join(","))
        }
        _ => name,
    }
}

pub fn plot(run_root: &Path, file: FileConfig, args: PlotArgs) -> Result<()> {
    let out = args.out.clone().unwrap_or_else(|| run_root.join("plots"));
    let runs = expand_runs(&args.runs)?;
    let kind = match args.kind {
        PlotKind::Heatmap => "heatmap",
        PlotKind::Roc => "roc",
        PlotKind::Embedding => "embedding",
    };
    let snapshot = serde_json::json!({
        "kind": kind,
        "runs": runs,
        "samples": args.samples,
        "per_group": args.per_group,
        "tsne": serde_json::to_value(&file.tsne)?,
    });
    let manifest = RunManifest::new(kind, format!("plot {kind}"), snapshot);
    with_manifest(&out, manifest, |m| {
        let runs: Vec<Run> = runs.iter().map(|d| load_run(d)).collect::<Result<_>>()?;
        m.seeds = runs.iter().map(|r| r.report.seed).collect();
        let written = match args.kind {
            PlotKind::Heatmap => heatmaps(&out, &runs, args.samples)?,
            PlotKind::Roc => roc(&out, &runs)?,
            PlotKind::Embedding => embeddings(&out, &runs, &file, args.per_group, args.dataset.as_deref())?,
        };
        for p in written {
            println!("wrote {}", p.display());
            m.add_artifact(p.strip_prefix(&out).unwrap_or(&p).to_path_buf());
        }
        Ok(())
    })
}

fn heatmaps(out: &Path, runs: &[Run], samples: usize) -> Result<Vec<PathBuf>> {
    let first = &runs[0];
    for r in &runs[1..] {
        if r.batch.queries != first.batch.queries {
            return Err(UsageError(format!(
                "{} and {} explain different queries",
                first.dir.display(),
                r.dir.display()
            ))
            .into());
        }
    }
    let mut written = Vec::new();
    for i in 0..samples.min(first.batch.len()) {
        let mut panels = Vec::new();
        if let Some(sal) = first.queries.saliency() {
            panels.push(HeatmapPanel {
                title: "saliency".into(),
                values: sal.index_axis(Axis(0), i).mapv(|b| if b { 1.0 } else { 0.0 }),
            });
        }
        for r in runs {
            let full = r.batch.full_residuals();
            panels.push(HeatmapPanel {
                title: format!("{} seed {}", r.label, r.report.seed),
                values: full.slice(s![i, .., ..]).mapv(|v| f64::from(v).abs()),
            });
        }
        let stem = out.join(format!("heatmap-sample{i}"));
        written.extend(heatmap_figure(&panels)?.save(&stem)?);
        let csv = stem.with_extension("csv");
        write_heatmap_csv(&csv, &panels)?;
        written.push(csv);
    }
    Ok(written)
}

fn roc(out: &Path, runs: &[Run]) -> Result<Vec<PathBuf>> {
    let mut groups: BTreeMap<(Approach, String), Vec<_>> = BTreeMap::new();
    for r in runs {
        let Some(sal) = r.queries.saliency() else {
            return Err(UsageError(format!("{} has no saliency masks; a ROC curve needs them", r.dir.display())).into());
        };
        let curve = saliency_roc(r.batch.full_residuals().view(), sal.view())
            .with_context(|| format!("ROC of {}", r.dir.display()))?;
        groups
            .entry((r.report.approach, r.label.clone()))
            .or_default()
            .push(curve);
    }
    let mut series = Vec::new();
    for ((_, label), curves) in groups {
        series.push((label, mean_roc(&curves, ROC_GRID)?));
    }
    let stem = out.join("roc");
    let mut written: Vec<PathBuf> = roc_figure(&series).save(&stem)?.into();
    let csv = stem.with_extension("csv");
    write_mean_roc_csv(&csv, &series)?;
    written.push(csv);
    Ok(written)
}

fn embeddings(
    out: &Path,
    runs: &[Run],
    file: &FileConfig,
    per_group: usize,
    dataset: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for r in runs {
        let record = DataRecord::load(&r.dir)?;
        let path = dataset.map(Path::to_path_buf).unwrap_or_else(|| record.dataset.clone());
        let (prepared, hash) = prepared_from(&path, &record.data)?;
        if hash != record.dataset_hash {
            return Err(UsageError(format!(
                "dataset {} has hash {hash}, {} was run on {}",
                path.display(),
                r.dir.display(),
                record.dataset_hash
            ))
            .into());
        }
        let (_, targets) = partition_by_target(&prepared.test, r.report.target_class)?;
        let (samples, groups) = sparce::experiment::realism_samples(&r.batch, &targets, per_group);
        let points = embed_2d(samples.view(), &file.tsne).with_context(|| format!("embedding {}", r.dir.display()))?;
        let name = r.dir.file_name().map_or("run".into(), |n| n.to_string_lossy().into_owned());
        let stem = out.join(format!("embedding-{name}"));
        written.extend(embedding_figure(points.view(), &groups)?.save(&stem)?);
        let csv = stem.with_extension("csv");
        write_embedding_csv(&csv, points.view(), &groups)?;
        written.push(csv);
    }
    Ok(written)
}
