//! Run manifests, cross-run aggregation and figures.

mod figure;
mod plots;

pub use figure::{Anchor, Color, Figure, Shape};
pub use plots::{
    embedding_figure, heatmap_figure, roc_figure, write_embedding_csv, write_heatmap_csv, write_mean_roc_csv,
    HeatmapPanel, EMBEDDING_GROUPS, PALETTE,
};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::metrics::MetricsReport;
use crate::nets::Approach;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Succeeded,
    Failed,
}

/// Run record written next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: serde_json::Value,
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    #[serde(default)]
    pub dataset_hash: Option<String>,
    pub seeds: Vec<u64>,
    /// Relative to the directory holding the manifest.
    pub artifacts: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(run_id: impl Into<String>, command: impl Into<String>, config: serde_json::Value) -> Self {
        Self {
            run_id: run_id.into(),
            command: command.into(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            status: RunStatus::Running,
            error: None,
            config,
            dataset_path: None,
            dataset_hash: None,
            seeds: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn with_dataset(mut self, path: impl Into<PathBuf>, hash: impl Into<String>) -> Self {
        self.dataset_path = Some(path.into());
        self.dataset_hash = Some(hash.into());
        self
    }

    pub fn add_artifact(&mut self, path: impl Into<PathBuf>) {
        self.artifacts.push(path.into());
    }

    pub fn succeed(&mut self) {
        self.status = RunStatus::Succeeded;
        self.error = None;
    }

    pub fn fail(&mut self, error: impl std::fmt::Display) {
        self.status = RunStatus::Failed;
        self.error = Some(error.to_string());
    }

    /// Listed artifacts that are absent under `dir`.
    pub fn missing_artifacts(&self, dir: impl AsRef<Path>) -> Vec<PathBuf> {
        self.artifacts
            .iter()
            .map(|p| dir.as_ref().join(p))
            .filter(|p| !p.exists())
            .collect()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).at(dir)?;
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        std::fs::write(&path, text).at(&path)?;
        Ok(path)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).at(&path)?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = crate::metrics::mean_std(values);
        Self { mean, std }
    }
}

pub const METRIC_NAMES: [&str; 5] = ["precision", "similarity", "sparsity", "smoothness", "saliency_auc"];

/// Mean ± standard deviation of every metric for one approach.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub approach: Approach,
    pub n_runs: usize,
    pub seeds: Vec<u64>,
    /// In the order of [`METRIC_NAMES`]; the AUC is absent if any run lacks it.
    pub metrics: [Option<MeanStd>; 5],
}

/// Summary of several runs on the same data and target class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub target_class: usize,
    pub rows: Vec<AggregateRow>,
}

/// Groups reports by approach in the canonical order ICS, GAN, CounteRGAN, SPARCE.
pub fn aggregate(reports: &[MetricsReport]) -> Result<Aggregate> {
    let Some(first) = reports.first() else {
        return Err(Error::Degenerate("no runs to aggregate".into()));
    };
    let mut mismatches = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        if r.target_class != first.target_class {
            mismatches.push(format!(
                "run {i}: target_class {} vs {}",
                r.target_class, first.target_class
            ));
        }
        if (r.n_timesteps, r.n_features, r.n_mutable) != (first.n_timesteps, first.n_features, first.n_mutable) {
            mismatches.push(format!(
                "run {i}: shape T={} F={} F_mutable={} vs T={} F={} F_mutable={}",
                r.n_timesteps, r.n_features, r.n_mutable, first.n_timesteps, first.n_features, first.n_mutable
            ));
        }
        if r.n_samples != first.n_samples {
            mismatches.push(format!("run {i}: {} samples vs {}", r.n_samples, first.n_samples));
        }
    }
    if !mismatches.is_empty() {
        return Err(Error::InvalidDataset(format!(
            "runs are not comparable: {}",
            mismatches.join("; ")
        )));
    }
    let mut rows = Vec::new();
    for approach in Approach::ALL {
        let runs: Vec<&MetricsReport> = reports.iter().filter(|r| r.approach == approach).collect();
        if runs.is_empty() {
            continue;
        }
        let column = |k: usize| -> Vec<f64> { runs.iter().map(|r| r.values()[k]).collect() };
        let aucs: Option<Vec<f64>> = runs.iter().map(|r| r.saliency_auc).collect();
        rows.push(AggregateRow {
            approach,
            n_runs: runs.len(),
            seeds: runs.iter().map(|r| r.seed).collect(),
            metrics: [
                Some(MeanStd::of(&column(0))),
                Some(MeanStd::of(&column(1))),
                Some(MeanStd::of(&column(2))),
                Some(MeanStd::of(&column(3))),
                aucs.map(|a| MeanStd::of(&a)),
            ],
        });
    }
    Ok(Aggregate {
        target_class: first.target_class,
        rows,
    })
}

impl Aggregate {
    /// Index of the best row per metric: lowest mean, except the highest for AUC.
    pub fn best(&self) -> [Option<usize>; 5] {
        let mut out = [None; 5];
        for (k, slot) in out.iter_mut().enumerate() {
            let higher_is_better = k == 4;
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let Some(ms) = row.metrics[k] else { continue };
                let better = match best {
                    None => true,
                    Some((_, b)) if higher_is_better => ms.mean > b,
                    Some((_, b)) => ms.mean < b,
                };
                if better {
                    best = Some((i, ms.mean));
                }
            }
            *slot = best.map(|b| b.0);
        }
        out
    }

    /// One line per approach: `approach,n_runs,<metric>_mean,<metric>_std,...`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("approach,n_runs");
        for name in METRIC_NAMES {
            let _ = write!(s, ",{name}_mean,{name}_std");
        }
        s.push('\n');
        for row in &self.rows {
            let _ = write!(s, "{},{}", row.approach.as_str(), row.n_runs);
            for m in &row.metrics {
                match m {
                    Some(ms) => {
                        let _ = write!(s, ",{},{}", ms.mean, ms.std);
                    }
                    None => s.push_str(",,"),
                }
            }
            s.push('\n');
        }
        s
    }

    /// Aligned text table, metrics as rows and approaches as columns; `*` marks the best value.
    pub fn to_table(&self) -> String {
        let best = self.best();
        let header: Vec<String> = std::iter::once(format!("target class {}", self.target_class))
            .chain(self.rows.iter().map(|r| r.approach.display_name().to_string()))
            .collect();
        let mut lines = vec![header];
        for (k, name) in METRIC_NAMES.iter().enumerate() {
            let mut line = vec![name.to_string()];
            for (i, row) in self.rows.iter().enumerate() {
                line.push(match row.metrics[k] {
                    Some(ms) => format!(
                        "{:.2} ± {:.2}{}",
                        ms.mean,
                        ms.std,
                        if best[k] == Some(i) { " *" } else { "" }
                    ),
                    None => "n/a".into(),
                });
            }
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for line in &lines {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, &w))| {
                    let pad = w - cell.chars().count();
                    if c == 0 {
                        format!("{cell}{}", " ".repeat(pad))
                    } else {
                        format!("{}{cell}", " ".repeat(pad))
                    }
                })
                .collect();
            s.push_str(cells.join("  ").trim_end());
            s.push('\n');
        }
        s
    }
}
