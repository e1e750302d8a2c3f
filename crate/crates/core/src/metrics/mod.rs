//! Counterfactual quality measures.
//!
//! All scalar metrics are sample means, normalised per sample by the number of
//! cells they range over, and computed in `f64` regardless of the input type.

mod roc;
mod tsne;

pub(crate) use roc::mean_std;
pub use roc::{mean_roc, saliency_roc, write_roc_csv, MeanRoc, RocCurve};
pub use tsne::{embed_2d, TsneConfig};

use ndarray::{ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::nets::Approach;
use crate::scalar::Scalar;
use crate::training::CounterfactualBatch;

/// Residual magnitude at or below which a cell counts as unmodified.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// Mean over samples of `‖p - onehot(target)‖₂`.
pub fn precision_metric<A: Scalar>(classifier_probs: ArrayView2<A>, target_class: usize) -> f64 {
    let n = classifier_probs.nrows();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = classifier_probs
        .outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(k, &p)| {
                    let d = p.as_f64() - if k == target_class { 1.0 } else { 0.0 };
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    total / n as f64
}

/// Mean over samples of `Σ|x_q - x_cf| / (T·F)`.
pub fn similarity_metric<A: Scalar>(queries: ArrayView3<A>, counterfactuals: ArrayView3<A>) -> Result<f64> {
    same_shape(queries, counterfactuals)?;
    let (n, t, f) = queries.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = queries
        .iter()
        .zip(counterfactuals.iter())
        .map(|(&q, &c)| (q.as_f64() - c.as_f64()).abs())
        .sum();
    Ok(total / (n * t * f) as f64)
}

/// Mean over samples of the fraction of mutable cells with `|x_q - x_cf| > zero_tol`.
pub fn sparsity_metric<A: Scalar>(
    queries: ArrayView3<A>,
    counterfactuals: ArrayView3<A>,
    mutable_mask: &[bool],
    zero_tol: f64,
) -> Result<f64> {
    same_shape(queries, counterfactuals)?;
    let (n, t, f) = queries.dim();
    if mutable_mask.len() != f {
        return Err(Error::Shape(format!("mutable mask has {} entries for {f} features", mutable_mask.len())));
    }
    let n_mut = mutable_mask.iter().filter(|&&m| m).count();
    if n == 0 || n_mut == 0 {
        return Ok(0.0);
    }
    let mut changed = 0usize;
    for (q, c) in queries.lanes(Axis(2)).into_iter().zip(counterfactuals.lanes(Axis(2))) {
        for k in 0..f {
            if mutable_mask[k] && (q[k].as_f64() - c[k].as_f64()).abs() > zero_tol {
                changed += 1;
            }
        }
    }
    Ok(changed as f64 / (n * t * n_mut) as f64)
}

/// Mean over samples of `Σ_t ‖δ[t+1] - δ[t]‖₂ / (T·F)`.
pub fn smoothness_metric<A: Scalar>(residuals: ArrayView3<A>) -> Result<f64> {
    let (n, t, f) = residuals.dim();
    if t < 2 {
        return Err(Error::Shape(format!("smoothness needs at least 2 time steps, got {t}")));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for sample in residuals.outer_iter() {
        for step in 0..t - 1 {
            let a = sample.index_axis(Axis(0), step);
            let b = sample.index_axis(Axis(0), step + 1);
            total += a
                .iter()
                .zip(b.iter())
                .map(|(&x, &y)| (y.as_f64() - x.as_f64()).powi(2))
                .sum::<f64>()
                .sqrt();
        }
    }
    Ok(total / (n * t * f) as f64)
}

fn same_shape<A>(a: ArrayView3<A>, b: ArrayView3<A>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Evaluation of one run, stored as `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub approach: Approach,
    pub target_class: usize,
    pub seed: u64,
    pub precision: f64,
    pub similarity: f64,
    pub sparsity: f64,
    pub smoothness: f64,
    pub saliency_auc: Option<f64>,
    pub n_samples: usize,
    #[serde(rename = "T")]
    pub n_timesteps: usize,
    #[serde(rename = "F")]
    pub n_features: usize,
    #[serde(rename = "F_mutable")]
    pub n_mutable: usize,
}

impl MetricsReport {
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("plain report");
        std::fs::write(path, text).at(path)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).at(path)?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Metric values in a fixed order, for tables: precision, similarity, sparsity, smoothness.
    pub fn values(&self) -> [f64; 4] {
        [self.precision, self.similarity, self.sparsity, self.smoothness]
    }
}

/// Computes every metric for a batch; the ROC curve is returned when saliency masks are given.
pub fn evaluate_batch<A: Scalar>(
    batch: &CounterfactualBatch<A>,
    saliency: Option<ArrayView3<bool>>,
    approach: Approach,
    seed: u64,
    zero_tol: f64,
) -> Result<(MetricsReport, Option<RocCurve>)> {
    let (n, t, f) = batch.queries.dim();
    let q = batch.queries.view();
    let cf = batch.counterfactuals.view();
    let full = batch.full_residuals();
    let roc = match saliency {
        Some(mask) => Some(saliency_roc(full.view(), mask)?),
        None => None,
    };
    let report = MetricsReport {
        approach,
        target_class: batch.target_class,
        seed,
        precision: precision_metric(batch.classifier_probs.view(), batch.target_class),
        similarity: similarity_metric(q, cf)?,
        sparsity: sparsity_metric(q, cf, &batch.mutable_mask, zero_tol)?,
        smoothness: smoothness_metric(full.view())?,
        saliency_auc: roc.as_ref().map(|r| r.auc),
        n_samples: n,
        n_timesteps: t,
        n_features: f,
        n_mutable: batch.mutable_mask.iter().filter(|&&m| m).count(),
    };
    Ok((report, roc))
}
