use std::fmt::Write as _;
use std::path::Path;

use ndarray::ArrayView3;

use crate::error::{Error, IoContext, Result};
use crate::scalar::Scalar;

/// ROC points ordered by decreasing threshold, starting at `(0, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// The first threshold is `+∞`.
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    /// True-positive rate at `x`, linear between points; on vertical runs the highest value.
    pub fn tpr_at(&self, x: f64) -> f64 {
        let mut best = 0.0;
        for i in 0..self.fpr.len() {
            if self.fpr[i] <= x {
                best = self.tpr[i];
            } else {
                let (x0, y0) = (self.fpr[i - 1], self.tpr[i - 1]);
                let (x1, y1) = (self.fpr[i], self.tpr[i]);
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        best
    }
}

/// Ranks cells by `|residual|` against the salient-cell mask, pooled over all samples.
pub fn saliency_roc<A: Scalar>(residuals: ArrayView3<A>, saliency: ArrayView3<bool>) -> Result<RocCurve> {
    if residuals.dim() != saliency.dim() {
        return Err(Error::Shape(format!(
            "residuals {:?} vs saliency {:?}",
            residuals.dim(),
            saliency.dim()
        )));
    }
    let mut cells: Vec<(f64, bool)> = residuals
        .iter()
        .zip(saliency.iter())
        .map(|(&r, &s)| (r.as_f64().abs(), s))
        .collect();
    let n_pos = cells.iter().filter(|c| c.1).count();
    let n_neg = cells.len() - n_pos;
    if n_pos == 0 {
        return Err(Error::Saliency("no salient cells, true-positive rate undefined".into()));
    }
    if n_neg == 0 {
        return Err(Error::Saliency("every cell is salient, false-positive rate undefined".into()));
    }
    cells.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    let mut thresholds = vec![f64::INFINITY];
    let mut fpr = vec![0.0];
    let mut tpr = vec![0.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < cells.len() {
        let score = cells[i].0;
        while i < cells.len() && cells[i].0 == score {
            if cells[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let x = fp as f64 / n_neg as f64;
        let y = tp as f64 / n_pos as f64;
        auc += (x - fpr[fpr.len() - 1]) * (y + tpr[tpr.len() - 1]) / 2.0;
        thresholds.push(score);
        fpr.push(x);
        tpr.push(y);
    }
    Ok(RocCurve { thresholds, fpr, tpr, auc })
}

/// Point-wise mean and standard deviation of several ROC curves on a shared FPR grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanRoc {
    pub fpr: Vec<f64>,
    pub mean_tpr: Vec<f64>,
    pub std_tpr: Vec<f64>,
    pub mean_auc: f64,
    pub std_auc: f64,
}

pub fn mean_roc(curves: &[RocCurve], grid_points: usize) -> Result<MeanRoc> {
    if curves.is_empty() {
        return Err(Error::Saliency("no ROC curves to average".into()));
    }
    let grid_points = grid_points.max(2);
    let fpr: Vec<f64> = (0..grid_points).map(|i| i as f64 / (grid_points - 1) as f64).collect();
    let mut mean_tpr = Vec::with_capacity(grid_points);
    let mut std_tpr = Vec::with_capacity(grid_points);
    for &x in &fpr {
        let ys: Vec<f64> = curves.iter().map(|c| c.tpr_at(x)).collect();
        let (m, s) = mean_std(&ys);
        mean_tpr.push(m);
        std_tpr.push(s);
    }
    let aucs: Vec<f64> = curves.iter().map(|c| c.auc).collect();
    let (mean_auc, std_auc) = mean_std(&aucs);
    Ok(MeanRoc {
        fpr,
        mean_tpr,
        std_tpr,
        mean_auc,
        std_auc,
    })
}

/// Mean and population standard deviation.
pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// CSV with columns `threshold,fpr,tpr`.
pub fn write_roc_csv(path: impl AsRef<Path>, curve: &RocCurve) -> Result<()> {
    let mut text = String::from("threshold,fpr,tpr\n");
    for i in 0..curve.fpr.len() {
        let _ = writeln!(text, "{},{},{}", curve.thresholds[i], curve.fpr[i], curve.tpr[i]);
    }
    let path = path.as_ref();
    std::fs::write(path, text).at(path)
}
