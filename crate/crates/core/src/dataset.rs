//! Dataset container, on-disk directory format, splitting and normalization.
//!
//! A dataset directory holds:
//!
//! - `meta.json`: shape, class count, mutable mask, normalization record
//! - `data.f32`: row-major `N×T×F` little-endian IEEE-754 single precision
//! - `labels.i32`: little-endian signed 32-bit labels
//! - `saliency.u8`: optional row-major `N×T×F` 0/1 bytes
//! - `feature_names.json`: optional list of feature names

use std::fs;
use std::path::Path;

use ndarray::{Array3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, Error, IoContext, Result};
use crate::scalar::Scalar;

pub const DTYPE_TAG: &str = "f32le";

/// Normalization applied to a dataset, with per-feature parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    None,
    Minmax {
        min: Vec<f64>,
        max: Vec<f64>,
    },
    Zscore {
        mean: Vec<f64>,
        std: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationKind {
    None,
    Minmax,
    #[default]
    Zscore,
}

impl std::str::FromStr for NormalizationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "minmax" => Ok(Self::Minmax),
            "zscore" => Ok(Self::Zscore),
            other => Err(config_err(
                "normalization",
                format!("expected none|minmax|zscore, got `{other}`"),
            )),
        }
    }
}

impl Normalization {
    pub fn kind(&self) -> NormalizationKind {
        match self {
            Normalization::None => NormalizationKind::None,
            Normalization::Minmax { .. } => NormalizationKind::Minmax,
            Normalization::Zscore { .. } => NormalizationKind::Zscore,
        }
    }

    fn param_len(&self) -> Option<usize> {
        match self {
            Normalization::None => None,
            Normalization::Minmax { min, max } => Some(min.len().min(max.len())),
            Normalization::Zscore { mean, std } => Some(mean.len().min(std.len())),
        }
    }
}

/// Contents of `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n_samples: usize,
    pub n_timesteps: usize,
    pub n_features: usize,
    pub class_count: usize,
    pub dtype_tag: String,
    pub mutable_mask: Vec<bool>,
    pub has_saliency: bool,
    pub normalization: Normalization,
}

/// `N×T×F` labelled sequences with a mutable-feature mask and optional ground-truth saliency.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset<A> {
    data: Array3<A>,
    labels: Vec<usize>,
    class_count: usize,
    mutable_mask: Vec<bool>,
    saliency: Option<Array3<bool>>,
    feature_names: Option<Vec<String>>,
    normalization: Normalization,
}

impl<A: Scalar> TimeSeriesDataset<A> {
    pub fn new(
        data: Array3<A>,
        labels: Vec<usize>,
        class_count: usize,
        mutable_mask: Vec<bool>,
        saliency: Option<Array3<bool>>,
    ) -> Result<Self> {
        let ds = Self {
            data,
            labels,
            class_count,
            mutable_mask,
            saliency,
            feature_names: None,
            normalization: Normalization::None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::Shape(format!(
                "{} feature names for {} features",
                names.len(),
                self.n_features()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    /// Replaces the mutable mask, e.g. to mark some features immutable.
    pub fn with_mutable_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        self.mutable_mask = mask;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let (n, _, f) = self.data.dim();
        if self.class_count < 2 {
            return Err(Error::InvalidDataset(format!(
                "class_count must be at least 2, got {}",
                self.class_count
            )));
        }
        if self.labels.len() != n {
            return Err(Error::Shape(format!(
                "{} labels for {} samples",
                self.labels.len(),
                n
            )));
        }
        if let Some((index, &label)) = self
            .labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l >= self.class_count)
        {
            return Err(Error::LabelRange {
                index,
                label: label as i64,
                class_count: self.class_count,
            });
        }
        if self.mutable_mask.len() != f {
            return Err(Error::Shape(format!(
                "mutable mask has {} entries for {} features",
                self.mutable_mask.len(),
                f
            )));
        }
        if !self.mutable_mask.iter().any(|&m| m) {
            return Err(Error::InvalidDataset(
                "mutable mask must mark at least one feature mutable".into(),
            ));
        }
        if let Some(s) = &self.saliency {
            if s.dim() != self.data.dim() {
                return Err(Error::Shape(format!(
                    "saliency shape {:?} differs from data shape {:?}",
                    s.dim(),
                    self.data.dim()
                )));
            }
        }
        if let Some(pos) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at flat index {pos}"
            )));
        }
        if let Some(len) = self.normalization.param_len() {
            if len != f {
                return Err(Error::Shape(format!(
                    "normalization has {len} parameters for {f} features"
                )));
            }
        }
        Ok(())
    }

    pub fn data(&self) -> &Array3<A> {
        &self.data
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn mutable_mask(&self) -> &[bool] {
        &self.mutable_mask
    }

    pub fn saliency(&self) -> Option<&Array3<bool>> {
        self.saliency.as_ref()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn n_samples(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_timesteps(&self) -> usize {
        self.data.dim().1
    }

    pub fn n_features(&self) -> usize {
        self.data.dim().2
    }

    pub fn mutable_indices(&self) -> Vec<usize> {
        mutable_indices(&self.mutable_mask)
    }

    pub fn n_mutable(&self) -> usize {
        self.mutable_mask.iter().filter(|&&m| m).count()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            n_samples: self.n_samples(),
            n_timesteps: self.n_timesteps(),
            n_features: self.n_features(),
            class_count: self.class_count,
            dtype_tag: DTYPE_TAG.to_string(),
            mutable_mask: self.mutable_mask.clone(),
            has_saliency: self.saliency.is_some(),
            normalization: self.normalization.clone(),
        }
    }

    /// Samples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            data: self.data.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            mutable_mask: self.mutable_mask.clone(),
            saliency: self.saliency.as_ref().map(|s| s.select(Axis(0), indices)),
            feature_names: self.feature_names.clone(),
            normalization: self.normalization.clone(),
        }
    }

    /// Converts the scalar type (through `f64`).
    pub fn cast<B: Scalar>(&self) -> TimeSeriesDataset<B> {
        TimeSeriesDataset {
            data: self.data.mapv(|v| B::lit(v.as_f64())),
            labels: self.labels.clone(),
            class_count: self.class_count,
            mutable_mask: self.mutable_mask.clone(),
            saliency: self.saliency.clone(),
            feature_names: self.feature_names.clone(),
            normalization: self.normalization.clone(),
        }
    }

    fn data_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 4);
        for v in self.data.iter() {
            out.extend_from_slice(&v.as_f32().to_le_bytes());
        }
        out
    }

    fn label_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.labels.len() * 4);
        for &l in &self.labels {
            out.extend_from_slice(&(l as i32).to_le_bytes());
        }
        out
    }

    fn saliency_bytes(&self) -> Option<Vec<u8>> {
        self.saliency
            .as_ref()
            .map(|s| s.iter().map(|&b| u8::from(b)).collect())
    }

    /// SHA-256 over the binary payloads as they are written to disk.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.data_bytes());
        h.update(self.label_bytes());
        if let Some(s) = self.saliency_bytes() {
            h.update(s);
        }
        hex::encode(h.finalize())
    }
}

pub fn mutable_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect()
}

/// Writes the dataset directory, creating it if needed.
pub fn save_dataset<A: Scalar>(dataset: &TimeSeriesDataset<A>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).at(dir)?;

    let meta_path = dir.join("meta.json");
    let meta = serde_json::to_string_pretty(&dataset.meta()).map_err(|source| Error::Json {
        path: meta_path.clone(),
        source,
    })?;
    fs::write(&meta_path, meta).at(&meta_path)?;

    let data_path = dir.join("data.f32");
    fs::write(&data_path, dataset.data_bytes()).at(&data_path)?;

    let labels_path = dir.join("labels.i32");
    fs::write(&labels_path, dataset.label_bytes()).at(&labels_path)?;

    let sal_path = dir.join("saliency.u8");
    match dataset.saliency_bytes() {
        Some(bytes) => fs::write(&sal_path, bytes).at(&sal_path)?,
        None if sal_path.exists() => fs::remove_file(&sal_path).at(&sal_path)?,
        None => {}
    }

    let names_path = dir.join("feature_names.json");
    if let Some(names) = &dataset.feature_names {
        let json = serde_json::to_string(names).map_err(|source| Error::Json {
            path: names_path.clone(),
            source,
        })?;
        fs::write(&names_path, json).at(&names_path)?;
    }
    Ok(())
}

pub fn load_meta(dir: impl AsRef<Path>) -> Result<DatasetMeta> {
    let path = dir.as_ref().join("meta.json");
    let text = fs::read_to_string(&path).at(&path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
}

pub fn load_dataset<A: Scalar>(dir: impl AsRef<Path>) -> Result<TimeSeriesDataset<A>> {
    let dir = dir.as_ref();
    let meta = load_meta(dir)?;
    if meta.dtype_tag != DTYPE_TAG {
        return Err(Error::InvalidDataset(format!(
            "unsupported dtype_tag `{}`",
            meta.dtype_tag
        )));
    }
    let cells = meta.n_samples * meta.n_timesteps * meta.n_features;

    let data_path = dir.join("data.f32");
    let raw = fs::read(&data_path).at(&data_path)?;
    if raw.len() != cells * 4 {
        return Err(Error::Shape(format!(
            "{} declares {}×{}×{} values ({} bytes) but holds {} bytes",
            data_path.display(),
            meta.n_samples,
            meta.n_timesteps,
            meta.n_features,
            cells * 4,
            raw.len()
        )));
    }
    let values: Vec<A> = raw
        .chunks_exact(4)
        .map(|c| A::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    let data = Array3::from_shape_vec((meta.n_samples, meta.n_timesteps, meta.n_features), values)
        .map_err(|e| Error::Shape(e.to_string()))?;

    let labels_path = dir.join("labels.i32");
    let raw = fs::read(&labels_path).at(&labels_path)?;
    if raw.len() != meta.n_samples * 4 {
        return Err(Error::Shape(format!(
            "{} holds {} bytes, expected {}",
            labels_path.display(),
            raw.len(),
            meta.n_samples * 4
        )));
    }
    let mut labels = Vec::with_capacity(meta.n_samples);
    for (index, c) in raw.chunks_exact(4).enumerate() {
        let label = i32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        if label < 0 || label as usize >= meta.class_count {
            return Err(Error::LabelRange {
                index,
                label: label as i64,
                class_count: meta.class_count,
            });
        }
        labels.push(label as usize);
    }

    let saliency = if meta.has_saliency {
        let sal_path = dir.join("saliency.u8");
        if !sal_path.exists() {
            return Err(Error::InvalidDataset(format!(
                "meta declares saliency but {} is missing",
                sal_path.display()
            )));
        }
        let raw = fs::read(&sal_path).at(&sal_path)?;
        if raw.len() != cells {
            return Err(Error::Shape(format!(
                "{} holds {} bytes, expected {}",
                sal_path.display(),
                raw.len(),
                cells
            )));
        }
        if let Some(pos) = raw.iter().position(|&b| b > 1) {
            return Err(Error::InvalidDataset(format!(
                "saliency byte {} at offset {pos} is not 0/1",
                raw[pos]
            )));
        }
        let bits = raw.into_iter().map(|b| b == 1).collect();
        Some(
            Array3::from_shape_vec((meta.n_samples, meta.n_timesteps, meta.n_features), bits)
                .map_err(|e| Error::Shape(e.to_string()))?,
        )
    } else {
        None
    };

    let mut ds = TimeSeriesDataset::new(data, labels, meta.class_count, meta.mutable_mask, saliency)?;
    ds.normalization = meta.normalization;
    ds.validate()?;

    let names_path = dir.join("feature_names.json");
    if names_path.exists() {
        let text = fs::read_to_string(&names_path).at(&names_path)?;
        let names: Vec<String> = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: names_path.clone(),
            source,
        })?;
        ds = ds.with_feature_names(names)?;
    }
    Ok(ds)
}

/// Seeded random train/test partition; the test side holds `round(N·test_fraction)` samples.
pub fn split<A: Scalar>(
    dataset: &TimeSeriesDataset<A>,
    test_fraction: f64,
    seed: u64,
) -> Result<(TimeSeriesDataset<A>, TimeSeriesDataset<A>)> {
    let n = dataset.n_samples();
    if n < 2 {
        return Err(Error::InvalidDataset(format!(
            "cannot split {n} samples"
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(config_err("test_fraction", "must lie in (0, 1)"));
    }
    let n_test = ((n as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(config_err(
            "test_fraction",
            format!("{test_fraction} of {n} samples leaves one side empty"),
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test, train) = idx.split_at_mut(n_test);
    test.sort_unstable();
    train.sort_unstable();
    Ok((dataset.subset(train), dataset.subset(test)))
}

/// Splits into (queries, targets): targets carry `target_class`, queries everything else.
pub fn partition_by_target<A: Scalar>(
    dataset: &TimeSeriesDataset<A>,
    target_class: usize,
) -> Result<(TimeSeriesDataset<A>, TimeSeriesDataset<A>)> {
    if target_class >= dataset.class_count() {
        return Err(config_err(
            "target_class",
            format!(
                "{target_class} is outside [0, {})",
                dataset.class_count()
            ),
        ));
    }
    let (targets, queries): (Vec<usize>, Vec<usize>) =
        (0..dataset.n_samples()).partition(|&i| dataset.labels[i] == target_class);
    if targets.is_empty() {
        return Err(Error::EmptyPartition {
            target_class,
            side: "targets",
        });
    }
    if queries.is_empty() {
        return Err(Error::EmptyPartition {
            target_class,
            side: "queries",
        });
    }
    Ok((dataset.subset(&queries), dataset.subset(&targets)))
}

fn feature_label<A: Scalar>(ds: &TimeSeriesDataset<A>, f: usize) -> String {
    match ds.feature_names() {
        Some(names) => format!("{f} ({})", names[f]),
        None => f.to_string(),
    }
}

/// Fits per-feature parameters on `train`, pooling samples and time steps.
pub fn fit_normalizer<A: Scalar>(
    train: &TimeSeriesDataset<A>,
    kind: NormalizationKind,
) -> Result<Normalization> {
    let nf = train.n_features();
    let per_feature = |f: usize| train.data.index_axis(Axis(2), f).mapv(|v| v.as_f64());
    match kind {
        NormalizationKind::None => Ok(Normalization::None),
        NormalizationKind::Minmax => {
            let mut min = Vec::with_capacity(nf);
            let mut max = Vec::with_capacity(nf);
            for f in 0..nf {
                let col = per_feature(f);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi <= lo {
                    return Err(Error::ConstantFeature {
                        feature: feature_label(train, f),
                    });
                }
                min.push(lo);
                max.push(hi);
            }
            Ok(Normalization::Minmax { min, max })
        }
        NormalizationKind::Zscore => {
            let mut mean = Vec::with_capacity(nf);
            let mut std = Vec::with_capacity(nf);
            for f in 0..nf {
                let col = per_feature(f);
                let m = col.mean().unwrap_or(0.0);
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64;
                let s = var.sqrt();
                mean.push(m);
                // constant features are centred but left unscaled
                std.push(if s > 0.0 { s } else { 1.0 });
            }
            Ok(Normalization::Zscore { mean, std })
        }
    }
}

pub fn apply_normalizer<A: Scalar>(
    dataset: &TimeSeriesDataset<A>,
    norm: &Normalization,
) -> Result<TimeSeriesDataset<A>> {
    let nf = dataset.n_features();
    if let Some(len) = norm.param_len() {
        if len != nf {
            return Err(Error::Shape(format!(
                "normalization has {len} parameters for {nf} features"
            )));
        }
    }
    let mut out = dataset.clone();
    match norm {
        Normalization::None => {}
        Normalization::Minmax { min, max } => {
            for mut lane in out.data.lanes_mut(Axis(2)) {
                for (f, v) in lane.iter_mut().enumerate() {
                    *v = A::lit((v.as_f64() - min[f]) / (max[f] - min[f]));
                }
            }
        }
        Normalization::Zscore { mean, std } => {
            for mut lane in out.data.lanes_mut(Axis(2)) {
                for (f, v) in lane.iter_mut().enumerate() {
                    *v = A::lit((v.as_f64() - mean[f]) / std[f]);
                }
            }
        }
    }
    out.normalization = norm.clone();
    Ok(out)
}
