//! End-to-end runs: data preparation, explanation and evaluation.

use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    apply_normalizer, fit_normalizer, load_dataset, save_dataset, split, Normalization, NormalizationKind,
    TimeSeriesDataset,
};
use crate::error::{config_err, Error, IoContext, Result};
use crate::metrics::{evaluate_batch, MetricsReport, RocCurve, DEFAULT_ZERO_TOL};
use crate::nets::{argmax_rows, select_mutable, Approach, Classifier, Discriminator, Generator};
use crate::scalar::Scalar;
use crate::training::{
    generate_counterfactuals, ics_search, train_counterfactual_gan, CounterfactualBatch, IcsConfig, LogRecord,
    TrainConfig,
};

/// Train/test partition with a normaliser fitted on the training side.
#[derive(Clone, Debug)]
pub struct Prepared<A> {
    pub train: TimeSeriesDataset<A>,
    pub test: TimeSeriesDataset<A>,
    pub normalization: Normalization,
}

pub fn prepare<A: Scalar>(
    dataset: &TimeSeriesDataset<A>,
    test_fraction: f64,
    split_seed: u64,
    normalization: NormalizationKind,
) -> Result<Prepared<A>> {
    let (train, test) = split(dataset, test_fraction, split_seed)?;
    let norm = fit_normalizer(&train, normalization)?;
    Ok(Prepared {
        train: apply_normalizer(&train, &norm)?,
        test: apply_normalizer(&test, &norm)?,
        normalization: norm,
    })
}

/// Everything one explanation run produces.
#[derive(Clone, Debug)]
pub struct ExplainOutcome<A> {
    /// The explained test queries with their labels and saliency.
    pub queries: TimeSeriesDataset<A>,
    pub batch: CounterfactualBatch<A>,
    pub report: MetricsReport,
    pub roc: Option<RocCurve>,
    pub log: Vec<LogRecord>,
    pub generator: Option<Generator<A>>,
    pub discriminator: Option<Discriminator<A>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub train: TrainConfig,
    pub ics: IcsConfig,
    pub zero_tol: f64,
    /// Caps the number of test queries explained; all of them when absent.
    pub max_queries: Option<usize>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            ics: IcsConfig::default(),
            zero_tol: DEFAULT_ZERO_TOL,
            max_queries: None,
        }
    }
}

impl ExplainConfig {
    pub fn approach(&self) -> Approach {
        self.train.approach
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }
}

/// Test-split samples that are not yet of the target class.
pub fn test_queries<A: Scalar>(test: &TimeSeriesDataset<A>, target_class: usize) -> Result<TimeSeriesDataset<A>> {
    if target_class >= test.class_count() {
        return Err(config_err(
            "target_class",
            format!("{target_class} is outside [0, {})", test.class_count()),
        ));
    }
    let idx: Vec<usize> = (0..test.n_samples())
        .filter(|&i| test.labels()[i] != target_class)
        .collect();
    if idx.is_empty() {
        return Err(crate::Error::EmptyPartition {
            target_class,
            side: "queries",
        });
    }
    Ok(test.subset(&idx))
}

/// Trains (or searches) with `config` and evaluates on the test-split queries.
///
/// ICS uses `config.ics` with its seed taken from `config.train.seed`.
pub fn explain<A: Scalar>(
    data: &Prepared<A>,
    classifier: &Classifier<A>,
    config: &ExplainConfig,
) -> Result<ExplainOutcome<A>> {
    let target = config.train.target_class;
    let mut queries = test_queries(&data.test, target)?;
    if let Some(cap) = config.max_queries {
        if cap == 0 {
            return Err(config_err("max_queries", "must be at least 1"));
        }
        if cap < queries.n_samples() {
            queries = queries.subset(&(0..cap).collect::<Vec<_>>());
        }
    }
    let mask = data.train.mutable_mask().to_vec();
    let (batch, log, generator, discriminator) = match config.approach() {
        Approach::Ics => {
            let ics = IcsConfig {
                seed: config.seed(),
                ..config.ics.clone()
            };
            let batch = ics_search(classifier, queries.data().view(), &mask, target, &ics)?;
            (batch, Vec::new(), None, None)
        }
        _ => {
            let out = train_counterfactual_gan(&data.train, classifier, &config.train)?;
            let batch = generate_counterfactuals(&out.generator, classifier, queries.data().view(), &mask, target)?;
            (batch, out.log, Some(out.generator), Some(out.discriminator))
        }
    };
    let saliency = queries.saliency().map(|s| s.view());
    let (report, roc) = evaluate_batch(&batch, saliency, config.approach(), config.seed(), config.zero_tol)?;
    Ok(ExplainOutcome {
        queries,
        batch,
        report,
        roc,
        log,
        generator,
        discriminator,
    })
}

/// Queries, targets and counterfactuals stacked for a realism embedding, with group labels 0, 1, 2.
pub fn realism_samples<A: Scalar>(
    batch: &CounterfactualBatch<A>,
    targets: &TimeSeriesDataset<A>,
    per_group: usize,
) -> (ndarray::Array2<A>, Vec<usize>) {
    let take = |n: usize| per_group.min(n);
    let nq = take(batch.len());
    let nt = take(targets.n_samples());
    let (_, t, f) = batch.queries.dim();
    let flat = |x: ndarray::ArrayView3<A>, n: usize| {
        x.slice(ndarray::s![..n, .., ..])
            .to_owned()
            .into_shape_with_order((n, t * f))
            .expect("contiguous")
    };
    let parts = [
        flat(batch.queries.view(), nq),
        flat(targets.data().view(), nt),
        flat(batch.counterfactuals.view(), nq),
    ];
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    let stacked = ndarray::concatenate(Axis(0), &views).expect("equal widths");
    let mut groups = vec![0; nq];
    groups.extend(std::iter::repeat_n(1, nt));
    groups.extend(std::iter::repeat_n(2, nq));
    (stacked, groups)
}

#[derive(Debug, Serialize, Deserialize)]
struct BatchMeta {
    target_class: usize,
    n_samples: usize,
    n_classes: usize,
}

/// Writes a batch as two dataset directories, `queries/` (true labels) and
/// `counterfactuals/` (predicted labels), plus `probs.f32` (`N×C`) and `batch.json`.
pub fn save_batch<A: Scalar>(
    dir: impl AsRef<Path>,
    batch: &CounterfactualBatch<A>,
    queries: &TimeSeriesDataset<A>,
) -> Result<()> {
    let dir = dir.as_ref();
    if queries.data() != &batch.queries {
        return Err(Error::Shape("query dataset does not hold the batch's queries".into()));
    }
    save_dataset(queries, dir.join("queries"))?;
    let predicted = argmax_rows(&batch.classifier_probs);
    let cf = TimeSeriesDataset::new(
        batch.counterfactuals.clone(),
        predicted,
        queries.class_count(),
        batch.mutable_mask.clone(),
        queries.saliency().cloned(),
    )?;
    save_dataset(&cf, dir.join("counterfactuals"))?;
    let probs: Vec<u8> = batch
        .classifier_probs
        .iter()
        .flat_map(|p| (p.as_f64() as f32).to_le_bytes())
        .collect();
    let path = dir.join("probs.f32");
    std::fs::write(&path, probs).at(&path)?;
    let meta = BatchMeta {
        target_class: batch.target_class,
        n_samples: batch.len(),
        n_classes: batch.classifier_probs.ncols(),
    };
    let path = dir.join("batch.json");
    let text = serde_json::to_string_pretty(&meta).expect("plain struct");
    std::fs::write(&path, text).at(&path)
}

/// Inverse of [`save_batch`]; returns the batch and its query dataset.
pub fn load_batch<A: Scalar>(dir: impl AsRef<Path>) -> Result<(CounterfactualBatch<A>, TimeSeriesDataset<A>)> {
    let dir = dir.as_ref();
    let path = dir.join("batch.json");
    let text = std::fs::read_to_string(&path).at(&path)?;
    let meta: BatchMeta = serde_json::from_str(&text).map_err(|source| Error::Json { path, source })?;
    let queries: TimeSeriesDataset<A> = load_dataset(dir.join("queries"))?;
    let cf: TimeSeriesDataset<A> = load_dataset(dir.join("counterfactuals"))?;
    if queries.data().dim() != cf.data().dim() || queries.n_samples() != meta.n_samples {
        return Err(Error::Shape(format!(
            "queries {:?}, counterfactuals {:?}, batch.json declares {} samples",
            queries.data().dim(),
            cf.data().dim(),
            meta.n_samples
        )));
    }
    let path = dir.join("probs.f32");
    let raw = std::fs::read(&path).at(&path)?;
    if raw.len() != meta.n_samples * meta.n_classes * 4 {
        return Err(Error::Shape(format!("{} holds {} bytes", path.display(), raw.len())));
    }
    let values: Vec<A> = raw
        .chunks_exact(4)
        .map(|c| A::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    let classifier_probs =
        Array2::from_shape_vec((meta.n_samples, meta.n_classes), values).map_err(|e| Error::Shape(e.to_string()))?;
    let mask = cf.mutable_mask().to_vec();
    let residuals = select_mutable(cf.data().view(), &mask) - select_mutable(queries.data().view(), &mask);
    let batch = CounterfactualBatch {
        queries: queries.data().clone(),
        residuals,
        counterfactuals: cf.data().clone(),
        target_class: meta.target_class,
        classifier_probs,
        mutable_mask: mask,
    };
    Ok((batch, queries))
}
