//! Classifier pretraining, adversarial counterfactual training and iterative search.

mod classifier;
mod gan;
mod ics;

pub use classifier::{accuracy, pretrain_classifier, ClassifierEpoch, ClassifierTrainConfig, PretrainOutcome};
pub use gan::{train_counterfactual_gan, write_log, GanOutcome, LogRecord};
pub use ics::{ics_search, IcsConfig};


use ndarray::{Array2, Array3, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::losses::{LossWeights, DEFAULT_SPARSITY_BETA};
use crate::nets::{apply_residuals, select_mutable, Approach, Classifier, Generator, HeadVariant};
use crate::optim::AdamConfig;
use crate::scalar::Scalar;

/// Recurrent backbone sizes of the generator and discriminator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanArchitecture {
    pub generator_hidden: usize,
    pub generator_layers: usize,
    pub generator_dropout: f64,
    pub discriminator_hidden: usize,
    pub discriminator_dropout: f64,
}

impl Default for GanArchitecture {
    fn default() -> Self {
        Self {
            generator_hidden: 256,
            generator_layers: 2,
            generator_dropout: 0.4,
            discriminator_hidden: 16,
            discriminator_dropout: 0.4,
        }
    }
}

/// How the similarity, sparsity and jerk sums enter the generator objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerScale {
    /// Divided by the number of mutable cells `T·F_mutable`.
    #[default]
    PerCell,
    /// Raw per-sample sums.
    Sum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub approach: Approach,
    pub target_class: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
    /// Used as given for `sparce`; `gan` and `countergan` always train with `λ1,2,3`.
    pub loss_weights: LossWeights,
    pub sparsity_beta: f64,
    pub regularizer_scale: RegularizerScale,
    pub architecture: GanArchitecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            approach: Approach::Sparce,
            target_class: 1,
            epochs: 100,
            batch_size: 32,
            optimizer: AdamConfig::new(2e-4, 0.5, 0.999),
            seed: 0,
            loss_weights: LossWeights::all(),
            sparsity_beta: DEFAULT_SPARSITY_BETA,
            regularizer_scale: RegularizerScale::PerCell,
            architecture: GanArchitecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(config_err("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(config_err("batch_size", "must be at least 1"));
        }
        validate_adam(&self.optimizer)?;
        self.loss_weights.validate()?;
        if !(self.sparsity_beta > 0.0 && self.sparsity_beta.is_finite()) {
            return Err(config_err("sparsity_beta", "must be positive"));
        }
        if self.approach == Approach::Ics {
            return Err(config_err("approach", "ics is a search, not a trained generator"));
        }
        let a = &self.architecture;
        if a.generator_hidden == 0 || a.generator_layers == 0 || a.discriminator_hidden == 0 {
            return Err(config_err("architecture", "layer sizes must be positive"));
        }
        for (name, p) in [
            ("generator_dropout", a.generator_dropout),
            ("discriminator_dropout", a.discriminator_dropout),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(config_err(name, "dropout must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    /// Loss weights actually used for this approach.
    pub fn effective_weights(&self) -> LossWeights {
        match self.approach {
            Approach::Sparce => self.loss_weights,
            _ => LossWeights::without_regularizers(),
        }
    }
}

pub(crate) fn validate_adam(c: &AdamConfig) -> Result<()> {
    if !(c.lr > 0.0 && c.lr.is_finite()) {
        return Err(config_err("optimizer.lr", "learning rate must be positive"));
    }
    for (name, b) in [("optimizer.beta1", c.beta1), ("optimizer.beta2", c.beta2)] {
        if !(0.0..1.0).contains(&b) {
            return Err(config_err(name, "must lie in [0, 1)"));
        }
    }
    Ok(())
}

/// Queries with their residuals, counterfactuals and the classifier's verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct CounterfactualBatch<A> {
    pub queries: Array3<A>,
    /// `N×T×F_mutable`.
    pub residuals: Array3<A>,
    pub counterfactuals: Array3<A>,
    pub target_class: usize,
    pub classifier_probs: Array2<A>,
    pub mutable_mask: Vec<bool>,
}

impl<A: Scalar> CounterfactualBatch<A> {
    /// Builds a batch from residuals; the counterfactual is recomputed as `x_q + δ`.
    pub fn from_residuals(
        classifier: &Classifier<A>,
        queries: Array3<A>,
        residuals: Array3<A>,
        mutable_mask: &[bool],
        target_class: usize,
    ) -> Result<Self> {
        let counterfactuals = apply_residuals(queries.view(), residuals.view(), mutable_mask)?;
        let classifier_probs = classifier.predict_proba(counterfactuals.view());
        Ok(Self {
            queries,
            residuals,
            counterfactuals,
            target_class,
            classifier_probs,
            mutable_mask: mutable_mask.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.queries.dim().0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `x_cf - x_q` over all features (zero on immutable ones), `N×T×F`.
    pub fn full_residuals(&self) -> Array3<A> {
        &self.counterfactuals - &self.queries
    }
}

/// Runs a trained generator over `queries` in evaluation mode.
pub fn generate_counterfactuals<A: Scalar>(
    generator: &Generator<A>,
    classifier: &Classifier<A>,
    queries: ArrayView3<A>,
    mutable_mask: &[bool],
    target_class: usize,
) -> Result<CounterfactualBatch<A>> {
    let n_mutable = mutable_mask.iter().filter(|&&m| m).count();
    let spec = generator.spec();
    if spec.output_features != n_mutable || spec.n_features != queries.dim().2 {
        return Err(crate::Error::Shape(format!(
            "generator maps {} features to {}, data has {} features with {} mutable",
            spec.n_features,
            spec.output_features,
            queries.dim().2,
            n_mutable
        )));
    }
    let out = generator.predict(queries);
    let residuals = match spec.head {
        HeadVariant::TanhFull => out - select_mutable(queries, mutable_mask),
        _ => out,
    };
    CounterfactualBatch::from_residuals(classifier, queries.to_owned(), residuals, mutable_mask, target_class)
}
