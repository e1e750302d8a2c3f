use ndarray::{s, Array1, Array2, Array3, ArrayView3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{validate_adam, CounterfactualBatch, RegularizerScale};
use crate::dataset::mutable_indices;
use crate::error::{config_err, Error, Result};
use crate::nets::{argmax_rows, select_mutable, to_batch_major, to_time_major, Classifier};
use crate::optim::{Adam, AdamConfig};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcsConfig {
    pub n_steps: usize,
    pub lambda_init: f64,
    /// Number of evenly spaced checkpoints at which `λ` may grow.
    pub max_lambda_steps: usize,
    pub lambda_growth: f64,
    pub optimizer: AdamConfig,
    pub seed: u64,
    /// Queries optimised together; each keeps its own `λ`.
    pub chunk_size: usize,
    /// Normalisation of the L1 term.
    pub similarity_scale: RegularizerScale,
}

impl Default for IcsConfig {
    fn default() -> Self {
        Self {
            n_steps: 100,
            lambda_init: 1.0,
            max_lambda_steps: 10,
            lambda_growth: 2.0,
            optimizer: AdamConfig::new(0.4, 0.9, 0.999),
            seed: 0,
            chunk_size: 128,
            similarity_scale: RegularizerScale::Sum,
        }
    }
}

impl IcsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_lambda_steps == 0 {
            return Err(config_err("max_lambda_steps", "must be at least 1"));
        }
        if self.n_steps % self.max_lambda_steps != 0 {
            return Err(config_err(
                "n_steps",
                format!(
                    "{} is not divisible by max_lambda_steps = {}",
                    self.n_steps, self.max_lambda_steps
                ),
            ));
        }
        if !(self.lambda_init > 0.0 && self.lambda_init.is_finite()) {
            return Err(config_err("lambda_init", "must be positive"));
        }
        if !(self.lambda_growth >= 1.0 && self.lambda_growth.is_finite()) {
            return Err(config_err("lambda_growth", "must be at least 1"));
        }
        if self.chunk_size == 0 {
            return Err(config_err("chunk_size", "must be at least 1"));
        }
        validate_adam(&self.optimizer)
    }
}

/// Per-query gradient search for a counterfactual of `target_class`.
///
/// Minimises `λ·‖C(x) - onehot(target)‖² + s·Σ|x - x_q|` with Adam, starting from
/// a uniform draw between each query's minimum and maximum. Every
/// `n_steps / max_lambda_steps` steps, `λ` is multiplied by `lambda_growth` for
/// queries that are not yet classified as the target. The L1 weight `s` is
/// `1 / (T·F_mutable)` under [`RegularizerScale::PerCell`] and 1 otherwise.
pub fn ics_search<A: Scalar>(
    classifier: &Classifier<A>,
    queries: ArrayView3<A>,
    mutable_mask: &[bool],
    target_class: usize,
    config: &IcsConfig,
) -> Result<CounterfactualBatch<A>> {
    config.validate()?;
    let (n, t_len, f) = queries.dim();
    if mutable_mask.len() != f || classifier.spec().n_features != f {
        return Err(Error::Shape(format!(
            "queries have {f} features, mask {} and classifier {}",
            mutable_mask.len(),
            classifier.spec().n_features
        )));
    }
    let n_classes = classifier.spec().n_classes;
    if target_class >= n_classes {
        return Err(config_err("target_class", format!("{target_class} is outside [0, {n_classes})")));
    }
    let mut frozen = classifier.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut found = Array3::<A>::zeros((n, t_len, f));
    let segment = (config.n_steps / config.max_lambda_steps).max(1);
    let growth = A::lit(config.lambda_growth);
    let immutable: Vec<usize> = (0..f).filter(|&c| !mutable_mask[c]).collect();
    let sim_weight = match config.similarity_scale {
        RegularizerScale::PerCell => A::lit(1.0 / (t_len * (f - immutable.len()).max(1)) as f64),
        RegularizerScale::Sum => A::one(),
    };

    for start in (0..n).step_by(config.chunk_size) {
        let end = (start + config.chunk_size).min(n);
        let xq = queries.slice(s![start..end, .., ..]);
        let b = end - start;
        let mut x = Array3::<A>::zeros((b, t_len, f));
        for i in 0..b {
            let sample = xq.index_axis(Axis(0), i);
            let lo = sample.iter().copied().fold(A::infinity(), A::min);
            let hi = sample.iter().copied().fold(A::neg_infinity(), A::max);
            x.index_axis_mut(Axis(0), i)
                .mapv_inplace(|_| if hi > lo { rng.random_range(lo..hi) } else { lo });
        }
        let clamp = |x: &mut Array3<A>| {
            for &c in &immutable {
                x.index_axis_mut(Axis(2), c).assign(&xq.index_axis(Axis(2), c));
            }
        };
        clamp(&mut x);
        let mut lambda = Array1::from_elem(b, A::lit(config.lambda_init));
        let mut adam = Adam::new(config.optimizer);
        let mut grad = vec![A::zero(); x.len()];

        for step in 0..config.n_steps {
            let xt = to_time_major(x.view());
            let pass = frozen.forward_tm::<ChaCha8Rng>(xt.view(), None);
            let probs = frozen.probabilities(&pass.logits);
            if probs.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite {
                    component: "ics classification".into(),
                    epoch: 0,
                    step,
                });
            }
            let d_probs = Array2::from_shape_fn((b, n_classes), |(i, k)| {
                let y = if k == target_class { A::one() } else { A::zero() };
                A::lit(2.0) * lambda[i] * (probs[[i, k]] - y)
            });
            let dz = frozen.probs_to_logit_grad(&probs, &d_probs);
            let mut g = to_batch_major(frozen.backward_logits(&pass, &dz, false).view());
            g.zip_mut_with(&(&x - &xq), |g, &d| *g += sim_weight * d.sign0());
            for &c in &immutable {
                g.index_axis_mut(Axis(2), c).fill(A::zero());
            }
            grad.copy_from_slice(g.as_slice().expect("standard layout"));
            adam.step_slices([(x.as_slice_mut().expect("standard layout"), grad.as_slice())]);
            clamp(&mut x);

            if (step + 1) % segment == 0 {
                let pred = argmax_rows(&frozen.predict_proba(x.view()));
                for (i, &p) in pred.iter().enumerate() {
                    if p != target_class {
                        lambda[i] *= growth;
                    }
                }
            }
        }
        found.slice_mut(s![start..end, .., ..]).assign(&x);
    }

    let residuals = select_mutable(found.view(), mutable_mask) - select_mutable(queries, mutable_mask);
    debug_assert_eq!(mutable_indices(mutable_mask).len(), residuals.dim().2);
    CounterfactualBatch::from_residuals(classifier, queries.to_owned(), residuals, mutable_mask, target_class)
}
