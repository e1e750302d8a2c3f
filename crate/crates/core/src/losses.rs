//! Generator and discriminator objectives.
//!
//! Each loss is a batch mean. The `*_grad` companions return the gradient of
//! the same batch-mean value with respect to their tensor argument; residual
//! tensors are batch-major `N×T×F`.

use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Clamp applied to every probability that enters a logarithm.
pub const PROB_EPS: f64 = 1e-7;

/// Default slope of the `tanh(β|δ|)` relaxation of the L0 count.
pub const DEFAULT_SPARSITY_BETA: f64 = 10.0;

fn clamp_prob<A: Scalar>(p: A) -> (A, bool) {
    let lo = A::lit(PROB_EPS);
    let hi = A::one() - lo;
    if p < lo {
        (lo, true)
    } else if p > hi {
        (hi, true)
    } else {
        (p, false)
    }
}

/// Mean of `-log(D(x_cf))`.
pub fn adversarial_loss<A: Scalar>(d_fake: &[A]) -> A {
    neg_log_mean(d_fake)
}

pub fn adversarial_grad<A: Scalar>(d_fake: &[A]) -> Vec<A> {
    neg_log_grad(d_fake)
}

fn neg_log_mean<A: Scalar>(p: &[A]) -> A {
    if p.is_empty() {
        return A::zero();
    }
    let total: A = p.iter().map(|&v| -clamp_prob(v).0.ln()).sum();
    total / A::lit(p.len() as f64)
}

fn neg_log_grad<A: Scalar>(p: &[A]) -> Vec<A> {
    let n = A::lit(p.len() as f64);
    p.iter()
        .map(|&v| match clamp_prob(v) {
            (_, true) => A::zero(),
            (c, false) => -A::one() / (c * n),
        })
        .collect()
}

/// Mean of `-log(1 - p)`.
fn neg_log_complement_mean<A: Scalar>(p: &[A]) -> A {
    if p.is_empty() {
        return A::zero();
    }
    let total: A = p.iter().map(|&v| -(A::one() - clamp_prob(v).0).ln()).sum();
    total / A::lit(p.len() as f64)
}

fn neg_log_complement_grad<A: Scalar>(p: &[A]) -> Vec<A> {
    let n = A::lit(p.len() as f64);
    p.iter()
        .map(|&v| match clamp_prob(v) {
            (_, true) => A::zero(),
            (c, false) => A::one() / ((A::one() - c) * n),
        })
        .collect()
}

/// Mean of `-log p[target]` over rows of `class_probs`.
pub fn classification_loss<A: Scalar>(class_probs: ArrayView2<A>, target_class: usize) -> A {
    neg_log_mean(&class_probs.column(target_class).to_vec())
}

pub fn classification_grad<A: Scalar>(class_probs: ArrayView2<A>, target_class: usize) -> Array2<A> {
    let g = neg_log_grad(&class_probs.column(target_class).to_vec());
    let mut out = Array2::zeros(class_probs.raw_dim());
    out.column_mut(target_class).assign(&ndarray::Array1::from(g));
    out
}

fn batch_mean<A: Scalar>(total: A, n: usize) -> A {
    if n == 0 {
        A::zero()
    } else {
        total / A::lit(n as f64)
    }
}

/// Mean over samples of `Σ|x_q - x_cf|`.
pub fn similarity_loss<A: Scalar>(query: ArrayView3<A>, counterfactual: ArrayView3<A>) -> A {
    let total: A = query
        .iter()
        .zip(counterfactual.iter())
        .map(|(&q, &c)| (q - c).abs())
        .sum();
    batch_mean(total, query.dim().0)
}

/// Gradient of [`similarity_loss`] w.r.t. the residual `x_cf - x_q`.
pub fn similarity_grad<A: Scalar>(residuals: ArrayView3<A>) -> Array3<A> {
    let n = A::lit(residuals.dim().0 as f64);
    residuals.mapv(|d| d.sign0() / n)
}

/// Mean over samples of `Σ tanh(β|x_q - x_cf|)`, a smooth stand-in for the count of modified cells.
pub fn sparsity_loss<A: Scalar>(query: ArrayView3<A>, counterfactual: ArrayView3<A>, beta: A) -> A {
    let total: A = query
        .iter()
        .zip(counterfactual.iter())
        .map(|(&q, &c)| (beta * (q - c).abs()).tanh())
        .sum();
    batch_mean(total, query.dim().0)
}

pub fn sparsity_grad<A: Scalar>(residuals: ArrayView3<A>, beta: A) -> Array3<A> {
    let n = A::lit(residuals.dim().0 as f64);
    residuals.mapv(|d| {
        let t = (beta * d.abs()).tanh();
        beta * (A::one() - t * t) * d.sign0() / n
    })
}

/// Mean over samples of `Σ_t ‖δ[t+1] - δ[t]‖₂`, the norm taken across features.
pub fn jerk_loss<A: Scalar>(residuals: ArrayView3<A>) -> Result<A> {
    let (n, t, _) = residuals.dim();
    if t < 2 {
        return Err(Error::Shape(format!("jerk needs at least 2 time steps, got {t}")));
    }
    let diff = &residuals.slice(s![.., 1.., ..]) - &residuals.slice(s![.., ..-1, ..]);
    let total: A = diff
        .lanes(Axis(2))
        .into_iter()
        .map(|lane| lane.iter().map(|&v| v * v).sum::<A>().sqrt())
        .sum();
    Ok(batch_mean(total, n))
}

pub fn jerk_grad<A: Scalar>(residuals: ArrayView3<A>) -> Result<Array3<A>> {
    let (n, t, f) = residuals.dim();
    if t < 2 {
        return Err(Error::Shape(format!("jerk needs at least 2 time steps, got {t}")));
    }
    let inv_n = A::one() / A::lit(n as f64);
    let mut g = Array3::zeros((n, t, f));
    for i in 0..n {
        for step in 0..t - 1 {
            let a = residuals.slice(s![i, step, ..]);
            let b = residuals.slice(s![i, step + 1, ..]);
            let norm = a
                .iter()
                .zip(b.iter())
                .map(|(&x, &y)| (y - x) * (y - x))
                .sum::<A>()
                .sqrt();
            // the norm is not differentiable at zero; use the zero subgradient
            if norm <= A::zero() {
                continue;
            }
            for k in 0..f {
                let u = (b[k] - a[k]) / norm * inv_n;
                g[[i, step + 1, k]] += u;
                g[[i, step, k]] -= u;
            }
        }
    }
    Ok(g)
}

/// Half the mean real-sample log loss plus half the mean fake-sample log loss.
pub fn discriminator_loss<A: Scalar>(d_real: &[A], d_fake: &[A]) -> A {
    A::lit(0.5) * (neg_log_mean(d_real) + neg_log_complement_mean(d_fake))
}

/// Gradients of [`discriminator_loss`] w.r.t. `d_real` and `d_fake`.
pub fn discriminator_grad<A: Scalar>(d_real: &[A], d_fake: &[A]) -> (Vec<A>, Vec<A>) {
    let half = A::lit(0.5);
    (
        neg_log_grad(d_real).into_iter().map(|g| g * half).collect(),
        neg_log_complement_grad(d_fake)
            .into_iter()
            .map(|g| g * half)
            .collect(),
    )
}

/// Weights of the five generator loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    #[serde(alias = "lambda1")]
    pub adversarial: f64,
    #[serde(alias = "lambda2")]
    pub classification: f64,
    #[serde(alias = "lambda3")]
    pub similarity: f64,
    #[serde(alias = "lambda4")]
    pub sparsity: f64,
    #[serde(alias = "lambda5")]
    pub jerk: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::all()
    }
}

impl LossWeights {
    pub fn new(weights: [f64; 5]) -> Result<Self> {
        let w = Self {
            adversarial: weights[0],
            classification: weights[1],
            similarity: weights[2],
            sparsity: weights[3],
            jerk: weights[4],
        };
        w.validate()?;
        Ok(w)
    }

    /// All five terms active.
    pub fn all() -> Self {
        Self {
            adversarial: 1.0,
            classification: 1.0,
            similarity: 1.0,
            sparsity: 1.0,
            jerk: 1.0,
        }
    }

    /// Adversarial, classification and similarity only.
    pub fn without_regularizers() -> Self {
        Self {
            sparsity: 0.0,
            jerk: 0.0,
            ..Self::all()
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.adversarial,
            self.classification,
            self.similarity,
            self.sparsity,
            self.jerk,
        ]
    }

    /// Short label listing the active terms, e.g. `λ1,2,3,5`.
    pub fn label(&self) -> String {
        let active: Vec<String> = self
            .as_array()
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, _)| (i + 1).to_string())
            .collect();
        format!("λ{}", active.join(","))
    }

    pub fn validate(&self) -> Result<()> {
        const NAMES: [&str; 5] = ["lambda1", "lambda2", "lambda3", "lambda4", "lambda5"];
        for (name, w) in NAMES.iter().zip(self.as_array()) {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config {
                    field: name.to_string(),
                    reason: format!("weight must be finite and non-negative, got {w}"),
                });
            }
        }
        Ok(())
    }
}

/// Unweighted generator loss terms, each already batch-averaged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub adv: f64,
    pub cls: f64,
    pub sim: f64,
    pub sparse: f64,
    pub jerk: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub adv: f64,
    pub cls: f64,
    pub sim: f64,
    pub sparse: f64,
    pub jerk: f64,
    pub total: f64,
}

/// Weighted sum of the five terms.
pub fn generator_loss(components: LossComponents, weights: &LossWeights) -> Result<LossBreakdown> {
    let named = [
        ("adversarial", components.adv),
        ("classification", components.cls),
        ("similarity", components.sim),
        ("sparsity", components.sparse),
        ("jerk", components.jerk),
    ];
    for (name, v) in named {
        if !v.is_finite() {
            return Err(Error::NonFiniteComponent(name));
        }
    }
    let w = weights.as_array();
    let total = w[0] * components.adv
        + w[1] * components.cls
        + w[2] * components.sim
        + w[3] * components.sparse
        + w[4] * components.jerk;
    Ok(LossBreakdown {
        adv: components.adv,
        cls: components.cls,
        sim: components.sim,
        sparse: components.sparse,
        jerk: components.jerk,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = PROB_EPS;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn adversarial_examples() {
        assert!(adversarial_loss(&[1.0 - EPS]) < 1e-6);
        assert!(close(adversarial_loss(&[0.5]), 0.6931, 1e-4));
        assert!(close(adversarial_loss(&[0.5, 1.0 - EPS]), 0.3466, 1e-4));
    }

    #[test]
    fn classification_examples() {
        let p = arr2(&[[0.0, 1.0]]);
        assert!(classification_loss(p.view(), 1) < 1e-6);
        let uniform = arr2(&[[0.5, 0.5], [0.5, 0.5]]);
        assert!(close(classification_loss(uniform.view(), 0), 0.6931, 1e-4));
        assert!(close(classification_loss(uniform.view(), 1), 0.6931, 1e-4));
        let four = arr2(&[[0.25, 0.25, 0.25, 0.25]]);
        assert!(close(classification_loss(four.view(), 2), 1.3863, 1e-4));
    }

    #[test]
    fn similarity_examples() {
        let q = Array3::<f64>::zeros((1, 2, 2));
        assert_eq!(similarity_loss(q.view(), q.view()), 0.0);
        let cf = Array3::from_shape_vec((1, 2, 2), vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        assert!(close(similarity_loss(q.view(), cf.view()), 2.0, 1e-12));
        let cf2 = &cf * 2.0;
        assert!(close(similarity_loss(q.view(), cf2.view()), 4.0, 1e-12));
    }

    #[test]
    fn sparsity_examples() {
        let q = Array3::<f64>::zeros((1, 3, 3));
        assert_eq!(sparsity_loss(q.view(), q.view(), 10.0), 0.0);
        let mut cf = q.clone();
        cf[[0, 1, 2]] = 10.0;
        assert!(close(sparsity_loss(q.view(), cf.view(), 10.0), 1.0, 1e-4));
    }

    #[test]
    fn jerk_examples() {
        let constant = Array3::from_elem((2, 5, 3), 0.7f64);
        assert_eq!(jerk_loss(constant.view()).unwrap(), 0.0);
        let d = Array3::from_shape_vec((1, 3, 1), vec![0.0, 1.0, 1.0]).unwrap();
        assert!(close(jerk_loss(d.view()).unwrap(), 1.0, 1e-12));
        let d = Array3::from_shape_vec((1, 2, 2), vec![0.0, 0.0, 3.0, 4.0]).unwrap();
        assert!(close(jerk_loss(d.view()).unwrap(), 5.0, 1e-12));
        assert!(jerk_loss(Array3::<f64>::zeros((1, 1, 2)).view()).is_err());
    }

    #[test]
    fn generator_loss_examples() {
        let c = LossComponents { adv: 1.0, cls: 2.0, sim: 3.0, sparse: 4.0, jerk: 5.0 };
        assert_eq!(generator_loss(c, &LossWeights::new([0.0; 5]).unwrap()).unwrap().total, 0.0);
        assert!(close(generator_loss(c, &LossWeights::all()).unwrap().total, 15.0, 1e-12));
        let ablation = LossWeights::without_regularizers();
        assert_eq!(ablation.as_array(), [1.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(ablation.label(), "λ1,2,3");
        assert!(close(generator_loss(c, &ablation).unwrap().total, 6.0, 1e-12));
        let bad = LossComponents { jerk: f64::NAN, ..c };
        let err = generator_loss(bad, &LossWeights::all()).unwrap_err();
        assert!(err.to_string().contains("jerk"));
        assert!(LossWeights::new([1.0, -1.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn discriminator_examples() {
        assert!(discriminator_loss(&[1.0 - EPS], &[EPS]) < 1e-6);
        assert!(close(discriminator_loss(&[0.5], &[0.5]), 0.6931, 1e-4));
        let worst = discriminator_loss(&[EPS], &[1.0 - EPS]);
        assert!(close(worst, -(1e-7f64).ln(), 1e-3), "{worst}");
        assert!(worst > 16.0 && worst < 16.2);
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    fn random3(rng: &mut ChaCha8Rng) -> Array3<f64> {
        // bounded away from the L1 kink at zero
        Array3::from_shape_fn((2, 4, 3), |_| {
            let v: f64 = rng.random_range(0.05..1.0);
            if rng.random::<bool>() { v } else { -v }
        })
    }

    fn fd_check(f: &dyn Fn(&Array3<f64>) -> f64, g: &Array3<f64>, x: &Array3<f64>) {
        let h = 1e-4;
        for (idx, &an) in g.indexed_iter() {
            let mut xp = x.clone();
            xp[idx] += h;
            let mut xm = x.clone();
            xm[idx] -= h;
            let num = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!(rel(num, an) <= 1e-3, "{idx:?}: numeric {num} analytic {an}");
        }
    }

    #[test]
    fn residual_losses_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..5 {
            let d = random3(&mut rng);
            let zero = Array3::zeros(d.raw_dim());
            fd_check(&|x| similarity_loss(zero.view(), x.view()), &similarity_grad(d.view()), &d);
            fd_check(&|x| sparsity_loss(zero.view(), x.view(), 3.0), &sparsity_grad(d.view(), 3.0), &d);
            fd_check(&|x| jerk_loss(x.view()).unwrap(), &jerk_grad(d.view()).unwrap(), &d);
        }
    }

    #[test]
    fn probability_losses_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = 1e-6;
        for _ in 0..5 {
            let p: Vec<f64> = (0..6).map(|_| rng.random_range(0.05..0.95)).collect();
            let q: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..0.95)).collect();
            let ga = adversarial_grad(&p);
            let (gr, gf) = discriminator_grad(&p, &q);
            for k in 0..p.len() {
                let mut pp = p.clone();
                pp[k] += h;
                let mut pm = p.clone();
                pm[k] -= h;
                let num = (adversarial_loss(&pp) - adversarial_loss(&pm)) / (2.0 * h);
                assert!(rel(num, ga[k]) < 1e-3);
                let num = (discriminator_loss(&pp, &q) - discriminator_loss(&pm, &q)) / (2.0 * h);
                assert!(rel(num, gr[k]) < 1e-3);
            }
            for k in 0..q.len() {
                let mut qp = q.clone();
                qp[k] += h;
                let mut qm = q.clone();
                qm[k] -= h;
                let num = (discriminator_loss(&p, &qp) - discriminator_loss(&p, &qm)) / (2.0 * h);
                assert!(rel(num, gf[k]) < 1e-3);
            }
            let probs = Array2::from_shape_fn((3, 4), |_| rng.random_range(0.05..0.95));
            let g = classification_grad(probs.view(), 2);
            for (idx, &an) in g.indexed_iter() {
                let mut pp = probs.clone();
                pp[idx] += h;
                let mut pm = probs.clone();
                pm[idx] -= h;
                let num = (classification_loss(pp.view(), 2) - classification_loss(pm.view(), 2)) / (2.0 * h);
                assert!((num - an).abs() < 1e-6 || rel(num, an) < 1e-3);
            }
        }
    }

    proptest! {
        #[test]
        fn losses_are_finite_and_nonnegative(
            p in proptest::collection::vec(0.0f64..=1.0, 1..8),
            q in proptest::collection::vec(0.0f64..=1.0, 1..8),
        ) {
            let a = adversarial_loss(&p);
            let d = discriminator_loss(&p, &q);
            prop_assert!(a.is_finite() && a >= 0.0);
            prop_assert!(d.is_finite() && d >= 0.0);
        }

        #[test]
        fn residual_losses_are_homogeneous(seed in any::<u64>(), c in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = random3(&mut rng);
            let zero = Array3::zeros(d.raw_dim());
            let scaled = &d * c;
            prop_assert!(rel(similarity_loss(zero.view(), scaled.view()), c * similarity_loss(zero.view(), d.view())) < 1e-12);
            prop_assert!(rel(jerk_loss(scaled.view()).unwrap(), c * jerk_loss(d.view()).unwrap()) < 1e-12);
        }

        #[test]
        fn sparsity_surrogate_is_monotone_and_bounded(
            seed in any::<u64>(), cell in 0usize..24, bump in 0.0f64..3.0, beta in 0.1f64..50.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = random3(&mut rng);
            let zero = Array3::zeros(d.raw_dim());
            let mut bigger = d.clone();
            let idx = (cell / 12, (cell / 3) % 4, cell % 3);
            bigger[idx] += bump * bigger[idx].signum();
            let a = sparsity_loss(zero.view(), d.view(), beta);
            let b = sparsity_loss(zero.view(), bigger.view(), beta);
            prop_assert!(b >= a);
            let l0 = d.iter().filter(|&&v| v != 0.0).count() as f64 / 2.0;
            prop_assert!(a <= l0 + 1e-12);
        }
    }
}
