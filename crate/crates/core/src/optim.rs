//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::nets::Param;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps: default_eps(),
        }
    }
}

/// Optimiser state for a fixed sequence of tensors.
#[derive(Clone, Debug)]
pub struct Adam<A> {
    config: AdamConfig,
    step: i32,
    m: Vec<Vec<A>>,
    v: Vec<Vec<A>>,
}

impl<A: Scalar> Adam<A> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One update of `(value, grad)` pairs; the pairing must be identical on every call.
    pub fn step_slices<'a, I>(&mut self, tensors: I)
    where
        I: IntoIterator<Item = (&'a mut [A], &'a [A])>,
    {
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (A::lit(c.beta1), A::lit(c.beta2));
        let bc1 = A::lit(1.0 - c.beta1.powi(self.step));
        let bc2 = A::lit(1.0 - c.beta2.powi(self.step));
        let (lr, eps) = (A::lit(c.lr), A::lit(c.eps));
        for (k, (value, grad)) in tensors.into_iter().enumerate() {
            if self.m.len() <= k {
                self.m.push(vec![A::zero(); value.len()]);
                self.v.push(vec![A::zero(); value.len()]);
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            assert_eq!(m.len(), value.len(), "tensor {k} changed size between steps");
            for i in 0..value.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (A::one() - b1) * g;
                v[i] = b2 * v[i] + (A::one() - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }

    pub fn step_params(&mut self, params: Vec<&mut Param<A>>) {
        self.step_slices(params.into_iter().map(|p| {
            let Param { value, grad } = p;
            (
                value.as_slice_mut().expect("contiguous parameter"),
                grad.as_slice().expect("contiguous gradient"),
            )
        }));
    }
}
