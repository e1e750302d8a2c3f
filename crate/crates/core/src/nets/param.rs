use ndarray::Array2;
use rand::Rng;
use rand_distr::Uniform;

use crate::scalar::Scalar;

/// A trainable tensor and its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<A> {
    pub value: Array2<A>,
    pub grad: Array2<A>,
}

impl<A: Scalar> Param<A> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            value: Array2::zeros((rows, cols)),
            grad: Array2::zeros((rows, cols)),
        }
    }

    /// Uniform initialisation on `[-bound, bound]`.
    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(rows, cols);
        if bound > 0.0 {
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            p.value.mapv_inplace(|_| A::lit(rng.sample(dist)));
        }
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Anything owning trainable parameters, visited in a fixed order.
pub trait Parameterized<A: Scalar> {
    fn params(&self) -> Vec<&Param<A>>;

    fn params_mut(&mut self) -> Vec<&mut Param<A>>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(A::zero());
        }
    }

    fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Flattened copy of every parameter value.
    fn flat_values(&self) -> Vec<A> {
        self.params()
            .iter()
            .flat_map(|p| p.value.iter().copied())
            .collect()
    }

    fn flat_grads(&self) -> Vec<A> {
        self.params()
            .iter()
            .flat_map(|p| p.grad.iter().copied())
            .collect()
    }

    /// Overwrites all parameter values from a flat buffer; returns `false` on length mismatch.
    fn load_flat(&mut self, values: &[A]) -> bool {
        if values.len() != self.n_params() {
            return false;
        }
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.len();
            for (dst, src) in p.value.iter_mut().zip(&values[offset..offset + n]) {
                *dst = *src;
            }
            offset += n;
        }
        true
    }
}
