use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use super::param::{Param, Parameterized};
use crate::scalar::Scalar;

/// Fully connected layer `y = x·W + b` with `W: in×out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<A> {
    pub weight: Param<A>,
    pub bias: Param<A>,
}

impl<A: Scalar> Linear<A> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self {
            weight: Param::uniform(inputs, outputs, bound, rng),
            bias: Param::uniform(1, outputs, bound, rng),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Param::zeros(inputs, outputs),
            bias: Param::zeros(1, outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn forward(&self, x: ArrayView2<A>) -> Array2<A> {
        let mut y = x.dot(&self.weight.value);
        y += &self.bias.value;
        y
    }

    /// Accumulates parameter gradients when `param_grads` is set and returns `dL/dx`.
    pub fn backward(&mut self, x: ArrayView2<A>, dy: ArrayView2<A>, param_grads: bool) -> Array2<A> {
        if param_grads {
            ndarray::linalg::general_mat_mul(A::one(), &x.t(), &dy, A::one(), &mut self.weight.grad);
            self.bias.grad += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        }
        dy.dot(&self.weight.value.t())
    }
}

impl<A: Scalar> Parameterized<A> for Linear<A> {
    fn params(&self) -> Vec<&Param<A>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<A>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
