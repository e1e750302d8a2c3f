//! Sparse counterfactual explanations for multivariate time series classifiers.
//!
//! A generator network proposes residuals `δ` for a query sequence; the
//! counterfactual is `x_cf = x_q + δ` on mutable features. Residuals pass
//! through a subtractive dual-ReLU layer, `relu(pos) - relu(neg)`, which can
//! emit exact zeros, so untouched cells are untouched bit-for-bit. Training is
//! adversarial against a recurrent discriminator that sees real target-class
//! samples, with a frozen pretrained classifier supplying the class signal.
//!
//! The numerical code is generic over [`Scalar`] (`f32` / `f64`); the aliases
//! below fix the training precision.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod metrics;
pub mod movingbox;
pub mod nets;
pub mod optim;
pub mod report;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use nets::Approach;
pub use scalar::Scalar;

pub type Real = f32;
pub type Dataset = dataset::TimeSeriesDataset<Real>;
pub type ClassifierNet = nets::Classifier<Real>;
pub type GeneratorNet = nets::Generator<Real>;
pub type DiscriminatorNet = nets::Discriminator<Real>;

pub type Batch = training::CounterfactualBatch<Real>;
