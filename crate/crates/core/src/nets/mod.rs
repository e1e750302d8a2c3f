//! Network architectures, the dual-ReLU sparsity layer and residual application.

pub mod checkpoint;
pub mod dropout;
pub mod linear;
pub mod lstm;
pub mod models;
pub mod param;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array, Array2, Array3, ArrayBase, ArrayView2, ArrayView3, Axis, Data, Dimension, Zip};
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_classifier, load_discriminator, load_generator, save_checkpoint, ModelSpec};
pub use linear::Linear;
pub use lstm::{LstmDirection, LstmLayer, SeqEncoder};
pub use models::{
    argmax_rows, to_batch_major, to_time_major, Classifier, ClassifierSpec, Discriminator, DiscriminatorSpec,
    Generator, GeneratorSpec, HeadVariant,
};
pub use param::{Param, Parameterized};

use crate::dataset::mutable_indices;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Counterfactual method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    /// Per-sample gradient search on the input with a growing classification weight.
    Ics,
    /// Generator emits complete counterfactuals through `tanh`.
    Gan,
    /// Generator emits `tanh`-bounded residuals.
    Countergan,
    /// Generator emits dual-ReLU residuals, with sparsity and jerk regularisation.
    Sparce,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::Ics, Approach::Gan, Approach::Countergan, Approach::Sparce];

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Ics => "ics",
            Approach::Gan => "gan",
            Approach::Countergan => "countergan",
            Approach::Sparce => "sparce",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Approach::Ics => "ICS",
            Approach::Gan => "GAN",
            Approach::Countergan => "CounteRGAN",
            Approach::Sparce => "SPARCE",
        }
    }

    pub fn uses_generator(self) -> bool {
        !matches!(self, Approach::Ics)
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ics" => Ok(Approach::Ics),
            "gan" => Ok(Approach::Gan),
            "countergan" => Ok(Approach::Countergan),
            "sparce" => Ok(Approach::Sparce),
            _ => Err(Error::UnknownApproach(s.to_string())),
        }
    }
}

/// `relu(pos) - relu(neg)`, elementwise. Exactly `0.0` wherever both inputs are `<= 0`.
pub fn sparsity_layer<A, S1, S2, D>(pos: &ArrayBase<S1, D>, neg: &ArrayBase<S2, D>) -> Result<Array<A, D>>
where
    A: Scalar,
    S1: Data<Elem = A>,
    S2: Data<Elem = A>,
    D: Dimension,
{
    if pos.shape() != neg.shape() {
        return Err(Error::Shape(format!(
            "sparsity layer inputs differ: {:?} vs {:?}",
            pos.shape(),
            neg.shape()
        )));
    }
    Ok(Zip::from(pos).and(neg).map_collect(|&p, &n| p.relu() - n.relu()))
}

pub(crate) fn sparsity_layer_view<A: Scalar>(pos: ArrayView2<A>, neg: ArrayView2<A>) -> Array2<A> {
    Zip::from(pos).and(neg).map_collect(|&p, &n| p.relu() - n.relu())
}

/// `x_cf = x_q + δ` on mutable features; immutable features are copied from the query.
pub fn apply_residuals<A: Scalar>(
    query: ArrayView3<A>,
    residuals: ArrayView3<A>,
    mutable_mask: &[bool],
) -> Result<Array3<A>> {
    let (n, t, f) = query.dim();
    let cols = mutable_indices(mutable_mask);
    if mutable_mask.len() != f {
        return Err(Error::Shape(format!(
            "mutable mask has {} entries for {f} features",
            mutable_mask.len()
        )));
    }
    if residuals.dim() != (n, t, cols.len()) {
        return Err(Error::Shape(format!(
            "residuals {:?} do not match {n}×{t}×{} mutable features",
            residuals.dim(),
            cols.len()
        )));
    }
    let mut cf = query.to_owned();
    for (k, &c) in cols.iter().enumerate() {
        let mut dst = cf.index_axis_mut(Axis(2), c);
        dst += &residuals.index_axis(Axis(2), k);
    }
    Ok(cf)
}

/// Mutable-feature columns of `x` (`N×T×F` → `N×T×F_mutable`).
pub fn select_mutable<A: Scalar>(x: ArrayView3<A>, mutable_mask: &[bool]) -> Array3<A> {
    x.select(Axis(2), &mutable_indices(mutable_mask))
}

/// Generator architecture for a GAN-based approach.
pub fn build_counterfactual_head(approach: Approach, n_features: usize, n_mutable: usize) -> Result<GeneratorSpec> {
    let head = match approach {
        Approach::Gan => HeadVariant::TanhFull,
        Approach::Countergan => HeadVariant::TanhResidual,
        Approach::Sparce => HeadVariant::DualReluResidual,
        Approach::Ics => {
            return Err(Error::Config {
                field: "approach".into(),
                reason: "ics has no generator".into(),
            })
        }
    };
    Ok(GeneratorSpec::new(n_features, n_mutable, head))
}
