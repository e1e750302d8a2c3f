use ndarray::{Array, Dimension};
use rand::Rng;

use crate::scalar::Scalar;

/// Inverted dropout: kept units are scaled by `1/(1-p)` so evaluation needs no rescaling.
///
/// Returns the mask that was applied, or `None` when nothing was dropped.
pub fn dropout_inplace<A: Scalar, D: Dimension, R: Rng + ?Sized>(
    x: &mut Array<A, D>,
    p: f64,
    rng: Option<&mut R>,
) -> Option<Array<A, D>> {
    let rng = rng?;
    if p <= 0.0 {
        return None;
    }
    let keep = A::lit(1.0 / (1.0 - p));
    let mask = x.mapv(|_| if rng.random::<f64>() < p { A::zero() } else { keep });
    *x *= &mask;
    Some(mask)
}
