//! Floating point abstraction shared by every numerical routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};
use rand_distr::uniform::SampleUniform;

/// Real scalar type the networks, losses and metrics are generic over: `f32` or `f64`.
///
/// `f32` is the storage and training precision; `f64` is used where finite
/// difference checks need the extra headroom.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumCast
    + LinalgScalar
    + ScalarOperand
    + SampleUniform
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Name used in serialized metadata.
    const DTYPE: &'static str;

    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn as_f32(self) -> f32 {
        self.to_f32().unwrap_or(f32::NAN)
    }

    fn relu(self) -> Self {
        if self > Self::zero() {
            self
        } else {
            Self::zero()
        }
    }

    fn sigmoid(self) -> Self {
        if self >= Self::zero() {
            Self::one() / (Self::one() + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::one() + e)
        }
    }

    /// `tanh` through a single `exp`, with a Taylor branch near zero where the
    /// `exp` form loses relative precision.
    fn fast_tanh(self) -> Self {
        let a = self.abs();
        if a < Self::lit(0.1) {
            let x2 = self * self;
            // odd Maclaurin series through x¹¹
            let c = [-1.0 / 3.0, 2.0 / 15.0, -17.0 / 315.0, 62.0 / 2835.0, -1382.0 / 155925.0];
            let poly = c.iter().rev().fold(Self::zero(), |acc, &k| (acc + Self::lit(k)) * x2);
            self * (Self::one() + poly)
        } else {
            let t = Self::one() - Self::lit(2.0) / ((a + a).exp() + Self::one());
            if self < Self::zero() {
                -t
            } else {
                t
            }
        }
    }

    /// Sign with `sign(0) == 0`, the subgradient used by the L1 terms.
    fn sign0(self) -> Self {
        if self > Self::zero() {
            Self::one()
        } else if self < Self::zero() {
            -Self::one()
        } else {
            Self::zero()
        }
    }
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";

    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";

    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
}
