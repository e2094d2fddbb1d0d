//! Real scalar abstraction shared by every numeric kernel in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// floating point: f32 or f64
///
/// The transforms, filters and the least-norm solver are written against this
/// trait. The codec pipeline itself is pinned to `f64` so that encoder and
/// decoder derive identical critical sets.
pub trait Scalar:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + rustfft::FftNum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        // from_f64 never fails for f32/f64.
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Round half away from zero, the single rounding rule used by the codec.
#[inline]
pub fn round_half_away<T: Scalar>(v: T) -> T {
    // `Float::round` already rounds half-way cases away from zero.
    v.round()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_half_away(2.5f64), 3.0);
        assert_eq!(round_half_away(-2.5f64), -3.0);
        assert_eq!(round_half_away(0.5f32), 1.0);
        assert_eq!(round_half_away(-0.49f64), 0.0);
    }
}
