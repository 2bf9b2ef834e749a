//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// Everything that touches coefficients, symbols or transforms is generic over
/// this trait. Exact paths (resonance decisions, certified bounds, continued
/// fractions) use big rationals and never go through `Real`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`. Never fails for finite input.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).unwrap_or_else(Self::nan)
    }

    /// Lossy conversion from an integer.
    #[inline]
    fn of_i64(x: i64) -> Self {
        <Self as FromPrimitive>::from_i64(x).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(<f64 as Real>::of(0.25), 0.25);
        assert_eq!(<f32 as Real>::of_i64(-3), -3.0f32);
        assert_eq!(Real::to_f64_lossy(1.5f32), 1.5);
    }
}
