//! Positive reals `m · 2^e` with a double mantissa and a 64-bit binary
//! exponent: enough range for `log q` when `q` itself has more bits than a
//! double can count.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

/// Nonnegative `mantissa · 2^exp`, mantissa in `[1, 2)` or exactly zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtFloat {
    mantissa: f64,
    exp: i64,
}

impl ExtFloat {
    pub const ZERO: ExtFloat = ExtFloat { mantissa: 0.0, exp: 0 };

    fn normalised(mantissa: f64, exp: i64) -> Self {
        if mantissa == 0.0 {
            return Self::ZERO;
        }
        assert!(mantissa.is_finite() && mantissa > 0.0, "ExtFloat holds finite nonnegative values");
        let e = mantissa.log2().floor() as i64;
        let mut m = mantissa / 2f64.powi(e as i32);
        let mut exp = exp + e;
        // settle rounding at the binade edges
        if m >= 2.0 {
            m /= 2.0;
            exp += 1;
        } else if m < 1.0 {
            m *= 2.0;
            exp -= 1;
        }
        Self { mantissa: m, exp }
    }

    pub fn from_f64(x: f64) -> Self {
        Self::normalised(x, 0)
    }

    /// `|n|`, keeping its top 64 bits.
    pub fn from_bigint(n: &BigInt) -> Self {
        if n.is_zero() {
            return Self::ZERO;
        }
        let a = n.abs();
        let bits = a.bits() as i64;
        let shift = (bits - 64).max(0);
        let top = (&a >> shift as usize).to_u64().expect("64 bits");
        Self::normalised(top as f64, shift)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    /// `log2` of the value (finite for nonzero values).
    pub fn log2(&self) -> f64 {
        self.mantissa.log2() + self.exp as f64
    }

    pub fn ln(&self) -> f64 {
        self.log2() * std::f64::consts::LN_2
    }

    /// The value as a double, saturating to `+∞`.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if self.exp > 1023 {
            return f64::INFINITY;
        }
        if self.exp < -1074 {
            return 0.0;
        }
        self.mantissa * 2f64.powi(self.exp as i32)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        Self::normalised(self.mantissa * other.mantissa, self.exp + other.exp)
    }

    pub fn div(&self, other: &Self) -> Self {
        assert!(!other.is_zero(), "division by zero");
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::normalised(self.mantissa / other.mantissa, self.exp - other.exp)
    }

    pub fn add(&self, other: &Self) -> Self {
        let (big, small) = if self.exp >= other.exp { (self, other) } else { (other, self) };
        if small.is_zero() {
            return *big;
        }
        let gap = big.exp - small.exp;
        if gap > 1100 {
            return *big;
        }
        Self::normalised(big.mantissa + small.mantissa / 2f64.powi(gap as i32), big.exp)
    }

    /// `x^p` for real `p ≥ 0`.
    pub fn powf(&self, p: f64) -> Self {
        if self.is_zero() {
            return if p == 0.0 { Self::from_f64(1.0) } else { Self::ZERO };
        }
        let l = self.log2() * p;
        let e = l.floor();
        Self::normalised((l - e).exp2(), e as i64)
    }

    /// Decimal scientific rendering, valid far beyond the double range.
    pub fn to_scientific(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let l10 = self.log2() * std::f64::consts::LOG10_2;
        let e = l10.floor();
        let m = 10f64.powf(l10 - e);
        format!("{m:.12}e{}", e as i64)
    }
}

impl PartialOrd for ExtFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(match (self.is_zero(), other.is_zero()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => self.exp.cmp(&other.exp).then(self.mantissa.total_cmp(&other.mantissa)),
        })
    }
}

impl fmt::Display for ExtFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.to_f64();
        if x.is_finite() && (x == 0.0 || x.abs() >= 1e-300) {
            write!(f, "{x:e}")
        } else {
            f.write_str(&self.to_scientific())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_doubles() {
        for x in [1.0, 0.75, 3.5, 1e300, 1e-300, 123456.789] {
            assert_eq!(ExtFloat::from_f64(x).to_f64(), x);
        }
    }

    #[test]
    fn big_integers_keep_their_log() {
        let n = BigInt::from(1u8) << 5000usize;
        let x = ExtFloat::from_bigint(&n);
        assert_eq!(x.exponent(), 5000);
        assert!((x.log2() - 5000.0).abs() < 1e-12);
        assert_eq!(x.to_f64(), f64::INFINITY);
        let y = ExtFloat::from_bigint(&BigInt::from(1001));
        assert!((y.ln() - 1001f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn arithmetic() {
        let a = ExtFloat::from_f64(3.0);
        let b = ExtFloat::from_f64(5.0);
        assert_eq!(a.mul(&b).to_f64(), 15.0);
        assert_eq!(a.add(&b).to_f64(), 8.0);
        assert!((b.div(&a).to_f64() - 5.0 / 3.0).abs() < 1e-15);
        assert!((ExtFloat::from_f64(16.0).powf(0.5).to_f64() - 4.0).abs() < 1e-14);
        assert!(a < b);
        let huge = ExtFloat::from_bigint(&(BigInt::from(1u8) << 4000usize));
        assert_eq!(huge.add(&a), huge);
        assert!(huge.to_scientific().ends_with("e1204"));
    }
}
