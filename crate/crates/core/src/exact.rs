//! Exact rational scalars and the float/exact coefficient pair.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parses `p/q`, an integer, or a finite decimal literal (`-0.75`, `1.5e-3`)
/// into an exact rational. Decimal literals are read digit-exactly.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational literal".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let p = BigInt::from_str(num.trim())
            .map_err(|e| Error::Parse(format!("numerator of {s:?}: {e}")))?;
        let q = BigInt::from_str(den.trim())
            .map_err(|e| Error::Parse(format!("denominator of {s:?}: {e}")))?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(p, q));
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("not a rational literal: {s:?}"));
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut value = BigInt::from_str(if all.is_empty() { "0" } else { &all }).map_err(|_| bad())?;
    if negative {
        value = -value;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let r = if scale >= 0 {
        BigRational::from_integer(value * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(value, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(r)
}

/// Renders a rational as `p/q` (or `p` for integers).
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Complex number with exact rational parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ExactComplex {
    pub re: BigRational,
    pub im: BigRational,
}

impl ExactComplex {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Self { re, im }
    }

    pub fn real(re: BigRational) -> Self {
        Self { re, im: BigRational::zero() }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::real(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.re + &other.re, &self.im + &other.im)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::new(
            &self.re * &other.re - &self.im * &other.im,
            &self.re * &other.im + &self.im * &other.re,
        )
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        Self::new(&self.re * s, &self.im * s)
    }

    pub fn to_complex<T: Real>(&self) -> Complex<T> {
        Complex::new(T::of(rational_to_f64(&self.re)), T::of(rational_to_f64(&self.im)))
    }
}

impl fmt::Display for ExactComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", format_rational(&self.re))
        } else {
            write!(f, "{} + {}i", format_rational(&self.re), format_rational(&self.im))
        }
    }
}

/// A complex coefficient carried in floating point, optionally with its exact
/// rational value. Exact-zero decisions use the exact value whenever present.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficient<T> {
    pub value: Complex<T>,
    pub exact: Option<ExactComplex>,
}

impl<T: Real> Coefficient<T> {
    pub fn float(value: Complex<T>) -> Self {
        Self { value, exact: None }
    }

    pub fn real(x: T) -> Self {
        Self::float(Complex::new(x, T::zero()))
    }

    pub fn exact(value: ExactComplex) -> Self {
        Self { value: value.to_complex(), exact: Some(value) }
    }

    pub fn exact_real(r: BigRational) -> Self {
        Self::exact(ExactComplex::real(r))
    }

    pub fn from_int(k: i64) -> Self {
        Self::exact_real(BigRational::from_integer(k.into()))
    }

    pub fn zero() -> Self {
        Self::exact(ExactComplex::zero())
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// True when the coefficient is known to vanish: exactly, or in floating
    /// point when no exact value exists.
    pub fn is_zero(&self) -> bool {
        match &self.exact {
            Some(e) => e.is_zero(),
            None => self.value.re == T::zero() && self.value.im == T::zero(),
        }
    }

    pub fn scaled(&self, s: &Coefficient<T>) -> Self {
        let value = self.value * s.value;
        let exact = match (&self.exact, &s.exact) {
            (Some(a), Some(b)) => Some(a.mul(b)),
            _ => None,
        };
        Self { value, exact }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn parses_fractions_integers_and_decimals() {
        assert_eq!(parse_rational("7/10").unwrap(), r(7, 10));
        assert_eq!(parse_rational(" -3 ").unwrap(), r(-3, 1));
        assert_eq!(parse_rational("0.7").unwrap(), r(7, 10));
        assert_eq!(parse_rational("-1.25e-1").unwrap(), r(-1, 8));
        assert_eq!(parse_rational("2e3").unwrap(), r(2000, 1));
        assert_eq!(parse_rational(".5").unwrap(), r(1, 2));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
        assert!(parse_rational("1.2.3").is_err());
    }

    #[test]
    fn complex_arithmetic() {
        let a = ExactComplex::new(r(1, 2), r(1, 3));
        let b = ExactComplex::new(r(0, 1), r(1, 1));
        assert_eq!(a.mul(&b), ExactComplex::new(r(-1, 3), r(1, 2)));
        assert_eq!(a.norm_sqr(), r(13, 36));
        assert_eq!(format!("{a}"), "1/2 + 1/3i");
    }
}
