//! Spectral data of the spatial operator: eigenvalue sequences, Hermite
//! eigenfunctions for the harmonic-oscillator family, and Weyl-law fits.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Pow;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalue provider for the spatial operator.
///
/// Indices are 0-based: `Harmonic1D` has `λ_j = 2j + 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum EigenProvider {
    /// `-d²/dx² + x²` on the line.
    Harmonic1D,
    /// `-Δ + |x|²` on `ℝ^n`; eigenvalues `2|α| + n` listed with multiplicity,
    /// ties ordered by ascending lexicographic multi-index.
    HarmonicND(usize),
    /// `base^exponent`: same eigenfunctions, eigenvalues raised to `exponent`.
    PowerOf(Box<EigenProvider>, u32),
    /// User-supplied eigenvalues, eigenvalue-only.
    Custom(CustomSpectrum),
}

/// A finite, validated eigenvalue table.
#[derive(Clone, Debug, PartialEq)]
pub struct CustomSpectrum {
    values: Vec<f64>,
    exact: Option<Vec<BigRational>>,
    big_m: u32,
    n: usize,
}

impl CustomSpectrum {
    /// Validates `|λ_j|` nondecreasing and all values finite.
    pub fn new(values: Vec<f64>, exact: Option<Vec<BigRational>>, big_m: u32, n: usize) -> Result<Self> {
        if n == 0 || big_m < 2 {
            return Err(Error::InvalidParams(format!(
                "custom spectrum needs n >= 1 and M >= 2 (got n={n}, M={big_m})"
            )));
        }
        if let Some(ex) = &exact {
            if ex.len() != values.len() {
                return Err(Error::Shape("exact and float eigenvalue tables differ in length".into()));
            }
        }
        for (j, w) in values.windows(2).enumerate() {
            if !w[0].is_finite() || !w[1].is_finite() {
                return Err(Error::InvalidParams(format!("non-finite eigenvalue near index {j}")));
            }
            if w[1].abs() < w[0].abs() {
                return Err(Error::InvalidParams(format!(
                    "|lambda| must be nondecreasing: |lambda_{}| = {} < |lambda_{j}| = {}",
                    j + 1,
                    w[1].abs(),
                    w[0].abs()
                )));
            }
        }
        if values.len() == 1 && !values[0].is_finite() {
            return Err(Error::InvalidParams("non-finite eigenvalue".into()));
        }
        Ok(Self { values, exact, big_m, n })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }
}

/// Least-squares fit of `log|λ_j| = log ρ + e·log j` (1-based `j`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeylFit {
    pub rho_hat: f64,
    pub exponent_hat: f64,
    /// Inclusive 0-based index interval used for the fit.
    pub sample_range: (u64, u64),
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of multi-indices `α ∈ ℕ₀^n` with `|α| ≤ k`.
fn count_up_to(n: usize, k: u64) -> u128 {
    binomial(k + n as u64, n as u64)
}

/// Shell `k` (so `λ = 2k + n`) and offset within the shell for index `j`.
fn nd_shell(n: usize, j: u64) -> (u64, u64) {
    if n == 1 {
        return (j, 0);
    }
    let target = j as u128;
    let (mut lo, mut hi) = (0u64, 1u64);
    while count_up_to(n, hi) <= target {
        hi *= 2;
    }
    // smallest k with count_up_to(k) > j
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if count_up_to(n, mid) > target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let before = if lo == 0 { 0 } else { count_up_to(n, lo - 1) };
    (lo, (target - before) as u64)
}

/// Multi-index of rank `rank` among `{α ∈ ℕ₀^n : |α| = k}` in ascending
/// lexicographic order.
pub fn unrank_multi_index(n: usize, k: u64, mut rank: u64) -> Vec<u64> {
    let mut alpha = Vec::with_capacity(n);
    let mut remaining = k;
    for pos in 0..n {
        if pos == n - 1 {
            alpha.push(remaining);
            break;
        }
        let slots = (n - pos - 2) as u64;
        let mut v = 0;
        loop {
            let completions = binomial(remaining - v + slots, slots) as u64;
            if rank < completions {
                break;
            }
            rank -= completions;
            v += 1;
        }
        alpha.push(v);
        remaining -= v;
    }
    alpha
}

impl EigenProvider {
    pub fn power_of(base: EigenProvider, exponent: u32) -> Self {
        EigenProvider::PowerOf(Box::new(base), exponent)
    }

    /// Effective order `M` of the spatial operator.
    pub fn big_m(&self) -> u32 {
        match self {
            EigenProvider::Harmonic1D | EigenProvider::HarmonicND(_) => 2,
            EigenProvider::PowerOf(base, e) => base.big_m() * e,
            EigenProvider::Custom(c) => c.big_m,
        }
    }

    /// Spatial dimension `n`.
    pub fn n(&self) -> usize {
        match self {
            EigenProvider::Harmonic1D => 1,
            EigenProvider::HarmonicND(n) => *n,
            EigenProvider::PowerOf(base, _) => base.n(),
            EigenProvider::Custom(c) => c.n,
        }
    }

    /// Number of available eigenvalues, `None` when unbounded.
    pub fn len(&self) -> Option<u64> {
        match self {
            EigenProvider::Custom(c) => Some(c.len() as u64),
            EigenProvider::PowerOf(base, _) => base.len(),
            _ => None,
        }
    }

    pub fn has_eigenfunctions(&self) -> bool {
        match self {
            EigenProvider::Harmonic1D | EigenProvider::HarmonicND(_) => true,
            EigenProvider::PowerOf(base, _) => base.has_eigenfunctions(),
            EigenProvider::Custom(_) => false,
        }
    }

    /// True when every eigenvalue is an exact rational.
    pub fn is_exact(&self) -> bool {
        match self {
            EigenProvider::Harmonic1D | EigenProvider::HarmonicND(_) => true,
            EigenProvider::PowerOf(base, _) => base.is_exact(),
            EigenProvider::Custom(c) => c.is_exact(),
        }
    }

    fn check_index(&self, j: u64) -> Result<()> {
        match self.len() {
            Some(len) if j >= len => Err(Error::OutOfRange { index: j, len }),
            _ => Ok(()),
        }
    }

    /// Exact integer eigenvalue for the harmonic family.
    fn harmonic_integer(&self, j: u64) -> Option<BigInt> {
        match self {
            EigenProvider::Harmonic1D => Some(BigInt::from(2 * j as u128 + 1)),
            EigenProvider::HarmonicND(n) => {
                let (k, _) = nd_shell(*n, j);
                Some(BigInt::from(2 * k as u128 + *n as u128))
            }
            EigenProvider::PowerOf(base, e) => base.harmonic_integer(j).map(|v| Pow::pow(v, *e)),
            EigenProvider::Custom(_) => None,
        }
    }

    /// The `j`-th eigenvalue in double precision.
    pub fn eigenvalue_f64(&self, j: u64) -> Result<f64> {
        self.check_index(j)?;
        Ok(match self {
            EigenProvider::Harmonic1D => (2 * j + 1) as f64,
            EigenProvider::HarmonicND(n) => {
                let (k, _) = nd_shell(*n, j);
                (2 * k + *n as u64) as f64
            }
            EigenProvider::PowerOf(base, e) => base.eigenvalue_f64(j)?.powi(*e as i32),
            EigenProvider::Custom(c) => c.values[j as usize],
        })
    }

    /// The `j`-th eigenvalue in the scalar type `T`.
    pub fn eigenvalue<T: Real>(&self, j: u64) -> Result<T> {
        self.eigenvalue_f64(j).map(T::of)
    }

    /// The `j`-th eigenvalue as an exact rational, when the provider is exact.
    pub fn eigenvalue_exact(&self, j: u64) -> Result<Option<BigRational>> {
        self.check_index(j)?;
        Ok(match self {
            EigenProvider::Custom(c) => c.exact.as_ref().map(|ex| ex[j as usize].clone()),
            EigenProvider::PowerOf(base, e) => base.eigenvalue_exact(j)?.map(|v| Pow::pow(v, *e)),
            _ => self.harmonic_integer(j).map(BigRational::from_integer),
        })
    }

    /// Eigenvalues for the inclusive index range `[j0, j1]`.
    pub fn eigenvalues(&self, j0: u64, j1: u64) -> Result<Vec<f64>> {
        if j1 < j0 {
            return Ok(Vec::new());
        }
        self.check_index(j1)?;
        match self {
            EigenProvider::HarmonicND(n) => {
                let (mut k, mut offset) = nd_shell(*n, j0);
                let mut shell_len = binomial(k + *n as u64 - 1, *n as u64 - 1) as u64;
                let mut out = Vec::with_capacity((j1 - j0 + 1) as usize);
                for _ in j0..=j1 {
                    out.push((2 * k + *n as u64) as f64);
                    offset += 1;
                    if offset == shell_len {
                        k += 1;
                        offset = 0;
                        shell_len = binomial(k + *n as u64 - 1, *n as u64 - 1) as u64;
                    }
                }
                Ok(out)
            }
            EigenProvider::PowerOf(base, e) => {
                Ok(base.eigenvalues(j0, j1)?.into_iter().map(|v| v.powi(*e as i32)).collect())
            }
            _ => (j0..=j1).map(|j| self.eigenvalue_f64(j)).collect(),
        }
    }

    /// Multi-index of the tensorized Hermite eigenfunction for index `j`.
    pub fn multi_index(&self, j: u64) -> Result<Vec<u64>> {
        match self {
            EigenProvider::Harmonic1D => Ok(vec![j]),
            EigenProvider::HarmonicND(n) => {
                let (k, rank) = nd_shell(*n, j);
                Ok(unrank_multi_index(*n, k, rank))
            }
            EigenProvider::PowerOf(base, _) => base.multi_index(j),
            EigenProvider::Custom(_) => Err(Error::UnsupportedBasis(
                "custom spectra carry no eigenfunctions".into(),
            )),
        }
    }

    /// `φ_j(x)` for a point `x ∈ ℝ^n`.
    pub fn eigenfunction<T: Real>(&self, j: u64, x: &[T]) -> Result<T> {
        let alpha = self.multi_index(j)?;
        if x.len() != alpha.len() {
            return Err(Error::Shape(format!("point has {} coordinates, basis needs {}", x.len(), alpha.len())));
        }
        Ok(alpha.iter().zip(x).fold(T::one(), |acc, (&a, &xi)| acc * hermite_eval(a, xi)))
    }

    /// `φ_0(x), …, φ_{count-1}(x)` at one point.
    pub fn eigenfunctions_at<T: Real>(&self, count: u64, x: &[T]) -> Result<Vec<T>> {
        if !self.has_eigenfunctions() {
            return Err(Error::UnsupportedBasis("custom spectra carry no eigenfunctions".into()));
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        let alphas: Vec<Vec<u64>> = (0..count).map(|j| self.multi_index(j)).collect::<Result<_>>()?;
        let n = self.n();
        if x.len() != n {
            return Err(Error::Shape(format!("point has {} coordinates, basis needs {n}", x.len())));
        }
        let top = alphas.iter().flat_map(|a| a.iter().copied()).max().unwrap_or(0);
        let tables: Vec<Vec<T>> = x.iter().map(|&xi| hermite_all(top + 1, xi)).collect();
        Ok(alphas
            .iter()
            .map(|a| a.iter().enumerate().fold(T::one(), |acc, (d, &k)| acc * tables[d][k as usize]))
            .collect())
    }
}

/// L²-normalized Hermite function `h_j(x)`.
pub fn hermite_eval<T: Real>(j: u64, x: T) -> T {
    let mut out = T::zero();
    hermite_walk(j + 1, x, |k, v| {
        if k == j {
            out = v;
        }
    });
    out
}

/// `h_0(x), …, h_{count-1}(x)`.
pub fn hermite_all<T: Real>(count: u64, x: T) -> Vec<T> {
    let mut out = Vec::with_capacity(count as usize);
    hermite_walk(count, x, |_, v| out.push(v));
    out
}

// Runs h_{k+1} = x·√(2/(k+1))·h_k − √(k/(k+1))·h_{k−1} on the Gaussian-free
// part, with power-of-two rescaling so neither tail underflows prematurely.
fn hermite_walk<T: Real>(count: u64, x: T, mut emit: impl FnMut(u64, T)) {
    if count == 0 {
        return;
    }
    let two = T::of(2.0);
    let big = T::of(2f64.powi(60));
    let gauss = -(x * x) / two;
    let ln2 = T::LN_2();
    let mut scale_exp: i64 = 0;
    let norm0 = T::PI().powf(T::of(-0.25));
    let value = |h: T, e: i64| -> T {
        if h == T::zero() {
            T::zero()
        } else {
            h * (gauss + T::of_i64(e) * ln2).exp()
        }
    };
    let mut prev = T::zero();
    let mut cur = norm0;
    emit(0, value(cur, scale_exp));
    for k in 0..count.saturating_sub(1) {
        let kf = T::of(k as f64);
        let next = x * (two / (kf + T::one())).sqrt() * cur - (kf / (kf + T::one())).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > big {
            cur = cur / big;
            prev = prev / big;
            scale_exp += 60;
        }
        emit(k + 1, value(cur, scale_exp));
    }
}

/// Least-squares Weyl fit over the inclusive index range `[j0, j1]`.
pub fn weyl_fit(provider: &EigenProvider, j0: u64, j1: u64) -> Result<WeylFit> {
    if j1 < j0 || j1 - j0 + 1 < 16 {
        return Err(Error::FitDomain(format!("need at least 16 indices, got [{j0}, {j1}]")));
    }
    let values = provider.eigenvalues(j0, j1)?;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (offset, &lambda) in values.iter().enumerate() {
        if lambda <= 0.0 {
            return Err(Error::FitDomain(format!(
                "eigenvalue {lambda} at index {} is not positive",
                j0 + offset as u64
            )));
        }
        let x = ((j0 + offset as u64 + 1) as f64).ln();
        let y = lambda.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let count = values.len() as f64;
    let denom = count * sxx - sx * sx;
    let slope = (count * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / count;
    Ok(WeylFit { rho_hat: intercept.exp(), exponent_hat: slope, sample_range: (j0, j1) })
}

/// `C(k + n − 1, n − 1)`: multiplicity of `2k + n` for `HarmonicND(n)`.
pub fn harmonic_multiplicity(n: usize, k: u64) -> u128 {
    binomial(k + n as u64 - 1, n as u64 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_1d_values() {
        let h = EigenProvider::Harmonic1D;
        assert_eq!(h.eigenvalue_f64(0).unwrap(), 1.0);
        assert_eq!(h.eigenvalue_f64(5).unwrap(), 11.0);
        assert_eq!(h.eigenvalue_exact(5).unwrap().unwrap(), BigRational::from_integer(11.into()));
    }

    #[test]
    fn harmonic_2d_with_multiplicity() {
        let h = EigenProvider::HarmonicND(2);
        let vals: Vec<f64> = (0..6).map(|j| h.eigenvalue_f64(j).unwrap()).collect();
        assert_eq!(vals, vec![2.0, 4.0, 4.0, 6.0, 6.0, 6.0]);
        assert_eq!(h.eigenvalues(0, 5).unwrap(), vals);
        assert_eq!(h.multi_index(1).unwrap(), vec![0, 1]);
        assert_eq!(h.multi_index(2).unwrap(), vec![1, 0]);
        assert_eq!(h.multi_index(3).unwrap(), vec![0, 2]);
        assert_eq!(h.multi_index(5).unwrap(), vec![2, 0]);
    }

    #[test]
    fn multiplicity_matches_binomial() {
        for n in 1..=4usize {
            let h = EigenProvider::HarmonicND(n);
            let vals = h.eigenvalues(0, 400).unwrap();
            for k in 0..5u64 {
                let target = (2 * k + n as u64) as f64;
                let count = vals.iter().filter(|&&v| v == target).count() as u128;
                assert_eq!(count, harmonic_multiplicity(n, k), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn multi_index_enumeration_is_lexicographic() {
        let h = EigenProvider::HarmonicND(3);
        let idx: Vec<Vec<u64>> = (0..20).map(|j| h.multi_index(j).unwrap()).collect();
        for w in idx.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let sa: u64 = a.iter().sum();
            let sb: u64 = b.iter().sum();
            assert!(sa < sb || (sa == sb && a < b), "{a:?} then {b:?}");
        }
    }

    #[test]
    fn power_of_squares() {
        let p = EigenProvider::power_of(EigenProvider::Harmonic1D, 2);
        assert_eq!(p.eigenvalue_f64(1).unwrap(), 9.0);
        assert_eq!(p.big_m(), 4);
        assert_eq!(p.eigenvalue_exact(2).unwrap().unwrap(), BigRational::from_integer(25.into()));
    }

    #[test]
    fn custom_out_of_range_and_validation() {
        let c = CustomSpectrum::new(vec![1.0, 2.0, 2.0, 5.0], None, 2, 1).unwrap();
        let p = EigenProvider::Custom(c);
        assert!(matches!(p.eigenvalue_f64(4), Err(Error::OutOfRange { .. })));
        assert_eq!(p.eigenvalue_exact(0).unwrap(), None);
        assert!(CustomSpectrum::new(vec![3.0, -1.0], None, 2, 1).is_err());
        assert!(CustomSpectrum::new(vec![1.0, f64::NAN], None, 2, 1).is_err());
    }

    #[test]
    fn hermite_values_at_origin() {
        let pi_quarter = std::f64::consts::PI.powf(-0.25);
        assert_relative_eq!(hermite_eval(0, 0.0f64), 0.7511255444, epsilon = 1e-10);
        assert_eq!(hermite_eval(1, 0.0f64), 0.0);
        assert_relative_eq!(hermite_eval(2, 0.0f64), -pi_quarter / 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(hermite_eval(2, 0.0f64), -0.5311259660, epsilon = 1e-10);
    }

    #[test]
    fn hermite_far_tail_does_not_underflow_prematurely() {
        // h_2000 has its turning point near 63; at x = 50 it is oscillatory, not tiny
        let v = hermite_eval(2000, 50.0f64);
        assert!(v.abs() > 1e-6, "{v}");
        assert!(hermite_eval(3, 60.0f64).abs() < 1e-300);
    }

    #[test]
    fn hermite_all_matches_single() {
        let all = hermite_all(30, 1.7f64);
        for (j, &v) in all.iter().enumerate() {
            assert_relative_eq!(v, hermite_eval(j as u64, 1.7), epsilon = 1e-14);
        }
    }

    #[test]
    fn weyl_fits() {
        let fit = weyl_fit(&EigenProvider::Harmonic1D, 1000, 1_000_000).unwrap();
        assert!((fit.exponent_hat - 1.0).abs() <= 0.01, "{fit:?}");
        assert!((fit.rho_hat - 2.0).abs() <= 0.02, "{fit:?}");
        let sq = weyl_fit(&EigenProvider::power_of(EigenProvider::Harmonic1D, 2), 1000, 1_000_000).unwrap();
        assert!((sq.exponent_hat - 2.0).abs() <= 0.02, "{sq:?}");
        assert!((sq.rho_hat - 4.0).abs() <= 0.1, "{sq:?}");
        let nd = weyl_fit(&EigenProvider::HarmonicND(2), 1000, 100_000).unwrap();
        assert!((nd.exponent_hat - 0.5).abs() <= 0.02, "{nd:?}");
    }

    #[test]
    fn weyl_fit_domain_errors() {
        assert!(matches!(weyl_fit(&EigenProvider::Harmonic1D, 0, 10), Err(Error::FitDomain(_))));
        let c = CustomSpectrum::new((0..40).map(|k| k as f64 - 2.0).map(|v: f64| if v < 0.0 { 0.0 } else { v }).collect(), None, 2, 1).unwrap();
        assert!(matches!(weyl_fit(&EigenProvider::Custom(c), 0, 39), Err(Error::FitDomain(_))));
    }
}
