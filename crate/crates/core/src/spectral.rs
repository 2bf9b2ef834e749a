//! Analytic frame, Fourier–Hermite mode indexing, sparse coefficient fields,
//! the Gelfand–Shilov weight, weight shells and physical-space reconstruction.

use std::collections::BTreeMap;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::eigen::EigenProvider;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// `(m, n, σ, μ, M)`: torus dimension, Euclidean dimension, Gevrey order,
/// Gelfand–Shilov index and order of the spatial operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpaceParams {
    pub m: usize,
    pub n: usize,
    pub sigma: f64,
    pub mu: f64,
    pub big_m: u32,
}

impl SpaceParams {
    pub fn new(m: usize, n: usize, sigma: f64, mu: f64, big_m: u32) -> Result<Self> {
        let p = Self { m, n, sigma, mu, big_m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.n < 1 {
            return Err(Error::InvalidParams(format!("m and n must be >= 1 (m={}, n={})", self.m, self.n)));
        }
        if !(self.sigma >= 1.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParams(format!("sigma must be >= 1, got {}", self.sigma)));
        }
        if !(self.mu >= 0.5) || !self.mu.is_finite() {
            return Err(Error::InvalidParams(format!("mu must be >= 1/2, got {}", self.mu)));
        }
        if self.big_m < 2 {
            return Err(Error::InvalidParams(format!("M must be >= 2, got {}", self.big_m)));
        }
        Ok(())
    }

    /// Exponent `1/(2nμ)` applied to `j + 1`.
    pub fn j_exponent(&self) -> f64 {
        1.0 / (2.0 * self.n as f64 * self.mu)
    }
}

/// Mode `(τ, j) ∈ ℤ^m × ℕ₀`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub tau: Vec<i64>,
    pub j: u64,
}

impl ModeIndex {
    pub fn new(tau: Vec<i64>, j: u64) -> Self {
        Self { tau, j }
    }

    pub fn tau_norm(&self) -> f64 {
        self.tau.iter().map(|&t| (t as f64) * (t as f64)).sum::<f64>().sqrt()
    }

    /// Euclidean norm of the concatenated vector `(τ, j)`.
    pub fn pair_norm(&self) -> f64 {
        let j = self.j as f64;
        (self.tau.iter().map(|&t| (t as f64) * (t as f64)).sum::<f64>() + j * j).sqrt()
    }
}

/// `‖τ‖₂^{1/σ} + (j+1)^{1/(2nμ)}`; `j` is 0-based so the shift reproduces
/// the weight on `j ∈ {1, 2, …}`.
pub fn weight<T: Real>(params: &SpaceParams, mode: &ModeIndex) -> T {
    let tau_sq = mode.tau.iter().fold(T::zero(), |acc, &t| {
        let tf = T::of_i64(t);
        acc + tf * tf
    });
    let tau_part = if tau_sq == T::zero() {
        T::zero()
    } else {
        tau_sq.sqrt().powf(T::of(1.0 / params.sigma))
    };
    let j_part = T::of((mode.j + 1) as f64).powf(T::of(params.j_exponent()));
    tau_part + j_part
}

/// Rectangular truncation `|τ_i| ≤ tauMax[i]`, `0 ≤ j < jCount`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bounds {
    tau_max: Vec<i64>,
    j_count: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct BoundsRepr {
    tau_max: Vec<i64>,
    j_max: Option<u64>,
}

impl Serialize for Bounds {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BoundsRepr { tau_max: self.tau_max.clone(), j_max: self.j_max() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Bounds {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = BoundsRepr::deserialize(d)?;
        if r.tau_max.iter().any(|&t| t < 0) {
            return Err(serde::de::Error::custom("tauMax entries must be nonnegative"));
        }
        Ok(match r.j_max {
            Some(j) => Bounds { tau_max: r.tau_max, j_count: j + 1 },
            None => Bounds { tau_max: r.tau_max, j_count: 0 },
        })
    }
}

impl Bounds {
    pub fn new(tau_max: Vec<i64>, j_max: u64) -> Result<Self> {
        if tau_max.is_empty() || tau_max.iter().any(|&t| t < 0) {
            return Err(Error::InvalidParams(format!("tauMax must be nonempty and nonnegative: {tau_max:?}")));
        }
        Ok(Self { tau_max, j_count: j_max + 1 })
    }

    /// Same `tauMax` on each of `m` axes.
    pub fn uniform(m: usize, tau_max: i64, j_max: u64) -> Result<Self> {
        Self::new(vec![tau_max; m], j_max)
    }

    /// The bounds that contain no mode.
    pub fn empty(m: usize) -> Self {
        Self { tau_max: vec![0; m], j_count: 0 }
    }

    pub fn m(&self) -> usize {
        self.tau_max.len()
    }

    pub fn tau_max(&self) -> &[i64] {
        &self.tau_max
    }

    pub fn j_max(&self) -> Option<u64> {
        self.j_count.checked_sub(1)
    }

    pub fn j_count(&self) -> u64 {
        self.j_count
    }

    pub fn is_empty(&self) -> bool {
        self.j_count == 0
    }

    /// Number of `τ` points.
    pub fn tau_count(&self) -> u128 {
        self.tau_max.iter().map(|&t| (2 * t + 1) as u128).product()
    }

    /// Number of modes.
    pub fn len(&self) -> u128 {
        self.tau_count() * self.j_count as u128
    }

    pub fn contains(&self, mode: &ModeIndex) -> bool {
        mode.tau.len() == self.tau_max.len()
            && mode.j < self.j_count
            && mode.tau.iter().zip(&self.tau_max).all(|(t, m)| t.abs() <= *m)
    }

    /// All `τ` vectors in lexicographic order.
    pub fn taus(&self) -> TauIter {
        TauIter::new(&self.tau_max, self.is_empty())
    }

    /// All modes in canonical (`τ` lexicographic, then `j`) order.
    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        self.taus().flat_map(move |tau| (0..self.j_count).map(move |j| ModeIndex::new(tau.clone(), j)))
    }

    /// The corner mode of largest weight.
    pub fn outer_corner(&self) -> Option<ModeIndex> {
        self.j_max().map(|j| ModeIndex::new(self.tau_max.clone(), j))
    }
}

/// Odometer over a box of integer vectors.
pub struct TauIter {
    max: Vec<i64>,
    cur: Option<Vec<i64>>,
}

impl TauIter {
    fn new(max: &[i64], empty: bool) -> Self {
        let cur = if empty { None } else { Some(max.iter().map(|&m| -m).collect()) };
        Self { max: max.to_vec(), cur }
    }
}

impl Iterator for TauIter {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        let out = self.cur.clone()?;
        let cur = self.cur.as_mut().unwrap();
        let mut axis = cur.len();
        loop {
            if axis == 0 {
                self.cur = None;
                break;
            }
            axis -= 1;
            if cur[axis] < self.max[axis] {
                cur[axis] += 1;
                break;
            }
            cur[axis] = -self.max[axis];
        }
        Some(out)
    }
}

/// Sparse coefficient field over a rectangular truncation; modes not stored
/// are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<T> {
    bounds: Bounds,
    entries: BTreeMap<ModeIndex, Complex<T>>,
}

impl<T: Real> SpectralField<T> {
    pub fn zeros(bounds: Bounds) -> Self {
        Self { bounds, entries: BTreeMap::new() }
    }

    /// Dense construction; zero values are not stored.
    pub fn from_fn(bounds: Bounds, mut f: impl FnMut(&ModeIndex) -> Complex<T>) -> Self {
        let mut field = Self::zeros(bounds);
        let modes: Vec<ModeIndex> = field.bounds.modes().collect();
        for mode in modes {
            let v = f(&mode);
            if v != Complex::new(T::zero(), T::zero()) {
                field.entries.insert(mode, v);
            }
        }
        field
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Sets a coefficient. Storing zero removes the entry.
    pub fn insert(&mut self, mode: ModeIndex, value: Complex<T>) -> Result<()> {
        if !self.bounds.contains(&mode) {
            return Err(Error::OutOfBounds(format!("{mode:?} not within {:?}", self.bounds)));
        }
        if value.re == T::zero() && value.im == T::zero() {
            self.entries.remove(&mode);
        } else {
            self.entries.insert(mode, value);
        }
        Ok(())
    }

    pub fn get(&self, mode: &ModeIndex) -> Complex<T> {
        self.entries.get(mode).copied().unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    /// Stored (nonzero) entries in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&ModeIndex, &Complex<T>)> {
        self.entries.iter()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_abs(&self) -> T {
        self.entries.values().fold(T::zero(), |acc, v| acc.max(v.norm()))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.bounds != other.bounds {
            return Err(Error::Shape("fields with different bounds".into()));
        }
        let mut out = self.clone();
        for (mode, v) in &other.entries {
            let sum = out.get(mode) + v;
            out.insert(mode.clone(), sum)?;
        }
        Ok(out)
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        let mut out = Self::zeros(self.bounds.clone());
        for (mode, v) in &self.entries {
            let s = v * c;
            if s.re != T::zero() || s.im != T::zero() {
                out.entries.insert(mode.clone(), s);
            }
        }
        out
    }

    /// Entries with `j` fixed, keyed by `τ`.
    pub fn slice_j(&self, j: u64) -> Vec<(&[i64], Complex<T>)> {
        self.entries.iter().filter(|(m, _)| m.j == j).map(|(m, v)| (m.tau.as_slice(), *v)).collect()
    }

    pub fn map_values(&self, mut f: impl FnMut(&ModeIndex, Complex<T>) -> Complex<T>) -> Self {
        let mut out = Self::zeros(self.bounds.clone());
        for (mode, v) in &self.entries {
            let s = f(mode, *v);
            if s.re != T::zero() || s.im != T::zero() {
                out.entries.insert(mode.clone(), s);
            }
        }
        out
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> SpectralField<U> {
        SpectralField {
            bounds: self.bounds.clone(),
            entries: self
                .entries
                .iter()
                .map(|(m, v)| (m.clone(), Complex::new(U::of(v.re.to_f64_lossy()), U::of(v.im.to_f64_lossy()))))
                .collect(),
        }
    }
}

/// Contiguous weight ranges with log-uniform edges between the smallest and
/// largest weight of a set of modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellPartition {
    pub edges: Vec<f64>,
}

impl ShellPartition {
    pub fn log_uniform(w_min: f64, w_max: f64, shell_count: usize) -> Self {
        let k = shell_count.max(1);
        let (lo, hi) = (w_min.ln(), w_max.max(w_min).ln());
        let mut edges: Vec<f64> = (0..=k).map(|i| (lo + (hi - lo) * i as f64 / k as f64).exp()).collect();
        edges[0] = w_min;
        edges[k] = w_max.max(w_min);
        Self { edges }
    }

    /// Partition spanning every weight in `bounds`.
    pub fn for_bounds(params: &SpaceParams, bounds: &Bounds, shell_count: usize) -> Option<Self> {
        let corner = bounds.outer_corner()?;
        let w_min = weight::<f64>(params, &ModeIndex::new(vec![0; bounds.m()], 0));
        let w_max = weight::<f64>(params, &corner);
        Some(Self::log_uniform(w_min, w_max, shell_count))
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Shell containing weight `w` (clamped to the outer shells).
    pub fn index_of(&self, w: f64) -> usize {
        let k = self.len();
        let (lo, hi) = (self.edges[0], self.edges[k]);
        if !(hi > lo) || w <= lo {
            return 0;
        }
        if w >= hi {
            return k - 1;
        }
        let pos = (w.ln() - lo.ln()) / (hi.ln() - lo.ln()) * k as f64;
        let mut idx = (pos.floor() as usize).min(k - 1);
        // settle rounding against the stored edges
        while idx > 0 && w < self.edges[idx] {
            idx -= 1;
        }
        while idx + 1 < k && w >= self.edges[idx + 1] {
            idx += 1;
        }
        idx
    }

    /// Lower edge of shell `k`.
    pub fn lower(&self, k: usize) -> f64 {
        self.edges[k]
    }

    /// Upper edge (the radius `R`) of shell `k`.
    pub fn upper(&self, k: usize) -> f64 {
        self.edges[k + 1]
    }
}

/// Splits all modes of `bounds` into `shell_count` weight shells (dyadic in
/// spirit: log-uniform edges). Shells may be empty on tiny grids; their union
/// is the grid and they are pairwise disjoint.
pub fn enumerate_shells(params: &SpaceParams, bounds: &Bounds, shell_count: usize) -> Result<Vec<Vec<ModeIndex>>> {
    if shell_count == 0 {
        return Err(Error::InvalidParams("shellCount must be >= 1".into()));
    }
    let Some(part) = ShellPartition::for_bounds(params, bounds, shell_count) else {
        return Ok(Vec::new());
    };
    let mut shells = vec![Vec::new(); shell_count];
    for mode in bounds.modes() {
        let k = part.index_of(weight::<f64>(params, &mode));
        shells[k].push(mode);
    }
    Ok(shells)
}

/// Values of a reconstructed field on `tGrid × xGrid`, row-major with the
/// `t` index outer.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction<T> {
    /// Points per torus axis; `t_k = 2π i / N_k`.
    pub t_shape: Vec<usize>,
    pub x_count: usize,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> Reconstruction<T> {
    pub fn at(&self, t_flat: usize, x_index: usize) -> Complex<T> {
        self.values[t_flat * self.x_count + x_index]
    }
}

/// Uniform torus point for flat index `flat` of a grid with `shape`.
pub fn torus_point<T: Real>(shape: &[usize], mut flat: usize) -> Vec<T> {
    let mut t = vec![T::zero(); shape.len()];
    for axis in (0..shape.len()).rev() {
        let i = flat % shape[axis];
        flat /= shape[axis];
        t[axis] = T::of(2.0 * std::f64::consts::PI * i as f64 / shape[axis] as f64);
    }
    t
}

/// Truncated double series `Σ_j Σ_τ a(τ,j) e^{iτ·t} φ_j(x)` on the grids.
pub fn reconstruct<T: Real>(
    field: &SpectralField<T>,
    t_shape: &[usize],
    x_points: &[Vec<T>],
    basis: &EigenProvider,
) -> Result<Reconstruction<T>> {
    if !basis.has_eigenfunctions() {
        return Err(Error::UnsupportedBasis("reconstruction needs concrete eigenfunctions".into()));
    }
    if t_shape.len() != field.bounds().m() || t_shape.iter().any(|&n| n == 0) {
        return Err(Error::Shape(format!("time grid {t_shape:?} does not match m = {}", field.bounds().m())));
    }
    let j_count = field.bounds().j_count();
    let phi: Vec<Vec<T>> = x_points.iter().map(|x| basis.eigenfunctions_at(j_count, x)).collect::<Result<_>>()?;
    let t_total: usize = t_shape.iter().product();
    let x_count = x_points.len();
    let mut values = vec![Complex::new(T::zero(), T::zero()); t_total * x_count];
    for t_flat in 0..t_total {
        let t = torus_point::<T>(t_shape, t_flat);
        // Σ_τ a(τ,j) e^{iτ·t} for every j present
        let mut per_j: BTreeMap<u64, Complex<T>> = BTreeMap::new();
        for (mode, a) in field.iter() {
            let phase = mode.tau.iter().zip(&t).fold(T::zero(), |acc, (&k, &tk)| acc + T::of_i64(k) * tk);
            let slot = per_j.entry(mode.j).or_insert_with(|| Complex::new(T::zero(), T::zero()));
            *slot = *slot + a * Complex::new(phase.cos(), phase.sin());
        }
        for (xi, row) in phi.iter().enumerate() {
            let acc = per_j.iter().fold(Complex::new(T::zero(), T::zero()), |acc, (&j, s)| acc + s * row[j as usize]);
            values[t_flat * x_count + xi] = acc;
        }
    }
    Ok(Reconstruction { t_shape: t_shape.to_vec(), x_count, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(m: usize, n: usize, sigma: f64, mu: f64) -> SpaceParams {
        SpaceParams::new(m, n, sigma, mu, 2).unwrap()
    }

    #[test]
    fn weight_examples() {
        let a = p(1, 1, 1.0, 0.5);
        assert_eq!(weight::<f64>(&a, &ModeIndex::new(vec![0], 0)), 1.0);
        assert_eq!(weight::<f64>(&a, &ModeIndex::new(vec![3], 3)), 7.0);
        let b = p(2, 1, 2.0, 1.0);
        assert_relative_eq!(weight::<f64>(&b, &ModeIndex::new(vec![3, 4], 0)), 5f64.sqrt() + 1.0, epsilon = 1e-14);
        assert_relative_eq!(weight::<f64>(&b, &ModeIndex::new(vec![3, 4], 0)), 3.23607, epsilon = 1e-5);
        assert_eq!(weight::<f32>(&a, &ModeIndex::new(vec![-3], 3)), 7.0f32);
    }

    #[test]
    fn params_validation() {
        assert!(SpaceParams::new(1, 1, 0.9, 0.5, 2).is_err());
        assert!(SpaceParams::new(1, 1, 1.0, 0.4, 2).is_err());
        assert!(SpaceParams::new(1, 1, 1.0, 0.5, 1).is_err());
        assert!(SpaceParams::new(0, 1, 1.0, 0.5, 2).is_err());
    }

    #[test]
    fn bounds_iteration() {
        let b = Bounds::uniform(2, 1, 1).unwrap();
        assert_eq!(b.len(), 18);
        let modes: Vec<ModeIndex> = b.modes().collect();
        assert_eq!(modes.len(), 18);
        assert!(modes.windows(2).all(|w| w[0] < w[1]));
        assert!(Bounds::empty(1).modes().next().is_none());
        assert!(!b.contains(&ModeIndex::new(vec![2, 0], 0)));
        assert!(!b.contains(&ModeIndex::new(vec![0], 0)));
    }

    #[test]
    fn shells_single_and_split() {
        let params = p(1, 1, 1.0, 0.5);
        let one = enumerate_shells(&params, &Bounds::uniform(1, 1, 1).unwrap(), 1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].len(), 6);

        let two = enumerate_shells(&params, &Bounds::uniform(1, 2, 0).unwrap(), 2).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].len() + two[1].len(), 5);
        let max_inner = two[0].iter().map(|m| weight::<f64>(&params, m)).fold(0.0, f64::max);
        let min_outer = two[1].iter().map(|m| weight::<f64>(&params, m)).fold(f64::INFINITY, f64::min);
        assert!(max_inner < min_outer);
        assert!(!two[0].is_empty() && !two[1].is_empty());

        assert!(enumerate_shells(&params, &Bounds::empty(1), 3).unwrap().is_empty());
    }

    #[test]
    fn field_insert_and_bounds() {
        let mut f = SpectralField::<f64>::zeros(Bounds::uniform(1, 2, 2).unwrap());
        assert!(f.insert(ModeIndex::new(vec![3], 0), Complex::new(1.0, 0.0)).is_err());
        f.insert(ModeIndex::new(vec![1], 0), Complex::new(1.0, 0.0)).unwrap();
        assert_eq!(f.nnz(), 1);
        f.insert(ModeIndex::new(vec![1], 0), Complex::new(0.0, 0.0)).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn reconstruct_ground_state() {
        let mut f = SpectralField::<f64>::zeros(Bounds::uniform(1, 1, 1).unwrap());
        f.insert(ModeIndex::new(vec![0], 0), Complex::new(1.0, 0.0)).unwrap();
        let r = reconstruct(&f, &[4], &[vec![0.0], vec![1.0]], &EigenProvider::Harmonic1D).unwrap();
        assert_relative_eq!(r.at(0, 0).re, 0.751126, epsilon = 1e-6);
        assert_relative_eq!(r.at(2, 1).re, std::f64::consts::PI.powf(-0.25) * (-0.5f64).exp(), epsilon = 1e-14);

        let zero = SpectralField::<f64>::zeros(Bounds::uniform(1, 1, 1).unwrap());
        let rz = reconstruct(&zero, &[4], &[vec![0.3]], &EigenProvider::Harmonic1D).unwrap();
        assert!(rz.values.iter().all(|v| v.norm() == 0.0));

        let mut g = SpectralField::<f64>::zeros(Bounds::uniform(1, 1, 1).unwrap());
        g.insert(ModeIndex::new(vec![1], 0), Complex::new(1.0, 0.0)).unwrap();
        let rg = reconstruct(&g, &[4], &[vec![0.0]], &EigenProvider::Harmonic1D).unwrap();
        assert_relative_eq!(rg.at(0, 0).re, r.at(0, 0).re, epsilon = 1e-15);
    }

    #[test]
    fn reconstruct_rejects_custom() {
        let c = crate::eigen::CustomSpectrum::new(vec![1.0, 2.0], None, 2, 1).unwrap();
        let f = SpectralField::<f64>::zeros(Bounds::uniform(1, 1, 1).unwrap());
        let err = reconstruct(&f, &[4], &[vec![0.0]], &EigenProvider::Custom(c)).unwrap_err();
        assert!(matches!(err, Error::UnsupportedBasis(_)));
    }
}
