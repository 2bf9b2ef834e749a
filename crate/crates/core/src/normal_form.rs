//! Systems `L_r = D_r + a_r(t_r) P` with periodic coefficients, their normal
//! form `D_r + a_{r,0} P`, and the conjugation
//! `Ψu = Σ_j exp(−iA(t)λ_j) u_j(t) φ_j` that intertwines them.
//!
//! Coefficients are kept as real trigonometric polynomials; sampled input is
//! turned into its trigonometric interpolant so that `A` has an exact
//! antiderivative. Fields live in Fourier space and are moved to a uniform
//! `t`-grid with FFTs, one eigenindex at a time.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex;
use num_rational::BigRational;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::eigen::EigenProvider;
use crate::error::{Error, Result};
use crate::exact::Coefficient;
use crate::scalar::Real;
use crate::spectral::{Bounds, ModeIndex, SpaceParams, SpectralField};
use crate::symbols::{OperatorSpec, SystemSpec, TimeSymbol};

/// Distance to an integer below which `a_{r,0} λ_j` counts as resonant.
pub const RESONANCE_TOL: f64 = 1e-9;

/// A real 2π-periodic coefficient
/// `a(t) = c + Σ_k cos_k cos(kt) + sin_k sin(kt)`, `k ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimeCoefficient {
    #[serde(rename = "const")]
    pub constant: f64,
    #[serde(skip)]
    pub constant_exact: Option<BigRational>,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
    /// Number of samples when built from a sampled function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl TimeCoefficient {
    pub fn trig(constant: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if !constant.is_finite() || cos.iter().chain(&sin).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("time coefficient must be finite".into()));
        }
        Ok(Self { constant, constant_exact: None, cos, sin, samples: None })
    }

    pub fn constant(c: f64) -> Self {
        Self { constant: c, constant_exact: None, cos: Vec::new(), sin: Vec::new(), samples: None }
    }

    /// Attaches the exact value of the constant term.
    pub fn with_exact_constant(mut self, c: BigRational) -> Self {
        self.constant = crate::exact::rational_to_f64(&c);
        self.constant_exact = Some(c);
        self
    }

    /// Trigonometric interpolant of samples `a(2πk/N)`, `k = 0..N`.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidParams("need at least two samples".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("samples must be finite".into()));
        }
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let nf = n as f64;
        let half = n / 2;
        let mut cos = Vec::with_capacity(half);
        let mut sin = Vec::with_capacity(half);
        for (k, x) in buf.iter().enumerate().take(half + 1).skip(1) {
            if 2 * k == n {
                cos.push(x.re / nf);
                sin.push(0.0);
            } else {
                cos.push(2.0 * x.re / nf);
                sin.push(-2.0 * x.im / nf);
            }
        }
        Ok(Self { constant: buf[0].re / nf, constant_exact: None, cos, sin, samples: Some(n) })
    }

    /// Highest harmonic present.
    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    pub fn is_constant(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|&c| c == 0.0)
    }

    fn harmonic(&self, k: usize) -> (f64, f64) {
        (self.cos.get(k - 1).copied().unwrap_or(0.0), self.sin.get(k - 1).copied().unwrap_or(0.0))
    }

    pub fn eval(&self, t: f64) -> f64 {
        (1..=self.degree()).fold(self.constant, |acc, k| {
            let (c, s) = self.harmonic(k);
            let kt = k as f64 * t;
            acc + c * kt.cos() + s * kt.sin()
        })
    }

    /// `∫_0^t (a(η) − a_0) dη`, periodic with zero at the origin.
    pub fn oscillating_integral(&self, t: f64) -> f64 {
        (1..=self.degree()).fold(0.0, |acc, k| {
            let (c, s) = self.harmonic(k);
            let kf = k as f64;
            let kt = kf * t;
            acc + c * kt.sin() / kf + s * (1.0 - kt.cos()) / kf
        })
    }

    /// Upper bound for `‖a − a_0‖_∞`.
    pub fn deviation_bound(&self) -> f64 {
        self.cos.iter().chain(&self.sin).map(|c| c.abs()).sum()
    }

    /// Interpolation error proxy for sampled input: the coefficient mass in the
    /// top quarter of the resolved band. Zero for trigonometric input.
    pub fn quadrature_error(&self) -> f64 {
        match self.samples {
            None => 0.0,
            Some(_) => {
                let d = self.degree();
                let from = (3 * d) / 4 + 1;
                (from..=d).map(|k| {
                    let (c, s) = self.harmonic(k);
                    c.abs() + s.abs()
                })
                .sum()
            }
        }
    }
}

/// `a_{r,0} = (2π)^{−1}∫ a_r`: the constant term.
pub fn average_coefficient(a: &TimeCoefficient) -> f64 {
    a.constant
}

/// One coefficient per time axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeCoefficientSet {
    pub coeffs: Vec<TimeCoefficient>,
}

impl TimeCoefficientSet {
    pub fn new(coeffs: Vec<TimeCoefficient>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParams("need at least one time coefficient".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn m(&self) -> usize {
        self.coeffs.len()
    }

    pub fn averages(&self) -> Vec<f64> {
        self.coeffs.iter().map(average_coefficient).collect()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().all(TimeCoefficient::is_constant)
    }
}

/// `A(t) = Σ_k ∫_0^{t_k} a_k − a_{k,0} t_k`.
pub fn phase_a(coeffs: &TimeCoefficientSet, t: &[f64]) -> Result<f64> {
    if t.len() != coeffs.m() {
        return Err(Error::Shape(format!("point has {} coordinates, expected {}", t.len(), coeffs.m())));
    }
    Ok(coeffs.coeffs.iter().zip(t).map(|(a, &tk)| a.oscillating_integral(tk)).sum())
}

/// `𝕃_a`: coefficients, the spatial operator's spectrum and the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeDependentSystem {
    pub coeffs: TimeCoefficientSet,
    pub eigen: EigenProvider,
    pub params: SpaceParams,
}

impl TimeDependentSystem {
    pub fn new(coeffs: TimeCoefficientSet, eigen: EigenProvider, params: SpaceParams) -> Result<Self> {
        params.validate()?;
        if coeffs.m() != params.m {
            return Err(Error::Shape(format!("{} coefficients for m = {}", coeffs.m(), params.m)));
        }
        if eigen.n() != params.n || eigen.big_m() != params.big_m {
            return Err(Error::Shape("eigen provider does not match (n, M)".into()));
        }
        Ok(Self { coeffs, eigen, params })
    }

    /// `M μ − 1 ≤ σ`.
    pub fn check_regularity(&self) -> Result<()> {
        let p = &self.params;
        let lhs = p.big_m as f64 * p.mu - 1.0;
        if lhs > p.sigma + 1e-12 {
            return Err(Error::Regularity(format!(
                "M*mu - 1 = {lhs} exceeds sigma = {} (M = {}, mu = {})",
                p.sigma, p.big_m, p.mu
            )));
        }
        Ok(())
    }

    /// Default grid per axis: `max(2T+2, 16 λ_max ‖a − a_0‖_∞)`, rounded up
    /// to a power of two.
    pub fn default_grid(&self, bounds: &Bounds) -> Result<Vec<usize>> {
        let lmax = self.lambda_max(bounds)?;
        Ok(bounds
            .tau_max()
            .iter()
            .zip(&self.coeffs.coeffs)
            .map(|(&t, a)| {
                let need = (2 * t as usize + 2).max((16.0 * lmax * a.deviation_bound()).ceil() as usize);
                need.next_power_of_two()
            })
            .collect())
    }

    fn lambda_max(&self, bounds: &Bounds) -> Result<f64> {
        let Some(j_max) = bounds.j_max() else { return Ok(0.0) };
        Ok(self.eigen.eigenvalues(0, j_max)?.into_iter().fold(0.0, |a, l| a.max(l.abs())))
    }
}

/// The normal form: `Q_r(τ) = τ_r`, `d_r = a_{r,0}`.
pub fn reduce_system<T: Real>(sys: &TimeDependentSystem) -> Result<SystemSpec<T>> {
    sys.check_regularity()?;
    let m = sys.params.m;
    let ops = sys
        .coeffs
        .coeffs
        .iter()
        .enumerate()
        .map(|(r, a)| {
            let d = match &a.constant_exact {
                Some(c) => Coefficient::exact_real(c.clone()),
                None => Coefficient::real(T::of(a.constant)),
            };
            OperatorSpec::new(TimeSymbol::derivative(m, r), d)
        })
        .collect();
    SystemSpec::new(ops, sys.eigen.clone(), sys.params.clone())
}

/// Samples of `A` on the tensor grid, with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NormalFormMap {
    pub averages: Vec<f64>,
    pub grid: Vec<usize>,
    /// Row-major, last axis fastest.
    #[serde(skip)]
    pub phase_grid: Vec<f64>,
    pub phase_max: f64,
    pub quadrature_error: f64,
    /// `max_k |A(t + 2π e_k) − A(t)|` over the grid.
    pub periodicity_defect: f64,
}

impl NormalFormMap {
    pub fn build(coeffs: &TimeCoefficientSet, grid: &[usize]) -> Result<Self> {
        if grid.len() != coeffs.m() || grid.iter().any(|&n| n == 0) {
            return Err(Error::Shape("grid must have one positive size per time axis".into()));
        }
        let axes: Vec<Vec<f64>> = coeffs
            .coeffs
            .iter()
            .zip(grid)
            .map(|(a, &n)| (0..n).map(|i| a.oscillating_integral(TAU * i as f64 / n as f64)).collect())
            .collect();
        let total: usize = grid.iter().product();
        let phase_grid: Vec<f64> = (0..total).map(|flat| sum_axes(&axes, grid, flat)).collect();
        let periodicity_defect = coeffs
            .coeffs
            .iter()
            .zip(&axes)
            .map(|(a, ax)| ax.iter().enumerate().fold(0.0f64, |acc, (i, &v)| {
                let t = TAU * i as f64 / ax.len() as f64;
                acc.max((a.oscillating_integral(t + TAU) - v).abs())
            }))
            .fold(0.0, f64::max);
        Ok(Self {
            averages: coeffs.averages(),
            grid: grid.to_vec(),
            phase_max: phase_grid.iter().fold(0.0, |a, &v| a.max(v.abs())),
            phase_grid,
            quadrature_error: coeffs.coeffs.iter().map(TimeCoefficient::quadrature_error).sum(),
            periodicity_defect,
        })
    }
}

fn sum_axes(axes: &[Vec<f64>], grid: &[usize], mut flat: usize) -> f64 {
    let mut s = 0.0;
    for k in (0..grid.len()).rev() {
        s += axes[k][flat % grid[k]];
        flat /= grid[k];
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Direction {
    /// Multiplier `exp(−iAλ_j)`.
    Forward,
    /// Multiplier `exp(iAλ_j)`.
    Inverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }
}

/// Output of [`psi_apply`].
#[derive(Clone, Debug, PartialEq)]
pub struct PsiResult<T> {
    pub field: SpectralField<T>,
    pub grid: Vec<usize>,
    /// Largest coefficient dropped outside the field bounds.
    pub truncated: f64,
    /// Largest coefficient in the outer quarter of the grid band; large
    /// values mean the phase is not resolved.
    pub alias_band: f64,
}

/// Multidimensional FFT on a row-major buffer.
struct Transform<T: Real> {
    grid: Vec<usize>,
    forward: Vec<Arc<dyn Fft<T>>>,
    inverse: Vec<Arc<dyn Fft<T>>>,
}

impl<T: Real> Transform<T> {
    fn new(grid: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid: grid.to_vec(),
            forward: grid.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: grid.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    fn total(&self) -> usize {
        self.grid.iter().product()
    }

    fn run(&self, buf: &mut [Complex<T>], inverse: bool) {
        let mut stride = 1;
        let mut line = Vec::new();
        for k in (0..self.grid.len()).rev() {
            let n = self.grid[k];
            let plan = if inverse { &self.inverse[k] } else { &self.forward[k] };
            line.resize(n, Complex::new(T::zero(), T::zero()));
            let block = n * stride;
            for outer in (0..buf.len()).step_by(block) {
                for inner in 0..stride {
                    let start = outer + inner;
                    for (i, slot) in line.iter_mut().enumerate() {
                        *slot = buf[start + i * stride];
                    }
                    plan.process(&mut line);
                    for (i, v) in line.iter().enumerate() {
                        buf[start + i * stride] = *v;
                    }
                }
            }
            stride *= n;
        }
    }

    fn flat(&self, tau: &[i64]) -> usize {
        tau.iter().zip(&self.grid).fold(0, |acc, (&t, &n)| acc * n + t.rem_euclid(n as i64) as usize)
    }

    /// Signed frequency of every grid slot along each axis.
    fn frequencies(&self, mut flat: usize) -> Vec<i64> {
        let mut out = vec![0; self.grid.len()];
        for k in (0..self.grid.len()).rev() {
            let n = self.grid[k];
            let i = (flat % n) as i64;
            out[k] = if i >= (n as i64 + 1) / 2 { i - n as i64 } else { i };
            flat /= n;
        }
        out
    }

    /// Grid values `u(t) = Σ û(τ) e^{iτ·t}` of one eigen-slice.
    fn synthesise(&self, slice: &[(&[i64], Complex<T>)]) -> Vec<Complex<T>> {
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.total()];
        for (tau, v) in slice {
            buf[self.flat(tau)] = *v;
        }
        self.run(&mut buf, true);
        buf
    }

    /// Fourier coefficients of grid values, in place.
    fn analyse(&self, buf: &mut [Complex<T>]) {
        self.run(buf, false);
        let scale = T::one() / T::of(self.total() as f64);
        for v in buf.iter_mut() {
            *v = *v * scale;
        }
    }
}

fn check_grid(bounds: &Bounds, grid: &[usize]) -> Result<()> {
    if grid.len() != bounds.m() {
        return Err(Error::Shape(format!("grid has {} axes, expected {}", grid.len(), bounds.m())));
    }
    for (k, (&n, &t)) in grid.iter().zip(bounds.tau_max()).enumerate() {
        if (n as i64) < 2 * t + 2 {
            return Err(Error::Resolution(format!("N_t = {n} on axis {k} is below 2*tauMax+2 = {}", 2 * t + 2)));
        }
    }
    Ok(())
}

fn grid_for(sys: &TimeDependentSystem, bounds: &Bounds, grid: Option<&[usize]>) -> Result<Vec<usize>> {
    let g = match grid {
        Some(g) => g.to_vec(),
        None => sys.default_grid(bounds)?,
    };
    check_grid(bounds, &g)?;
    Ok(g)
}

fn unit<T: Real>(theta: f64) -> Complex<T> {
    Complex::new(T::of(theta.cos()), T::of(theta.sin()))
}

/// `Ψu` or `Ψ^{−1}u`, truncated back to the bounds of `u`.
pub fn psi_apply<T: Real>(
    direction: Direction,
    u: &SpectralField<T>,
    sys: &TimeDependentSystem,
    grid: Option<&[usize]>,
) -> Result<PsiResult<T>> {
    sys.check_regularity()?;
    let bounds = u.bounds().clone();
    if bounds.m() != sys.params.m {
        return Err(Error::Shape(format!("field has m = {}, system has m = {}", bounds.m(), sys.params.m)));
    }
    let grid = grid_for(sys, &bounds, grid)?;
    if sys.coeffs.is_constant() {
        return Ok(PsiResult { field: u.clone(), grid, truncated: 0.0, alias_band: 0.0 });
    }
    let map = NormalFormMap::build(&sys.coeffs, &grid)?;
    let fft = Transform::<T>::new(&grid);
    let sign = direction.sign();
    let js: Vec<u64> = u.iter().map(|(m, _)| m.j).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let slices: Vec<(u64, Vec<(&[i64], Complex<T>)>)> = js.iter().map(|&j| (j, u.slice_j(j))).collect();
    let results: Vec<Result<(u64, Vec<(Vec<i64>, Complex<T>)>, f64, f64)>> = slices
        .par_iter()
        .map(|(j, slice)| {
            let lambda = sys.eigen.eigenvalue_f64(*j)?;
            let mut buf = fft.synthesise(slice);
            for (v, &a) in buf.iter_mut().zip(&map.phase_grid) {
                *v = *v * unit::<T>(sign * lambda * a);
            }
            fft.analyse(&mut buf);
            let (mut kept, mut truncated, mut alias) = (Vec::new(), 0.0f64, 0.0f64);
            for (flat, v) in buf.iter().enumerate() {
                let tau = fft.frequencies(flat);
                let mag = v.norm().to_f64_lossy();
                if tau.iter().zip(&grid).any(|(&t, &n)| 8 * t.unsigned_abs() as usize >= 3 * n) {
                    alias = alias.max(mag);
                }
                if tau.iter().zip(bounds.tau_max()).all(|(t, m)| t.abs() <= *m) {
                    kept.push((tau, *v));
                } else {
                    truncated = truncated.max(mag);
                }
            }
            Ok((*j, kept, truncated, alias))
        })
        .collect();
    let mut field = SpectralField::zeros(bounds);
    let (mut truncated, mut alias_band) = (0.0f64, 0.0f64);
    for r in results {
        let (j, kept, t, a) = r?;
        truncated = truncated.max(t);
        alias_band = alias_band.max(a);
        for (tau, v) in kept {
            field.insert(ModeIndex::new(tau, j), v)?;
        }
    }
    Ok(PsiResult { field, grid, truncated, alias_band })
}

/// Interior modes: `|τ_k| ≤ tauMax_k / 2`.
fn interior(bounds: &Bounds, tau: &[i64]) -> bool {
    tau.iter().zip(bounds.tau_max()).all(|(t, m)| 2 * t.abs() <= *m)
}

/// Result of [`conjugation_residual`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConjugationReport {
    /// `max_r` of the per-operator relative residuals.
    pub residual: f64,
    pub per_operator: Vec<f64>,
    pub grid: Vec<usize>,
    pub alias_band: f64,
}

/// Measures `Ψ^{−1} L_r Ψ − L_{r,0}` on a test field, relative to
/// `‖L_{r,0} u‖_∞`, over interior modes. `L_r` acts on the grid: spectral
/// differentiation in `t_r`, multiplication by `a_r(t_r) λ_j`.
pub fn conjugation_residual<T: Real>(
    sys: &TimeDependentSystem,
    test: &SpectralField<T>,
    grid: Option<&[usize]>,
) -> Result<ConjugationReport> {
    sys.check_regularity()?;
    let bounds = test.bounds().clone();
    if bounds.m() != sys.params.m {
        return Err(Error::Shape("test field dimension does not match the system".into()));
    }
    let grid = grid_for(sys, &bounds, grid)?;
    let m = sys.params.m;
    let map = NormalFormMap::build(&sys.coeffs, &grid)?;
    let fft = Transform::<T>::new(&grid);
    let averages = sys.coeffs.averages();
    // a_r(t_r) on the grid
    let coeff_grid: Vec<Vec<f64>> = sys
        .coeffs
        .coeffs
        .iter()
        .zip(&grid)
        .map(|(a, &n)| (0..n).map(|i| a.eval(TAU * i as f64 / n as f64)).collect())
        .collect();
    let js: Vec<u64> = test.iter().map(|(md, _)| md.j).collect::<std::collections::BTreeSet<_>>().into_iter().collect();

    let per_j: Vec<Result<(Vec<f64>, Vec<f64>, f64)>> = js
        .par_iter()
        .map(|&j| {
            let lambda = sys.eigen.eigenvalue_f64(j)?;
            let slice = test.slice_j(j);
            let mut w = fft.synthesise(&slice);
            for (v, &a) in w.iter_mut().zip(&map.phase_grid) {
                *v = *v * unit::<T>(-lambda * a);
            }
            let mut w_hat = w.clone();
            fft.analyse(&mut w_hat);
            let (mut diff, mut scale) = (vec![0.0f64; m], vec![0.0f64; m]);
            let mut alias = 0.0f64;
            for (flat, v) in w_hat.iter().enumerate() {
                let tau = fft.frequencies(flat);
                if tau.iter().zip(&grid).any(|(&t, &n)| 8 * t.unsigned_abs() as usize >= 3 * n) {
                    alias = alias.max(v.norm().to_f64_lossy());
                }
            }
            let original: BTreeMap<Vec<i64>, Complex<T>> = slice.iter().map(|(t, v)| (t.to_vec(), *v)).collect();
            for r in 0..m {
                let n_r = grid[r] as i64;
                // D_r w in Fourier space, Nyquist mode dropped
                let mut lw = w_hat.clone();
                for (flat, v) in lw.iter_mut().enumerate() {
                    let t = fft.frequencies(flat)[r];
                    let factor = if 2 * t == -n_r { 0.0 } else { t as f64 };
                    *v = *v * T::of(factor);
                }
                fft.run(&mut lw, true);
                let stride: usize = grid[r + 1..].iter().product();
                for (flat, v) in lw.iter_mut().enumerate() {
                    let i_r = (flat / stride) % grid[r];
                    let a = coeff_grid[r][i_r];
                    *v = *v + w[flat] * T::of(a * lambda);
                    *v = *v * unit::<T>(lambda * map.phase_grid[flat]);
                }
                fft.analyse(&mut lw);
                for (flat, v) in lw.iter().enumerate() {
                    let tau = fft.frequencies(flat);
                    if !interior(&bounds, &tau) {
                        continue;
                    }
                    let u0 = original.get(&tau).copied().unwrap_or(Complex::new(T::zero(), T::zero()));
                    let expect = u0 * T::of(tau[r] as f64 + averages[r] * lambda);
                    diff[r] = diff[r].max((*v - expect).norm().to_f64_lossy());
                    scale[r] = scale[r].max(expect.norm().to_f64_lossy());
                }
            }
            Ok((diff, scale, alias))
        })
        .collect();
    let (mut diff, mut scale, mut alias_band) = (vec![0.0f64; m], vec![0.0f64; m], 0.0f64);
    for r in per_j {
        let (d, s, a) = r?;
        for k in 0..m {
            diff[k] = diff[k].max(d[k]);
            scale[k] = scale[k].max(s[k]);
        }
        alias_band = alias_band.max(a);
    }
    let per_operator: Vec<f64> = diff
        .iter()
        .zip(&scale)
        .map(|(&d, &s)| if s > 0.0 { d / s } else { d })
        .collect();
    Ok(ConjugationReport {
        residual: per_operator.iter().copied().fold(0.0, f64::max),
        per_operator,
        grid,
        alias_band,
    })
}

/// `max |∫_0^{2π} exp(iλ_j ∫_0^{t_r} a_r) f_{r,j}(t) dt_r|` over the other
/// time variables, or `None` when `a_{r,0} λ_j` is not an integer.
pub fn compat_integral<T: Real>(
    sys: &TimeDependentSystem,
    r: usize,
    j: u64,
    f: &SpectralField<T>,
    grid: Option<&[usize]>,
) -> Result<Option<f64>> {
    sys.check_regularity()?;
    let m = sys.params.m;
    if r >= m {
        return Err(Error::InvalidParams(format!("component {r} out of range for m = {m}")));
    }
    let bounds = f.bounds().clone();
    if bounds.m() != m {
        return Err(Error::Shape("field dimension does not match the system".into()));
    }
    let lambda = sys.eigen.eigenvalue_f64(j)?;
    let a = &sys.coeffs.coeffs[r];
    let k = a.constant * lambda;
    if (k - k.round()).abs() > RESONANCE_TOL {
        return Ok(None);
    }
    let grid = grid_for(sys, &bounds, grid)?;
    let fft = Transform::<T>::new(&grid);
    let values = fft.synthesise(&f.slice_j(j));
    let n_r = grid[r];
    let weights: Vec<Complex<T>> = (0..n_r)
        .map(|i| {
            let t = TAU * i as f64 / n_r as f64;
            unit::<T>(lambda * (a.constant * t + a.oscillating_integral(t))) * T::of(TAU / n_r as f64)
        })
        .collect();
    let stride: usize = grid[r + 1..].iter().product();
    let mut best = 0.0f64;
    for (flat, _) in values.iter().enumerate() {
        if (flat / stride) % n_r != 0 {
            continue;
        }
        let s = (0..n_r).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + values[flat + i * stride] * weights[i]);
        best = best.max(s.norm().to_f64_lossy());
    }
    Ok(Some(best))
}
