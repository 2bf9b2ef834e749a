//! Operator systems `L_r = Q_r(D_t) + d_r P(x, D_x)` and their symbols
//! `σ_{L_r}(τ, j) = Q_r(τ) + d_r λ_j`.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex;
use num_rational::BigRational;
use num_traits::Pow;

use crate::eigen::EigenProvider;
use crate::error::{Error, Result};
use crate::exact::{Coefficient, ExactComplex};
use crate::scalar::Real;
use crate::spectral::{weight, ModeIndex, SpaceParams};

/// Below this modulus a double-precision symbol value with no exact
/// counterpart is treated as zero (and flagged).
pub const FLOAT_ZERO: f64 = 1e-30;

// A float value this small relative to its terms triggers an exact re-check.
const EXACT_RECHECK: f64 = 1e-8;

/// `c_α τ^α`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial<T> {
    pub alpha: Vec<u32>,
    pub coeff: Coefficient<T>,
}

type SymbolFn<T> = dyn Fn(&[i64]) -> Complex<T> + Send + Sync;

/// Opaque time symbol `a(τ)` with a declared moderate-growth bound
/// `|a(τ)| ≤ C (1 + ‖τ‖)^ν`.
#[derive(Clone)]
pub struct TabulatedSymbol<T> {
    pub name: String,
    pub growth_c: f64,
    pub growth_nu: f64,
    func: Arc<SymbolFn<T>>,
    violations: Arc<AtomicU64>,
}

impl<T: Real> TabulatedSymbol<T> {
    pub fn new(
        name: impl Into<String>,
        growth_c: f64,
        growth_nu: f64,
        func: impl Fn(&[i64]) -> Complex<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            growth_c,
            growth_nu,
            func: Arc::new(func),
            violations: Arc::new(AtomicU64::new(0)),
        }
    }

    /// Small divisors planted on the sparse set `τ = (s·k, 0, …, 0)`, `k ≥ 1`:
    /// `a(τ) = exp(−rate·w(τ, 0))` there and `a(τ) = τ_1 + offset` elsewhere.
    pub fn planted(params: &SpaceParams, rate: f64, stride: i64, offset: f64) -> Self {
        let params = params.clone();
        let stride = stride.max(1);
        let c = 1.0 + offset.abs();
        Self::new(format!("planted(rate={rate},stride={stride},offset={offset})"), c, 1.0, move |tau: &[i64]| {
            let first = tau[0];
            let rest_zero = tau[1..].iter().all(|&t| t == 0);
            if rest_zero && first >= stride && first % stride == 0 {
                let w = weight::<f64>(&params, &ModeIndex::new(tau.to_vec(), 0));
                Complex::new(T::of((-rate * w).exp()), T::zero())
            } else {
                Complex::new(T::of(first as f64 + offset), T::zero())
            }
        })
    }

    pub fn eval(&self, tau: &[i64]) -> Complex<T> {
        let v = (self.func)(tau);
        let norm = tau.iter().map(|&t| (t as f64) * (t as f64)).sum::<f64>().sqrt();
        let bound = self.growth_c * (1.0 + norm).powf(self.growth_nu);
        if v.norm().to_f64_lossy() > bound * (1.0 + 1e-12) {
            self.violations.fetch_add(1, Ordering::Relaxed);
        }
        v
    }

    /// Number of evaluations that exceeded the declared growth bound.
    pub fn growth_violations(&self) -> u64 {
        self.violations.load(Ordering::Relaxed)
    }
}

impl<T> fmt::Debug for TabulatedSymbol<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabulatedSymbol")
            .field("name", &self.name)
            .field("growth_c", &self.growth_c)
            .field("growth_nu", &self.growth_nu)
            .finish()
    }
}

/// `Q_r(τ)`: a polynomial in `τ`, or an opaque moderate-growth symbol.
#[derive(Clone, Debug)]
pub enum TimeSymbol<T> {
    Polynomial(Vec<Monomial<T>>),
    Tabulated(TabulatedSymbol<T>),
}

impl<T: Real> TimeSymbol<T> {
    /// `D_{t_axis}` on an `m`-torus.
    pub fn derivative(m: usize, axis: usize) -> Self {
        let mut alpha = vec![0; m];
        alpha[axis] = 1;
        TimeSymbol::Polynomial(vec![Monomial { alpha, coeff: Coefficient::from_int(1) }])
    }

    /// `c_0 + Σ_i c_i D_{t_i}`.
    pub fn affine(constant: Coefficient<T>, linear: Vec<Coefficient<T>>) -> Self {
        let m = linear.len();
        let mut terms = Vec::new();
        if !constant.is_zero() {
            terms.push(Monomial { alpha: vec![0; m], coeff: constant });
        }
        for (i, c) in linear.into_iter().enumerate() {
            if !c.is_zero() {
                let mut alpha = vec![0; m];
                alpha[i] = 1;
                terms.push(Monomial { alpha, coeff: c });
            }
        }
        TimeSymbol::Polynomial(terms)
    }

    pub fn eval(&self, tau: &[i64]) -> Complex<T> {
        match self {
            TimeSymbol::Polynomial(terms) => terms.iter().fold(Complex::new(T::zero(), T::zero()), |acc, t| {
                let mono = t.alpha.iter().zip(tau).fold(T::one(), |p, (&a, &x)| p * T::of_i64(x).powi(a as i32));
                acc + t.coeff.value * mono
            }),
            TimeSymbol::Tabulated(s) => s.eval(tau),
        }
    }

    /// Sum of term moduli; the natural scale for cancellation checks.
    fn magnitude(&self, tau: &[i64], value: Complex<T>) -> T {
        match self {
            TimeSymbol::Polynomial(terms) => terms.iter().fold(T::zero(), |acc, t| {
                let mono = t.alpha.iter().zip(tau).fold(T::one(), |p, (&a, &x)| p * T::of_i64(x).powi(a as i32));
                acc + t.coeff.value.norm() * mono.abs()
            }),
            TimeSymbol::Tabulated(_) => value.norm(),
        }
    }

    pub fn eval_exact(&self, tau: &[i64]) -> Option<ExactComplex> {
        match self {
            TimeSymbol::Polynomial(terms) => {
                let mut acc = ExactComplex::zero();
                for t in terms {
                    let c = t.coeff.exact.as_ref()?;
                    let mono = t.alpha.iter().zip(tau).fold(BigRational::from_integer(1.into()), |p, (&a, &x)| {
                        p * Pow::pow(BigRational::from_integer(x.into()), a)
                    });
                    acc = acc.add(&c.scale(&mono));
                }
                Some(acc)
            }
            TimeSymbol::Tabulated(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        match self {
            TimeSymbol::Polynomial(terms) => terms.iter().all(|t| t.coeff.is_exact()),
            TimeSymbol::Tabulated(_) => false,
        }
    }

    /// Degree `k_r` of a polynomial symbol.
    pub fn degree(&self) -> Option<u32> {
        match self {
            TimeSymbol::Polynomial(terms) => Some(terms.iter().map(|t| t.alpha.iter().sum::<u32>()).max().unwrap_or(0)),
            TimeSymbol::Tabulated(_) => None,
        }
    }

    /// `(c_0, [c_1..c_m])` when the symbol is affine in `τ`.
    pub fn as_affine(&self, m: usize) -> Option<(Coefficient<T>, Vec<Coefficient<T>>)> {
        let TimeSymbol::Polynomial(terms) = self else { return None };
        let mut constant = Coefficient::zero();
        let mut linear = vec![Coefficient::zero(); m];
        for t in terms {
            match t.alpha.iter().sum::<u32>() {
                0 => constant = add_coeff(&constant, &t.coeff),
                1 => {
                    let i = t.alpha.iter().position(|&a| a == 1)?;
                    linear[i] = add_coeff(&linear[i], &t.coeff);
                }
                _ => return None,
            }
        }
        Some((constant, linear))
    }
}

fn add_coeff<T: Real>(a: &Coefficient<T>, b: &Coefficient<T>) -> Coefficient<T> {
    Coefficient {
        value: a.value + b.value,
        exact: match (&a.exact, &b.exact) {
            (Some(x), Some(y)) => Some(x.add(y)),
            _ => None,
        },
    }
}

/// `L_r = Q_r(D_t) + d_r P`.
#[derive(Clone, Debug)]
pub struct OperatorSpec<T> {
    pub q: TimeSymbol<T>,
    pub d: Coefficient<T>,
}

impl<T: Real> OperatorSpec<T> {
    pub fn new(q: TimeSymbol<T>, d: Coefficient<T>) -> Self {
        Self { q, d }
    }

    pub fn is_exact(&self) -> bool {
        self.q.is_exact() && self.d.is_exact()
    }

    /// Multiplies every coefficient by `s`.
    pub fn scaled(&self, s: &Coefficient<T>) -> Self {
        let q = match &self.q {
            TimeSymbol::Polynomial(terms) => TimeSymbol::Polynomial(
                terms.iter().map(|t| Monomial { alpha: t.alpha.clone(), coeff: t.coeff.scaled(s) }).collect(),
            ),
            TimeSymbol::Tabulated(tab) => {
                let inner = tab.clone();
                let sv = s.value;
                TimeSymbol::Tabulated(TabulatedSymbol::new(
                    format!("{}*scaled", tab.name),
                    tab.growth_c * sv.norm().to_f64_lossy(),
                    tab.growth_nu,
                    move |tau: &[i64]| inner.eval(tau) * sv,
                ))
            }
        };
        Self { q, d: self.d.scaled(s) }
    }
}

/// How a symbol value was decided to vanish.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ZeroStatus {
    NonZero,
    /// Zero in exact rational arithmetic.
    ExactZero,
    /// Modulus below [`FLOAT_ZERO`] with no exact value available.
    FloatZero,
}

impl ZeroStatus {
    pub fn is_zero(self) -> bool {
        self != ZeroStatus::NonZero
    }
}

/// One operator's symbol at one mode, with its zero decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolValue<T> {
    pub value: Complex<T>,
    pub zero: ZeroStatus,
}

/// The system at one mode: `‖σ_𝕃‖`, its smallest argmax `r*`, and whether
/// every operator vanishes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemValue<T> {
    pub norm: T,
    pub r_star: usize,
    pub zero: ZeroStatus,
}

/// `𝕃 = (L_1, …, L_ℓ)` with a shared spatial spectrum and analytic frame.
#[derive(Clone, Debug)]
pub struct SystemSpec<T> {
    pub ops: Vec<OperatorSpec<T>>,
    pub eigen: EigenProvider,
    pub params: SpaceParams,
}

impl<T: Real> SystemSpec<T> {
    pub fn new(ops: Vec<OperatorSpec<T>>, eigen: EigenProvider, params: SpaceParams) -> Result<Self> {
        params.validate()?;
        if ops.is_empty() {
            return Err(Error::InvalidParams("a system needs at least one operator".into()));
        }
        if eigen.n() != params.n {
            return Err(Error::InvalidParams(format!(
                "eigen provider dimension {} differs from n = {}",
                eigen.n(),
                params.n
            )));
        }
        if eigen.big_m() != params.big_m {
            return Err(Error::InvalidParams(format!(
                "eigen provider order {} differs from M = {}",
                eigen.big_m(),
                params.big_m
            )));
        }
        for (r, op) in ops.iter().enumerate() {
            if let TimeSymbol::Polynomial(terms) = &op.q {
                if let Some(t) = terms.iter().find(|t| t.alpha.len() != params.m) {
                    return Err(Error::Shape(format!(
                        "operator {r}: multi-index {:?} has length {}, expected m = {}",
                        t.alpha,
                        t.alpha.len(),
                        params.m
                    )));
                }
            }
        }
        Ok(Self { ops, eigen, params })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// True when every coefficient and eigenvalue is an exact rational.
    pub fn is_exact(&self) -> bool {
        self.eigen.is_exact() && self.ops.iter().all(OperatorSpec::is_exact)
    }

    /// `σ_{L_r}(τ, j)` in floating point (0-based `r`).
    pub fn symbol(&self, r: usize, mode: &ModeIndex) -> Result<Complex<T>> {
        let op = &self.ops[r];
        let lambda: T = self.eigen.eigenvalue(mode.j)?;
        Ok(op.q.eval(&mode.tau) + op.d.value * lambda)
    }

    /// `σ_{L_r}(τ, j)` exactly, when all of its data is rational.
    pub fn symbol_exact(&self, r: usize, mode: &ModeIndex) -> Result<Option<ExactComplex>> {
        let op = &self.ops[r];
        let (Some(q), Some(d)) = (op.q.eval_exact(&mode.tau), op.d.exact.as_ref()) else {
            return Ok(None);
        };
        let Some(lambda) = self.eigen.eigenvalue_exact(mode.j)? else { return Ok(None) };
        Ok(Some(q.add(&d.scale(&lambda))))
    }

    /// `λ_j` in floating point, with its exact value when the provider has one.
    pub fn lambda(&self, j: u64) -> Result<Lambda<T>> {
        Ok(Lambda { value: self.eigen.eigenvalue(j)?, exact: self.eigen.eigenvalue_exact(j)? })
    }

    /// `λ_0, …, λ_{count−1}`.
    pub fn lambdas(&self, count: u64) -> Result<Vec<Lambda<T>>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let values = self.eigen.eigenvalues(0, count - 1)?;
        let exact = self.eigen.is_exact();
        values
            .into_iter()
            .enumerate()
            .map(|(j, v)| {
                let ex = if exact { self.eigen.eigenvalue_exact(j as u64)? } else { None };
                Ok(Lambda { value: T::of(v), exact: ex })
            })
            .collect()
    }

    /// Symbol value with the exact-zero rule applied.
    pub fn symbol_value(&self, r: usize, mode: &ModeIndex) -> Result<SymbolValue<T>> {
        let lam = self.lambda(mode.j)?;
        Ok(self.symbol_value_at(r, &mode.tau, &lam))
    }

    pub(crate) fn symbol_value_at(&self, r: usize, tau: &[i64], lam: &Lambda<T>) -> SymbolValue<T> {
        let op = &self.ops[r];
        let dl = op.d.value * lam.value;
        let value = op.q.eval(tau) + dl;
        let scale = op.q.magnitude(tau, value) + dl.norm();
        let modulus = value.norm();
        if modulus <= T::of(EXACT_RECHECK) * scale {
            if let (Some(q), Some(d), Some(l)) = (op.q.eval_exact(tau), op.d.exact.as_ref(), lam.exact.as_ref()) {
                let ex = q.add(&d.scale(l));
                if ex.is_zero() {
                    return SymbolValue { value: Complex::new(T::zero(), T::zero()), zero: ZeroStatus::ExactZero };
                }
                return SymbolValue { value: ex.to_complex(), zero: ZeroStatus::NonZero };
            }
        }
        let zero = if modulus.to_f64_lossy() < FLOAT_ZERO { ZeroStatus::FloatZero } else { ZeroStatus::NonZero };
        SymbolValue { value, zero }
    }

    /// `max_r |σ_{L_r}|`, the smallest index attaining it, and the joint zero
    /// decision.
    pub fn system_value(&self, mode: &ModeIndex) -> Result<SystemValue<T>> {
        let lam = self.lambda(mode.j)?;
        Ok(self.system_value_at(&mode.tau, &lam))
    }

    pub(crate) fn system_value_at(&self, tau: &[i64], lam: &Lambda<T>) -> SystemValue<T> {
        let mut best = T::neg_infinity();
        let mut r_star = 0;
        let mut all_zero = true;
        let mut any_float = false;
        for r in 0..self.ops.len() {
            let v = self.symbol_value_at(r, tau, lam);
            let modulus = v.value.norm();
            if modulus > best {
                best = modulus;
                r_star = r;
            }
            match v.zero {
                ZeroStatus::NonZero => all_zero = false,
                ZeroStatus::FloatZero => any_float = true,
                ZeroStatus::ExactZero => {}
            }
        }
        let zero = match (all_zero, any_float) {
            (false, _) => ZeroStatus::NonZero,
            (true, true) => ZeroStatus::FloatZero,
            (true, false) => ZeroStatus::ExactZero,
        };
        if zero.is_zero() {
            best = T::zero();
        }
        SystemValue { norm: best, r_star, zero }
    }

    /// `(‖σ_𝕃(τ,j)‖, r*)` with ties broken towards the smallest index.
    pub fn system_norm_argmax(&self, mode: &ModeIndex) -> Result<(T, usize)> {
        let v = self.system_value(mode)?;
        Ok((v.norm, v.r_star))
    }

    /// Exact `max_r |σ_{L_r}|²`, when available.
    pub fn system_norm_sqr_exact(&self, mode: &ModeIndex) -> Result<Option<BigRational>> {
        let mut best: Option<BigRational> = None;
        for r in 0..self.ops.len() {
            let Some(v) = self.symbol_exact(r, mode)? else { return Ok(None) };
            let n2 = v.norm_sqr();
            best = Some(match best {
                Some(b) if b >= n2 => b,
                _ => n2,
            });
        }
        Ok(best)
    }

    /// Affine decomposition of every operator, when all symbols are affine.
    pub fn affine_forms(&self) -> Option<Vec<AffineForm<T>>> {
        self.ops
            .iter()
            .map(|op| {
                op.q.as_affine(self.params.m).map(|(constant, linear)| AffineForm { constant, linear, d: op.d.clone() })
            })
            .collect()
    }

    /// Tabulated-symbol growth violations seen so far.
    pub fn growth_violations(&self) -> u64 {
        self.ops
            .iter()
            .map(|op| match &op.q {
                TimeSymbol::Tabulated(t) => t.growth_violations(),
                _ => 0,
            })
            .sum()
    }

    /// Same system with the operators reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { ops: perm.iter().map(|&i| self.ops[i].clone()).collect(), eigen: self.eigen.clone(), params: self.params.clone() }
    }
}

/// `λ_j` as float plus its exact value, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct Lambda<T> {
    pub value: T,
    pub exact: Option<BigRational>,
}

/// `σ_r(τ, j) = c_0 + Σ_i c_i τ_i + d λ_j`.
#[derive(Clone, Debug)]
pub struct AffineForm<T> {
    pub constant: Coefficient<T>,
    pub linear: Vec<Coefficient<T>>,
    pub d: Coefficient<T>,
}

impl<T: Real> AffineForm<T> {
    /// Axes with a nonzero coefficient.
    pub fn support(&self) -> Vec<usize> {
        self.linear.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, _)| i).collect()
    }

    pub fn is_exact(&self) -> bool {
        self.constant.is_exact() && self.d.is_exact() && self.linear.iter().all(Coefficient::is_exact)
    }
}

/// `𝒩 ∩ grid`: every mode where all operators vanish under the exact-zero
/// rule, in ascending mode order.
pub fn zero_set<T: Real>(spec: &SystemSpec<T>, bounds: &crate::spectral::Bounds) -> Result<Vec<ModeIndex>> {
    Ok(crate::sweep::zero_set_detailed(spec, bounds)?.modes)
}

/// [`zero_set`] plus whether any member rests on a floating-point zero
/// with no exact confirmation.
pub fn zero_set_flagged<T: Real>(spec: &SystemSpec<T>, bounds: &crate::spectral::Bounds) -> Result<(Vec<ModeIndex>, bool)> {
    let r = crate::sweep::zero_set_detailed(spec, bounds)?;
    Ok((r.modes, r.float_zeros))
}
