//! Grid sweeps behind the zero set, the Diophantine profile and the certified
//! lower bounds.
//!
//! Small grids are enumerated mode by mode in parallel. Grids too large for
//! that are handled when the system is separable (each operator reads at most
//! one time axis and no two operators share one): for fixed `j` every `|σ_r|²`
//! is then a convex quadratic in a single integer variable, so its exact
//! minimum over the box sits next to the real minimiser.

use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{rational_to_f64, ExactComplex};
use crate::scalar::Real;
use crate::spectral::{weight, Bounds, ModeIndex, ShellPartition};
use crate::symbols::{AffineForm, Lambda, SystemSpec, ZeroStatus, FLOAT_ZERO};

/// Largest grid enumerated mode by mode.
pub(crate) const DENSE_LIMIT: u128 = 8_000_000;

/// Number of worst modes kept.
pub(crate) const WORST_KEEP: usize = 10;

/// Largest zero set materialised by the separable path.
const ZERO_LIST_LIMIT: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Worst {
    pub ratio: f64,
    pub norm: f64,
    pub mode: ModeIndex,
}

fn worst_order(a: &Worst, b: &Worst) -> std::cmp::Ordering {
    b.ratio.total_cmp(&a.ratio).then_with(|| a.mode.cmp(&b.mode))
}

fn push_worst(list: &mut Vec<Worst>, w: Worst) {
    list.push(w);
    if list.len() > 4 * WORST_KEEP {
        list.sort_by(worst_order);
        list.truncate(WORST_KEEP);
    }
}

fn finish_worst(mut list: Vec<Worst>) -> Vec<Worst> {
    list.sort_by(worst_order);
    list.truncate(WORST_KEEP);
    list
}

/// Per-shell statistics: `upper` bounds εhat from above, `witness` is attained
/// by an actual mode. The two coincide for dense sweeps.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ShellStat {
    pub lower: f64,
    pub upper: f64,
    pub eps_upper: f64,
    pub eps_witness: f64,
    pub witness: Option<ModeIndex>,
    pub nonzero_modes: u128,
}

#[derive(Clone, Debug)]
pub(crate) struct LowerBound {
    pub value: f64,
    pub exact: Option<BigRational>,
    pub mode: Option<ModeIndex>,
}

#[derive(Clone, Debug)]
pub(crate) struct SweepResult {
    pub shells: Vec<ShellStat>,
    pub worst: Vec<Worst>,
    pub zero_count: u128,
    pub zero_sample: Vec<ModeIndex>,
    pub float_zeros: bool,
    pub nonzero_count: u128,
    pub lower_bound: Option<LowerBound>,
    pub separable: bool,
    pub exact_zeros: bool,
}

#[derive(Clone)]
struct DenseAcc {
    best: Vec<(f64, Option<ModeIndex>, u128)>,
    worst: Vec<Worst>,
    zeros: Vec<ModeIndex>,
    float_zeros: bool,
    min_norm: Option<(f64, ModeIndex)>,
}

impl DenseAcc {
    fn new(shells: usize) -> Self {
        Self { best: vec![(f64::NEG_INFINITY, None, 0); shells], worst: Vec::new(), zeros: Vec::new(), float_zeros: false, min_norm: None }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.best.iter_mut().zip(other.best) {
            a.2 += b.2;
            let take = match (&a.1, &b.1) {
                (_, None) => false,
                (None, Some(_)) => true,
                (Some(ma), Some(mb)) => b.0 > a.0 || (b.0 == a.0 && mb < ma),
            };
            if take {
                a.0 = b.0;
                a.1 = b.1;
            }
        }
        for w in other.worst {
            push_worst(&mut self.worst, w);
        }
        self.zeros.extend(other.zeros);
        self.float_zeros |= other.float_zeros;
        self.min_norm = match (self.min_norm, other.min_norm) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => Some(if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
        };
        self
    }
}

pub(crate) struct ZeroSetReport {
    pub modes: Vec<ModeIndex>,
    pub float_zeros: bool,
}

pub(crate) fn zero_set_detailed<T: Real>(spec: &SystemSpec<T>, bounds: &Bounds) -> Result<ZeroSetReport> {
    check_bounds(spec, bounds)?;
    if bounds.is_empty() {
        return Ok(ZeroSetReport { modes: Vec::new(), float_zeros: false });
    }
    if bounds.len() <= DENSE_LIMIT {
        let lams = spec.lambdas(bounds.j_count())?;
        let taus: Vec<Vec<i64>> = bounds.taus().collect();
        let (mut modes, float_zeros) = taus
            .par_iter()
            .map(|tau| {
                let mut out = Vec::new();
                let mut fz = false;
                for (j, lam) in lams.iter().enumerate() {
                    let v = spec.system_value_at(tau, lam);
                    if v.zero.is_zero() {
                        fz |= v.zero == ZeroStatus::FloatZero;
                        out.push(ModeIndex::new(tau.clone(), j as u64));
                    }
                }
                (out, fz)
            })
            .reduce(|| (Vec::new(), false), |mut a, b| {
                a.0.extend(b.0);
                (a.0, a.1 | b.1)
            });
        modes.sort();
        return Ok(ZeroSetReport { modes, float_zeros });
    }
    let Some(sep) = Separable::analyse(spec, bounds)? else {
        return Err(too_large(bounds));
    };
    if sep.zero_count > ZERO_LIST_LIMIT {
        return Err(Error::GridTooLarge(format!("zero set has {} modes on this grid", sep.zero_count)));
    }
    let mut modes = Vec::new();
    for (j, pj) in sep.per_j.iter().enumerate() {
        if let Some(fixed) = &pj.zero_tau {
            expand_free(bounds, &sep.free_axes, fixed, j as u64, &mut modes);
        }
    }
    modes.sort();
    Ok(ZeroSetReport { modes, float_zeros: sep.float_zeros })
}

fn expand_free(bounds: &Bounds, free: &[usize], fixed: &[i64], j: u64, out: &mut Vec<ModeIndex>) {
    let mut tau = fixed.to_vec();
    fn rec(bounds: &Bounds, free: &[usize], k: usize, tau: &mut Vec<i64>, j: u64, out: &mut Vec<ModeIndex>) {
        if k == free.len() {
            out.push(ModeIndex::new(tau.clone(), j));
            return;
        }
        let axis = free[k];
        let t = bounds.tau_max()[axis];
        for v in -t..=t {
            tau[axis] = v;
            rec(bounds, free, k + 1, tau, j, out);
        }
    }
    rec(bounds, free, 0, &mut tau, j, out);
}

fn check_bounds<T: Real>(spec: &SystemSpec<T>, bounds: &Bounds) -> Result<()> {
    if bounds.m() != spec.params.m {
        return Err(Error::Shape(format!("bounds have {} time axes, system has m = {}", bounds.m(), spec.params.m)));
    }
    if let Some(len) = spec.eigen.len() {
        if bounds.j_count() > len {
            return Err(Error::OutOfRange { index: bounds.j_count().saturating_sub(1), len });
        }
    }
    Ok(())
}

fn too_large(bounds: &Bounds) -> Error {
    Error::GridTooLarge(format!(
        "{} modes exceed the dense limit of {DENSE_LIMIT} and the system is not separable",
        bounds.len()
    ))
}

/// Full sweep used by the Diophantine profile.
pub(crate) fn sweep<T: Real>(spec: &SystemSpec<T>, bounds: &Bounds, shell_count: usize) -> Result<SweepResult> {
    check_bounds(spec, bounds)?;
    let partition = ShellPartition::for_bounds(&spec.params, bounds, shell_count)
        .ok_or_else(|| Error::InvalidParams("empty grid".into()))?;
    let separable = Separable::analyse(spec, bounds)?;
    if bounds.len() <= DENSE_LIMIT {
        let mut res = dense(spec, bounds, &partition)?;
        if let Some(sep) = &separable {
            res.lower_bound = Some(sep.lower_bound());
            res.exact_zeros = sep.exact;
        }
        return Ok(res);
    }
    match separable {
        Some(sep) => Ok(sep.into_sweep(spec, bounds, &partition)),
        None => Err(too_large(bounds)),
    }
}

fn dense<T: Real>(spec: &SystemSpec<T>, bounds: &Bounds, partition: &ShellPartition) -> Result<SweepResult> {
    let lams = spec.lambdas(bounds.j_count())?;
    let taus: Vec<Vec<i64>> = bounds.taus().collect();
    let shells = partition.len();
    let acc = taus
        .par_iter()
        .fold(
            || DenseAcc::new(shells),
            |mut acc, tau| {
                for (j, lam) in lams.iter().enumerate() {
                    let mode = ModeIndex::new(tau.clone(), j as u64);
                    let v = spec.system_value_at(tau, lam);
                    if v.zero.is_zero() {
                        acc.float_zeros |= v.zero == ZeroStatus::FloatZero;
                        acc.zeros.push(mode);
                        continue;
                    }
                    let w: f64 = weight(&spec.params, &mode);
                    let norm = v.norm.to_f64_lossy();
                    let ratio = -norm.ln() / w;
                    let k = partition.index_of(w);
                    let slot = &mut acc.best[k];
                    slot.2 += 1;
                    let clamped = ratio.max(0.0);
                    let take = match &slot.1 {
                        None => true,
                        Some(prev) => clamped > slot.0 || (clamped == slot.0 && mode < *prev),
                    };
                    if take {
                        slot.0 = clamped;
                        slot.1 = Some(mode.clone());
                    }
                    let better = match &acc.min_norm {
                        None => true,
                        Some((n, m)) => norm < *n || (norm == *n && mode < *m),
                    };
                    if better {
                        acc.min_norm = Some((norm, mode.clone()));
                    }
                    push_worst(&mut acc.worst, Worst { ratio, norm, mode });
                }
                acc
            },
        )
        .reduce(|| DenseAcc::new(shells), DenseAcc::merge);
    let mut zeros = acc.zeros;
    zeros.sort();
    let nonzero_count: u128 = acc.best.iter().map(|b| b.2).sum();
    let shells = acc
        .best
        .into_iter()
        .enumerate()
        .map(|(k, (eps, mode, count))| ShellStat {
            lower: partition.lower(k),
            upper: partition.upper(k),
            eps_upper: if count > 0 { eps } else { 0.0 },
            eps_witness: if count > 0 { eps } else { 0.0 },
            witness: mode,
            nonzero_modes: count,
        })
        .collect();
    let lower_bound = acc.min_norm.map(|(value, mode)| LowerBound { value, exact: None, mode: Some(mode) });
    let all_exact = spec.is_exact();
    Ok(SweepResult {
        shells,
        worst: finish_worst(acc.worst),
        zero_count: zeros.len() as u128,
        zero_sample: zeros,
        float_zeros: acc.float_zeros,
        nonzero_count,
        lower_bound,
        separable: false,
        exact_zeros: all_exact,
    })
}

/// A candidate `|σ_r|²` value at one integer abscissa.
#[derive(Clone, Debug)]
struct Cand {
    tau: Option<i64>,
    sq: f64,
    exact: Option<BigRational>,
    zero: bool,
}

impl Cand {
    fn lt(&self, other: &Cand) -> bool {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => a < b,
            _ => self.sq < other.sq,
        }
    }
}

#[derive(Clone, Debug)]
struct PerJ {
    /// Off-zero minimum of `‖σ_𝕃‖²` over the τ-box at this `j`.
    min_sq: Option<Cand>,
    witness: Option<ModeIndex>,
    /// Fixed coordinates of the zero set at this `j` (free axes left at 0).
    zero_tau: Option<Vec<i64>>,
    /// Per-operator minimum of `|σ_r|²` over the τ-box.
    op_min: Vec<Cand>,
}

struct Separable {
    per_j: Vec<PerJ>,
    free_axes: Vec<usize>,
    zero_count: u128,
    float_zeros: bool,
    exact: bool,
}

fn cmplx_sq<T: Real>(z: Complex<T>) -> f64 {
    let re = z.re.to_f64_lossy();
    let im = z.im.to_f64_lossy();
    re * re + im * im
}

impl Separable {
    fn analyse<T: Real>(spec: &SystemSpec<T>, bounds: &Bounds) -> Result<Option<Self>> {
        let Some(forms) = spec.affine_forms() else { return Ok(None) };
        let mut axes: Vec<Option<usize>> = Vec::with_capacity(forms.len());
        let mut used = vec![false; spec.params.m];
        for f in &forms {
            let s = f.support();
            match s.as_slice() {
                [] => axes.push(None),
                [a] => {
                    if used[*a] {
                        return Ok(None);
                    }
                    used[*a] = true;
                    axes.push(Some(*a));
                }
                _ => return Ok(None),
            }
        }
        if forms.len() > 6 {
            return Ok(None);
        }
        let free_axes: Vec<usize> = (0..spec.params.m).filter(|a| !used[*a]).collect();
        let free_count: u128 = free_axes.iter().map(|&a| 2 * bounds.tau_max()[a] as u128 + 1).product();
        let lams = spec.lambdas(bounds.j_count())?;
        let exact = spec.eigen.is_exact() && forms.iter().all(AffineForm::is_exact);
        let per_j: Vec<PerJ> = lams
            .par_iter()
            .enumerate()
            .map(|(j, lam)| per_j(spec, bounds, &forms, &axes, j as u64, lam))
            .collect();
        let zero_count = per_j.iter().filter(|p| p.zero_tau.is_some()).count() as u128 * free_count;
        let float_zeros = per_j.iter().any(|p| p.op_min.iter().any(|c| c.zero && c.exact.is_none()));
        Ok(Some(Self { per_j, free_axes, zero_count, float_zeros, exact }))
    }

    /// `max( max_{r zero-free} min|σ_r|, min_j off-zero min ‖σ_𝕃‖ )`.
    fn lower_bound(&self) -> LowerBound {
        let mut best: Option<(Cand, Option<ModeIndex>)> = None;
        let consider = |best: &mut Option<(Cand, Option<ModeIndex>)>, c: Cand, m: Option<ModeIndex>| {
            let replace = match best {
                None => true,
                Some((b, _)) => {
                    if b.lt(&c) {
                        true
                    } else if !c.lt(b) {
                        c.exact.is_some() && b.exact.is_none()
                    } else {
                        false
                    }
                }
            };
            if replace {
                *best = Some((c, m));
            }
        };
        // global off-zero minimum over the grid
        let mut global: Option<(Cand, Option<ModeIndex>)> = None;
        for p in &self.per_j {
            if let Some(c) = &p.min_sq {
                let take = match &global {
                    None => true,
                    Some((g, _)) => c.lt(g),
                };
                if take {
                    global = Some((c.clone(), p.witness.clone()));
                }
            }
        }
        let all_exact = self.per_j.iter().all(|p| p.min_sq.as_ref().is_none_or(|c| c.exact.is_some()));
        if let Some((mut c, m)) = global {
            if !all_exact {
                c.exact = None;
            }
            consider(&mut best, c, m);
        }
        let ops = self.per_j.first().map_or(0, |p| p.op_min.len());
        for r in 0..ops {
            if self.per_j.iter().any(|p| p.op_min[r].zero) {
                continue;
            }
            let mut op_best: Option<Cand> = None;
            for p in &self.per_j {
                let c = &p.op_min[r];
                if op_best.as_ref().is_none_or(|b| c.lt(b)) {
                    op_best = Some(c.clone());
                }
            }
            let op_exact = self.per_j.iter().all(|p| p.op_min[r].exact.is_some());
            if let Some(mut c) = op_best {
                if !op_exact {
                    c.exact = None;
                }
                consider(&mut best, c, None);
            }
        }
        match best {
            Some((c, mode)) => LowerBound { value: c.sq.sqrt(), exact: c.exact, mode },
            None => LowerBound { value: 0.0, exact: None, mode: None },
        }
    }

    fn into_sweep<T: Real>(self, spec: &SystemSpec<T>, bounds: &Bounds, partition: &ShellPartition) -> SweepResult {
        let corner = bounds.outer_corner().expect("nonempty grid");
        let corner_norm = corner.tau_norm();
        let k_count = partition.len();
        let mut shells: Vec<ShellStat> = (0..k_count)
            .map(|k| ShellStat {
                lower: partition.lower(k),
                upper: partition.upper(k),
                eps_upper: 0.0,
                eps_witness: 0.0,
                witness: None,
                nonzero_modes: 0,
            })
            .collect();
        let mut worst = Vec::new();
        let params = &spec.params;
        let inv_sigma = 1.0 / params.sigma;
        let tau_part_max = corner_norm.powf(inv_sigma);
        for (j, p) in self.per_j.iter().enumerate() {
            let Some(c) = &p.min_sq else { continue };
            let w_lo = weight::<f64>(params, &ModeIndex::new(vec![0; params.m], j as u64));
            let w_hi = w_lo + tau_part_max;
            let neg_log = -0.5 * c.sq.ln();
            let lift = neg_log.max(0.0);
            let first = partition.index_of(w_lo);
            let last = partition.index_of(w_hi);
            for shell in shells.iter_mut().take(last + 1).skip(first) {
                let denom = shell.lower.max(w_lo);
                shell.eps_upper = shell.eps_upper.max(lift / denom);
                // occupancy marker only; exact counts are not tracked here
                shell.nonzero_modes = shell.nonzero_modes.max(1);
            }
            if let Some(m) = &p.witness {
                let w: f64 = weight(params, m);
                let ratio = neg_log / w;
                let k = partition.index_of(w);
                let s = &mut shells[k];
                let clamped = ratio.max(0.0);
                let take = match &s.witness {
                    None => true,
                    Some(prev) => clamped > s.eps_witness || (clamped == s.eps_witness && m < prev),
                };
                if take {
                    s.eps_witness = clamped;
                    s.witness = Some(m.clone());
                }
                push_worst(&mut worst, Worst { ratio, norm: c.sq.sqrt(), mode: m.clone() });
            }
        }
        let mut zero_sample = Vec::new();
        for (j, p) in self.per_j.iter().enumerate() {
            if zero_sample.len() >= 100 {
                break;
            }
            if let Some(t) = &p.zero_tau {
                zero_sample.push(ModeIndex::new(t.clone(), j as u64));
            }
        }
        let nonzero_count = bounds.len() - self.zero_count;
        let lower_bound = Some(self.lower_bound());
        SweepResult {
            shells,
            worst: finish_worst(worst),
            zero_count: self.zero_count,
            zero_sample,
            float_zeros: self.float_zeros,
            nonzero_count,
            lower_bound,
            separable: true,
            exact_zeros: self.exact,
        }
    }
}

fn per_j<T: Real>(
    spec: &SystemSpec<T>,
    bounds: &Bounds,
    forms: &[AffineForm<T>],
    axes: &[Option<usize>],
    j: u64,
    lam: &Lambda<T>,
) -> PerJ {
    let m = spec.params.m;
    let cands: Vec<Vec<Cand>> = forms
        .iter()
        .zip(axes)
        .map(|(f, axis)| op_candidates(f, *axis, bounds, lam))
        .collect();
    let op_min: Vec<Cand> = cands
        .iter()
        .map(|cs| cs.iter().fold(None::<&Cand>, |b, c| if b.is_none_or(|b| c.lt(b)) { Some(c) } else { b }).unwrap().clone())
        .collect();
    let zero_tau = if cands.iter().all(|cs| cs.iter().any(|c| c.zero)) {
        let mut tau = vec![0i64; m];
        for (cs, axis) in cands.iter().zip(axes) {
            if let Some(a) = axis {
                tau[*a] = cs.iter().find(|c| c.zero).and_then(|c| c.tau).unwrap_or(0);
            }
        }
        Some(tau)
    } else {
        None
    };
    // off-zero minimum of max_r over the candidate product
    let mut best: Option<(Cand, ModeIndex)> = None;
    let mut idx = vec![0usize; cands.len()];
    loop {
        let mut tau = vec![0i64; m];
        let mut all_zero = true;
        let mut top: Option<&Cand> = None;
        for (r, &i) in idx.iter().enumerate() {
            let c = &cands[r][i];
            if let (Some(a), Some(t)) = (axes[r], c.tau) {
                tau[a] = t;
            }
            all_zero &= c.zero;
            if top.is_none_or(|t| t.lt(c)) {
                top = Some(c);
            }
        }
        if !all_zero {
            let top = top.unwrap();
            let exact_all = idx.iter().enumerate().all(|(r, &i)| cands[r][i].exact.is_some());
            let mut v = top.clone();
            if !exact_all {
                v.exact = None;
            }
            let mode = ModeIndex::new(tau, j);
            let take = match &best {
                None => true,
                Some((b, bm)) => v.lt(b) || (!b.lt(&v) && mode < *bm),
            };
            if take {
                best = Some((v, mode));
            }
        }
        let mut r = 0;
        loop {
            if r == idx.len() {
                return PerJ {
                    witness: best.as_ref().map(|b| b.1.clone()),
                    min_sq: best.map(|b| b.0),
                    zero_tau,
                    op_min,
                };
            }
            idx[r] += 1;
            if idx[r] < cands[r].len() {
                break;
            }
            idx[r] = 0;
            r += 1;
        }
    }
}

/// Integer abscissae that contain the minimum and the off-zero minimum of
/// `|c τ + b|²` over `|τ| ≤ T`.
fn op_candidates<T: Real>(f: &AffineForm<T>, axis: Option<usize>, bounds: &Bounds, lam: &Lambda<T>) -> Vec<Cand> {
    let exact = match (f.constant.exact.as_ref(), f.d.exact.as_ref(), lam.exact.as_ref()) {
        (Some(c0), Some(d), Some(l)) => {
            let slope = match axis {
                Some(a) => f.linear[a].exact.clone(),
                None => Some(ExactComplex::zero()),
            };
            slope.map(|s| (s, c0.add(&d.scale(l))))
        }
        _ => None,
    };
    let slope_f = axis.map_or(Complex::new(T::zero(), T::zero()), |a| f.linear[a].value);
    let offset_f = f.constant.value + f.d.value * lam.value;
    let Some(a) = axis else {
        return vec![make_cand(None, slope_f, offset_f, exact.as_ref())];
    };
    let t_max = bounds.tau_max()[a];
    // real minimiser of |s τ + b|²
    let taus: Vec<i64> = match &exact {
        Some((s, b)) => {
            let den = s.norm_sqr();
            let num = -(&s.re * &b.re + &s.im * &b.im);
            let star = num / den;
            let fl = star.floor().to_integer();
            let lo = fl.to_i64().unwrap_or(if star.is_negative() { i64::MIN / 4 } else { i64::MAX / 4 });
            (lo - 1..=lo + 2).collect()
        }
        None => {
            let s = slope_f;
            let den = cmplx_sq(s);
            let star = -((s.re * offset_f.re + s.im * offset_f.im).to_f64_lossy()) / den;
            let lo = star.floor().clamp(-(t_max as f64) - 2.0, t_max as f64 + 2.0) as i64;
            (lo - 1..=lo + 2).collect()
        }
    };
    let mut clamped: Vec<i64> = taus.into_iter().map(|t| t.clamp(-t_max, t_max)).collect();
    clamped.sort();
    clamped.dedup();
    clamped.into_iter().map(|t| make_cand(Some(t), slope_f, offset_f, exact.as_ref())).collect()
}

fn make_cand<T: Real>(tau: Option<i64>, slope: Complex<T>, offset: Complex<T>, exact: Option<&(ExactComplex, ExactComplex)>) -> Cand {
    let t = tau.unwrap_or(0);
    match exact {
        Some((s, b)) => {
            let v = s.scale(&BigRational::from_integer(t.into())).add(b);
            let sq = v.norm_sqr();
            let zero = sq.is_zero();
            Cand { tau, sq: rational_to_f64(&sq), exact: Some(sq), zero }
        }
        None => {
            let v = slope * T::of_i64(t) + offset;
            let sq = cmplx_sq(v);
            Cand { tau, sq, exact: None, zero: sq.sqrt() < FLOAT_ZERO }
        }
    }
}
