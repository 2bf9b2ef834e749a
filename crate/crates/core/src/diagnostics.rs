//! Coefficient decay classification and grid-certified verdicts for global
//! hypoellipticity and global solvability.

use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact::format_rational;
use crate::resonance::{resonance_exact, Resonance};
use crate::scalar::Real;
use crate::spectral::{weight, Bounds, ModeIndex, ShellPartition, SpaceParams, SpectralField};
use crate::sweep::{self, SweepResult};
use crate::symbols::SystemSpec;

/// Report schema version, bumped on incompatible JSON changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Decision thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Thresholds {
    /// Slopes at or below this count as zero.
    pub delta0: f64,
    /// Shell values at or above this count as bounded away from zero.
    pub delta1: f64,
    /// Relative tolerance of the compatibility check.
    pub admissibility_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { delta0: 1e-3, delta1: 1e-2, admissibility_tol: 1e-10 }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(self.delta0) && ok(self.delta1) && ok(self.admissibility_tol) {
            Ok(())
        } else {
            Err(Error::InvalidParams("thresholds must be finite and positive".into()))
        }
    }
}

fn pairs<S: Serializer>(points: &[(f64, f64)], s: S) -> std::result::Result<S::Ok, S::Error> {
    let v: Vec<[f64; 2]> = points.iter().map(|&(a, b)| [a, b]).collect();
    v.serialize(s)
}

/// Points `(weight, −log|a|)` with the fitted lower envelope.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DecayProfile {
    #[serde(serialize_with = "pairs")]
    pub points: Vec<(f64, f64)>,
    pub envelope_slope: f64,
    pub envelope_intercept: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayLabel {
    Smooth,
    Ultradistribution,
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassificationVerdict {
    pub label: DecayLabel,
    pub profile: DecayProfile,
    /// Decay rate; only for `Smooth` (infinite for the zero field).
    pub epsilon_hat: Option<f64>,
    /// Fitted growth rate of the upper envelope of `log|a|`.
    pub growth_hat: Option<f64>,
    pub caveat: Option<String>,
}

const DECAY_SHELLS: usize = 8;
const MIN_ENTRIES: usize = 32;
const MIN_SHELLS: usize = 4;

/// Least squares for `y ≈ α + β W + γ log W + δ/W`; returns `β`.
///
/// The `log W` column absorbs polynomial prefactors so that `β` isolates the
/// exponential rate; `1/W` absorbs offsets such as `log(W − 1)` and is only
/// used when at least six envelope points are available.
fn envelope_slope(points: &[(f64, f64)]) -> f64 {
    let cols = if points.len() >= 6 { 4 } else { 3 };
    let column = |c: usize, w: f64| match c {
        0 => 1.0,
        1 => w,
        2 => w.ln(),
        _ => 1.0 / w,
    };
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    // modified Gram–Schmidt on the columns
    let n = points.len();
    let mut q = vec![vec![0.0f64; cols]; n];
    let mut r = vec![vec![0.0f64; cols]; cols];
    for c in 0..cols {
        let mut v: Vec<f64> = points.iter().map(|p| column(c, p.0)).collect();
        for p in 0..c {
            let dot: f64 = (0..n).map(|i| q[i][p] * v[i]).sum();
            r[p][c] = dot;
            for i in 0..n {
                v[i] -= dot * q[i][p];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        r[c][c] = norm;
        for i in 0..n {
            q[i][c] = if norm > 0.0 { v[i] / norm } else { 0.0 };
        }
    }
    let qty: Vec<f64> = (0..cols).map(|c| (0..n).map(|i| q[i][c] * y[i]).sum()).collect();
    // back substitution; rank-deficient columns get a zero coefficient
    let mut coef = vec![0.0f64; cols];
    for c in (0..cols).rev() {
        if r[c][c].abs() <= 1e-12 * r[0][0].abs().max(1.0) {
            continue;
        }
        let s: f64 = (c + 1..cols).map(|k| r[c][k] * coef[k]).sum();
        coef[c] = (qty[c] - s) / r[c][c];
    }
    coef[1]
}

/// Classifies a coefficient field as smooth (exponential decay in the
/// weight), an ultradistribution (subexponential growth), or neither.
pub fn decay_classify<T: Real>(field: &SpectralField<T>, params: &SpaceParams) -> Result<ClassificationVerdict> {
    decay_classify_with(field, params, &Thresholds::default())
}

pub fn decay_classify_with<T: Real>(
    field: &SpectralField<T>,
    params: &SpaceParams,
    thresholds: &Thresholds,
) -> Result<ClassificationVerdict> {
    params.validate()?;
    let mut points: Vec<(f64, f64)> = field
        .iter()
        .filter_map(|(mode, v)| {
            let mag = v.norm().to_f64_lossy();
            (mag > 0.0 && mag.is_finite()).then(|| (weight::<f64>(params, mode), -mag.ln()))
        })
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    if points.is_empty() {
        return Ok(ClassificationVerdict {
            label: DecayLabel::Smooth,
            profile: DecayProfile { points, envelope_slope: f64::INFINITY, envelope_intercept: f64::INFINITY },
            epsilon_hat: Some(f64::INFINITY),
            growth_hat: None,
            caveat: Some("zero field".into()),
        });
    }
    let w_min = points[0].0;
    let w_max = points[points.len() - 1].0;
    let partition = ShellPartition::log_uniform(w_min, w_max, DECAY_SHELLS);
    // lower envelope: min of −log|a| per shell; upper: max of log|a|
    let mut low: Vec<Option<(f64, f64)>> = vec![None; DECAY_SHELLS];
    let mut high: Vec<Option<(f64, f64)>> = vec![None; DECAY_SHELLS];
    for &(w, nl) in &points {
        let k = partition.index_of(w);
        if low[k].is_none_or(|(_, v)| nl < v) {
            low[k] = Some((w, nl));
        }
        let g = -nl;
        if high[k].is_none_or(|(_, v)| g > v) {
            high[k] = Some((w, g));
        }
    }
    let low: Vec<(f64, f64)> = low.into_iter().flatten().collect();
    let high: Vec<(f64, f64)> = high.into_iter().flatten().collect();
    if points.len() < MIN_ENTRIES || low.len() < MIN_SHELLS {
        let slope = if low.len() >= 3 { envelope_slope(&low) } else { f64::NAN };
        return Ok(ClassificationVerdict {
            label: DecayLabel::Neither,
            profile: DecayProfile { envelope_intercept: intercept(&points, slope), points, envelope_slope: slope },
            epsilon_hat: None,
            growth_hat: None,
            caveat: Some(format!(
                "insufficient data: need at least {MIN_ENTRIES} nonzero entries over {MIN_SHELLS} weight shells"
            )),
        });
    }
    let slope = envelope_slope(&low);
    let growth = envelope_slope(&high);
    let (label, epsilon_hat) = if slope >= thresholds.delta0 {
        (DecayLabel::Smooth, Some(slope))
    } else if growth <= thresholds.delta0 {
        (DecayLabel::Ultradistribution, None)
    } else {
        (DecayLabel::Neither, None)
    };
    Ok(ClassificationVerdict {
        label,
        profile: DecayProfile { envelope_intercept: intercept(&points, slope), points, envelope_slope: slope },
        epsilon_hat,
        growth_hat: Some(growth),
        caveat: None,
    })
}

/// `min (−log|a| − slope·w)`, the largest `b` with `|a| ≤ e^{−b} e^{−slope·w}`.
fn intercept(points: &[(f64, f64)], slope: f64) -> f64 {
    if !slope.is_finite() {
        return f64::NAN;
    }
    points.iter().map(|&(w, nl)| nl - slope * w).fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    ConditionHolds,
    ConditionFails,
    Inconclusive,
}

/// Per-shell εhat with its witness mode.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ShellEps {
    pub lower: f64,
    /// Shell radius `R` (upper weight edge).
    pub radius: f64,
    /// Upper bound for εhat on the shell; equal to `eps_witness` for dense sweeps.
    pub eps_hat: f64,
    /// εhat attained by `witness`.
    pub eps_witness: f64,
    pub witness: Option<ModeIndex>,
    pub occupied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WorstMode {
    pub tau: Vec<i64>,
    pub j: u64,
    pub norm: f64,
    /// `−log‖σ_𝕃‖ / weight`, unclamped.
    pub ratio: f64,
}

/// Certified `min ‖σ_𝕃‖` over the off-zero part of the grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LowerBoundReport {
    pub value: f64,
    /// Exact squared bound as `p/q`, when certified in rational arithmetic.
    pub exact_square: Option<String>,
    /// Exact bound as `p/q` when the square is a rational square.
    pub exact_value: Option<String>,
    pub witness: Option<ModeIndex>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GridInfo {
    pub bounds: Bounds,
    pub params: SpaceParams,
    pub modes: u128,
    pub shells: usize,
    /// `"dense"` (every mode visited) or `"separable"` (per-`j` exact minima).
    pub method: String,
}

fn shell_pairs<S: Serializer>(shells: &[ShellEps], s: S) -> std::result::Result<S::Ok, S::Error> {
    let v: Vec<[f64; 2]> = shells.iter().map(|e| [e.radius, e.eps_hat]).collect();
    v.serialize(s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DiophantineReport {
    pub grid: GridInfo,
    #[serde(serialize_with = "shell_pairs")]
    pub shell_eps: Vec<ShellEps>,
    pub shell_detail: Vec<ShellEps>,
    pub trend: Trend,
    pub worst_modes: Vec<WorstMode>,
    pub zero_count: u128,
    pub zero_sample: Vec<ModeIndex>,
    pub lower_bound: Option<LowerBoundReport>,
    pub thresholds: Thresholds,
    /// Zero decisions and the lower bound come from exact arithmetic.
    pub exact: bool,
    pub caveats: Vec<String>,
}

const ZERO_SAMPLE: usize = 100;

fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| BigRational::new(n, d))
}

/// Per-shell `εhat(R) = max −log‖σ_𝕃‖ / weight` over nonzero-symbol modes.
pub fn diophantine_profile<T: Real>(spec: &SystemSpec<T>, bounds: &Bounds, shell_count: usize) -> Result<DiophantineReport> {
    diophantine_profile_with(spec, bounds, shell_count, &Thresholds::default())
}

pub fn diophantine_profile_with<T: Real>(
    spec: &SystemSpec<T>,
    bounds: &Bounds,
    shell_count: usize,
    thresholds: &Thresholds,
) -> Result<DiophantineReport> {
    thresholds.validate()?;
    if shell_count < 4 {
        return Err(Error::InvalidParams(format!("shellCount must be >= 4, got {shell_count}")));
    }
    if bounds.is_empty() {
        return Err(Error::InvalidParams("empty grid".into()));
    }
    let before = spec.growth_violations();
    let res = sweep::sweep(spec, bounds, shell_count)?;
    if res.nonzero_count == 0 {
        return Err(Error::DegenerateSystem("every symbol vanishes on the grid".into()));
    }
    let mut caveats = Vec::new();
    if res.float_zeros {
        caveats.push(format!(
            "some zeros were decided in double precision (|σ| < {:e}) without exact data",
            crate::symbols::FLOAT_ZERO
        ));
    }
    if res.separable {
        caveats.push(
            "grid too large to enumerate: shell values are certified upper bounds from exact per-j minima; witnesses are the per-j minimisers"
                .into(),
        );
    }
    let violations = spec.growth_violations() - before;
    if violations > 0 {
        caveats.push(format!("{violations} tabulated symbol values exceeded their declared growth bound"));
    }
    Ok(build_report(spec, bounds, shell_count, res, thresholds, caveats))
}

fn build_report<T: Real>(
    spec: &SystemSpec<T>,
    bounds: &Bounds,
    shell_count: usize,
    res: SweepResult,
    thresholds: &Thresholds,
    mut caveats: Vec<String>,
) -> DiophantineReport {
    let shells: Vec<ShellEps> = res
        .shells
        .iter()
        .map(|s| ShellEps {
            lower: s.lower,
            radius: s.upper,
            eps_hat: s.eps_upper,
            eps_witness: s.eps_witness,
            witness: s.witness.clone(),
            occupied: s.nonzero_modes > 0,
        })
        .collect();
    let (trend, note) = classify_trend(&shells, thresholds);
    if let Some(n) = note {
        caveats.push(n);
    }
    let lower_bound = res.lower_bound.as_ref().map(|lb| LowerBoundReport {
        value: lb.value,
        exact_square: lb.exact.as_ref().map(format_rational),
        exact_value: lb.exact.as_ref().and_then(rational_sqrt).map(|r| format_rational(&r)),
        witness: lb.mode.clone(),
    });
    let exact = spec.is_exact() && !res.float_zeros && res.exact_zeros;
    DiophantineReport {
        grid: GridInfo {
            bounds: bounds.clone(),
            params: spec.params.clone(),
            modes: bounds.len(),
            shells: shell_count,
            method: if res.separable { "separable" } else { "dense" }.into(),
        },
        shell_detail: shells.clone(),
        shell_eps: shells,
        trend,
        worst_modes: res
            .worst
            .iter()
            .map(|w| WorstMode { tau: w.mode.tau.clone(), j: w.mode.j, norm: w.norm, ratio: w.ratio })
            .collect(),
        zero_count: res.zero_count,
        zero_sample: res.zero_sample.into_iter().take(ZERO_SAMPLE).collect(),
        lower_bound,
        thresholds: *thresholds,
        exact,
        caveats,
    }
}

/// Reads the outer half of the occupied shells.
fn classify_trend(shells: &[ShellEps], t: &Thresholds) -> (Trend, Option<String>) {
    let occupied: Vec<&ShellEps> = shells.iter().filter(|s| s.occupied).collect();
    if occupied.len() < 2 {
        return (Trend::Inconclusive, Some("fewer than two occupied shells".into()));
    }
    let half = occupied.len().div_ceil(2);
    let outer = &occupied[occupied.len() - half..];
    let nonincreasing = outer.windows(2).all(|w| w[1].eps_hat <= w[0].eps_hat * (1.0 + 1e-9) + 1e-15);
    let holds = nonincreasing && outer[outer.len() - 1].eps_hat <= t.delta0;
    let large = outer.iter().filter(|s| s.eps_witness >= t.delta1).count();
    let fails = 2 * large >= outer.len() && large > 0;
    match (holds, fails) {
        (true, false) => (Trend::ConditionHolds, None),
        (false, true) => (Trend::ConditionFails, None),
        (true, true) => (Trend::Inconclusive, Some("shell values decay to the threshold but stay large on most outer shells".into())),
        (false, false) => (Trend::Inconclusive, None),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    Holds,
    Fails,
    Inconclusive,
}

/// A grid-certified verdict with its evidence.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Verdict {
    pub schema_version: u32,
    pub property: String,
    pub verdict: VerdictKind,
    pub reason: Option<String>,
    pub exact: bool,
    pub resonance: Option<Resonance>,
    #[serde(flatten)]
    pub report: DiophantineReport,
}

/// Global hypoellipticity on the grid: finite zero set plus the Diophantine
/// condition.
pub fn hypoellipticity_verdict<T: Real>(spec: &SystemSpec<T>, bounds: &Bounds, shell_count: usize) -> Result<Verdict> {
    hypoellipticity_verdict_with(spec, bounds, shell_count, &Thresholds::default())
}

pub fn hypoellipticity_verdict_with<T: Real>(
    spec: &SystemSpec<T>,
    bounds: &Bounds,
    shell_count: usize,
    thresholds: &Thresholds,
) -> Result<Verdict> {
    let resonance = resonance_exact(spec);
    let report = diophantine_profile_with(spec, bounds, shell_count, thresholds)?;
    let finite = matches!(resonance, Resonance::FiniteCertified { .. });
    let (verdict, reason) = if resonance == Resonance::InfiniteCertified {
        (VerdictKind::Fails, Some("the zero set is infinite".to_string()))
    } else if report.trend == Trend::ConditionFails {
        (VerdictKind::Fails, Some("symbol norms decay exponentially along the witness modes".to_string()))
    } else if (finite || report.zero_count == 0) && report.trend == Trend::ConditionHolds {
        (VerdictKind::Holds, None)
    } else if report.trend == Trend::ConditionHolds {
        (VerdictKind::Inconclusive, Some("zeros on the grid and finiteness of the zero set undecided".to_string()))
    } else {
        (VerdictKind::Inconclusive, Some("Diophantine trend inconclusive on this grid".to_string()))
    };
    let exact = match verdict {
        VerdictKind::Fails if resonance == Resonance::InfiniteCertified => true,
        VerdictKind::Inconclusive => false,
        _ => report.exact && (finite || report.zero_count == 0),
    };
    Ok(Verdict {
        schema_version: SCHEMA_VERSION,
        property: "hypoellipticity".into(),
        verdict,
        reason,
        exact,
        resonance: Some(resonance),
        report,
    })
}

/// Global solvability on the grid: the Diophantine condition off the zero set.
pub fn solvability_verdict<T: Real>(spec: &SystemSpec<T>, bounds: &Bounds, shell_count: usize) -> Result<Verdict> {
    solvability_verdict_with(spec, bounds, shell_count, &Thresholds::default())
}

pub fn solvability_verdict_with<T: Real>(
    spec: &SystemSpec<T>,
    bounds: &Bounds,
    shell_count: usize,
    thresholds: &Thresholds,
) -> Result<Verdict> {
    let report = diophantine_profile_with(spec, bounds, shell_count, thresholds)?;
    let (verdict, reason) = match report.trend {
        Trend::ConditionHolds => (VerdictKind::Holds, None),
        Trend::ConditionFails => {
            (VerdictKind::Fails, Some("symbol norms decay exponentially along the witness modes".to_string()))
        }
        Trend::Inconclusive => (VerdictKind::Inconclusive, Some("Diophantine trend inconclusive on this grid".to_string())),
    };
    let exact = verdict != VerdictKind::Inconclusive && report.exact;
    Ok(Verdict { schema_version: SCHEMA_VERSION, property: "solvability".into(), verdict, reason, exact, resonance: None, report })
}
