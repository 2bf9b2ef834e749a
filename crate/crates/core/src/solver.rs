//! Forward application of the system, the compatibility conditions, explicit
//! solution by symbol division, and counterexample data.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{Bounds, ModeIndex, SpectralField};
use crate::symbols::{Lambda, SystemSpec};

/// `F = (f_1, …, f_ℓ)`, one field per operator, all on the same bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct DataVector<T> {
    components: Vec<SpectralField<T>>,
}

impl<T: Real> DataVector<T> {
    pub fn new(components: Vec<SpectralField<T>>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::Shape("a data vector needs at least one component".into()));
        };
        if components.iter().any(|c| c.bounds() != first.bounds()) {
            return Err(Error::Shape("data vector components have different bounds".into()));
        }
        Ok(Self { components })
    }

    pub fn zeros(len: usize, bounds: Bounds) -> Self {
        Self { components: vec![SpectralField::zeros(bounds); len.max(1)] }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn bounds(&self) -> &Bounds {
        self.components[0].bounds()
    }

    pub fn components(&self) -> &[SpectralField<T>] {
        &self.components
    }

    pub fn component(&self, r: usize) -> &SpectralField<T> {
        &self.components[r]
    }

    /// Reorders the components by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { components: perm.iter().map(|&i| self.components[i].clone()).collect() }
    }

    fn support(&self) -> Vec<ModeIndex> {
        let set: BTreeSet<&ModeIndex> = self.components.iter().flat_map(|c| c.iter().map(|(m, _)| m)).collect();
        set.into_iter().cloned().collect()
    }
}

fn lambda_table<T: Real>(spec: &SystemSpec<T>, modes: &[ModeIndex]) -> Result<BTreeMap<u64, Lambda<T>>> {
    let js: BTreeSet<u64> = modes.iter().map(|m| m.j).collect();
    js.into_iter().map(|j| Ok((j, spec.lambda(j)?))).collect()
}

fn zero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Symbol values at one mode with exact zeros forced to `0`.
fn symbols_at<T: Real>(spec: &SystemSpec<T>, mode: &ModeIndex, lam: &Lambda<T>) -> Vec<(Complex<T>, bool)> {
    (0..spec.len())
        .map(|r| {
            let v = spec.symbol_value_at(r, &mode.tau, lam);
            if v.zero.is_zero() {
                (zero(), true)
            } else {
                (v.value, false)
            }
        })
        .collect()
}

/// `f̂_r = σ_{L_r} · û` for every operator.
pub fn apply_system<T: Real>(spec: &SystemSpec<T>, u: &SpectralField<T>) -> Result<DataVector<T>> {
    check_m(spec, u.bounds())?;
    let entries: Vec<(ModeIndex, Complex<T>)> = u.iter().map(|(m, v)| (m.clone(), *v)).collect();
    let modes: Vec<ModeIndex> = entries.iter().map(|e| e.0.clone()).collect();
    let lams = lambda_table(spec, &modes)?;
    let values: Vec<Vec<Complex<T>>> = entries
        .par_iter()
        .map(|(m, v)| symbols_at(spec, m, &lams[&m.j]).into_iter().map(|(s, _)| s * v).collect())
        .collect();
    let mut comps = vec![SpectralField::zeros(u.bounds().clone()); spec.len()];
    for ((m, _), vals) in entries.iter().zip(values) {
        for (r, f) in vals.into_iter().enumerate() {
            comps[r].insert(m.clone(), f)?;
        }
    }
    DataVector::new(comps)
}

fn check_m<T: Real>(spec: &SystemSpec<T>, bounds: &Bounds) -> Result<()> {
    if bounds.m() != spec.params.m {
        return Err(Error::Shape(format!("field has {} time axes, system has m = {}", bounds.m(), spec.params.m)));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KernelViolation {
    /// 0-based operator index.
    pub r: usize,
    pub mode: ModeIndex,
}

/// Membership of `F` in the admissible set.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AdmissibilityReport {
    /// `max |σ_r f̂_s − σ_s f̂_r|` over pairs and modes.
    pub commutation_residuals: f64,
    /// The same divided by `max |σ_r| |f̂_s|`.
    pub relative_residual: f64,
    pub kernel_violations: Vec<KernelViolation>,
    pub tolerance: f64,
    pub admissible: bool,
}

/// Checks `σ_r f̂_s = σ_s f̂_r` and `σ_r = 0 ⟹ f̂_r = 0` on every stored mode.
pub fn admissibility_check<T: Real>(spec: &SystemSpec<T>, f: &DataVector<T>, tol: f64) -> Result<AdmissibilityReport> {
    if f.len() != spec.len() {
        return Err(Error::Shape(format!("data vector has {} components, system has {} operators", f.len(), spec.len())));
    }
    check_m(spec, f.bounds())?;
    let modes = f.support();
    let lams = lambda_table(spec, &modes)?;
    let per_mode: Vec<(f64, f64, Vec<KernelViolation>)> = modes
        .par_iter()
        .map(|m| {
            let sig = symbols_at(spec, m, &lams[&m.j]);
            let vals: Vec<Complex<T>> = f.components.iter().map(|c| c.get(m)).collect();
            let mut res = 0.0f64;
            let mut scale = 0.0f64;
            for r in 0..sig.len() {
                for s in 0..sig.len() {
                    scale = scale.max((sig[r].0.norm() * vals[s].norm()).to_f64_lossy());
                    if s > r {
                        let d = sig[r].0 * vals[s] - sig[s].0 * vals[r];
                        res = res.max(d.norm().to_f64_lossy());
                    }
                }
            }
            let kv = sig
                .iter()
                .enumerate()
                .filter(|(r, (_, z))| *z && vals[*r] != zero())
                .map(|(r, _)| KernelViolation { r, mode: m.clone() })
                .collect();
            (res, scale, kv)
        })
        .collect();
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    let mut kernel_violations = Vec::new();
    for (r, s, kv) in per_mode {
        residual = residual.max(r);
        scale = scale.max(s);
        kernel_violations.extend(kv);
    }
    let relative = if scale > 0.0 { residual / scale } else { residual };
    let admissible = relative <= tol && kernel_violations.is_empty();
    Ok(AdmissibilityReport {
        commutation_residuals: residual,
        relative_residual: relative,
        kernel_violations,
        tolerance: tol,
        admissible,
    })
}

/// Diagnostics of a solve.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveReport {
    pub admissibility: AdmissibilityReport,
    /// Stored data modes lying on the zero set, where `û` was set from the
    /// kernel field (zero by default).
    pub kernel_modes: usize,
    /// `max |σ_r û − f̂_r| / max |f̂|` over modes with nonzero symbol.
    pub reproduction_residual: f64,
}

/// `û = f̂_{r*} / σ_{L_{r*}}` off the zero set and `0` on it.
pub fn solve<T: Real>(spec: &SystemSpec<T>, f: &DataVector<T>) -> Result<SpectralField<T>> {
    Ok(solve_with(spec, f, None, 1e-10)?.0)
}

/// [`solve`] with an optional kernel field (entries on the zero set) and an
/// admissibility tolerance.
pub fn solve_with<T: Real>(
    spec: &SystemSpec<T>,
    f: &DataVector<T>,
    kernel: Option<&SpectralField<T>>,
    tol: f64,
) -> Result<(SpectralField<T>, SolveReport)> {
    let admissibility = admissibility_check(spec, f, tol)?;
    if !admissibility.admissible {
        let summary = format!(
            "relative commutation residual {:e} (tolerance {:e}), {} kernel violations",
            admissibility.relative_residual,
            tol,
            admissibility.kernel_violations.len()
        );
        return Err(Error::Inadmissible { summary, report: Box::new(admissibility) });
    }
    let mut modes = f.support();
    if let Some(k) = kernel {
        if k.bounds() != f.bounds() {
            return Err(Error::Shape("kernel field bounds differ from the data".into()));
        }
        modes.extend(k.iter().map(|(m, _)| m.clone()));
        modes.sort();
        modes.dedup();
    }
    let lams = lambda_table(spec, &modes)?;
    let solved: Vec<(ModeIndex, Complex<T>, bool)> = modes
        .par_iter()
        .map(|m| {
            let v = spec.system_value_at(&m.tau, &lams[&m.j]);
            if v.zero.is_zero() {
                let kv = kernel.map_or(zero(), |k| k.get(m));
                return (m.clone(), kv, true);
            }
            let sig = spec.symbol_value_at(v.r_star, &m.tau, &lams[&m.j]).value;
            (m.clone(), f.components[v.r_star].get(m) / sig, false)
        })
        .collect();
    let mut u = SpectralField::zeros(f.bounds().clone());
    let mut kernel_modes = 0;
    for (m, val, on_zero) in solved {
        if on_zero {
            kernel_modes += 1;
        } else if kernel.is_some_and(|k| k.get(&m) != zero()) {
            return Err(Error::InvalidParams(format!("kernel field is nonzero at {m:?}, which is off the zero set")));
        }
        u.insert(m, val)?;
    }
    let reproduction_residual = reproduction(spec, f, &u)?;
    Ok((u, SolveReport { admissibility, kernel_modes, reproduction_residual }))
}

fn reproduction<T: Real>(spec: &SystemSpec<T>, f: &DataVector<T>, u: &SpectralField<T>) -> Result<f64> {
    let back = apply_system(spec, u)?;
    let modes = f.support();
    let lams = lambda_table(spec, &modes)?;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for m in &modes {
        let sv = spec.system_value_at(&m.tau, &lams[&m.j]);
        for r in 0..spec.len() {
            let fr = f.components[r].get(m);
            scale = scale.max(fr.norm().to_f64_lossy());
            if !sv.zero.is_zero() {
                worst = worst.max((back.components[r].get(m) - fr).norm().to_f64_lossy());
            }
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// `f̂_{r*} / σ_{L_{r*}}` at every stored mode off the zero set, with no
/// admissibility check: the only candidate for a solution.
pub fn division_field<T: Real>(spec: &SystemSpec<T>, f: &DataVector<T>) -> Result<SpectralField<T>> {
    let modes = f.support();
    let lams = lambda_table(spec, &modes)?;
    let mut u = SpectralField::zeros(f.bounds().clone());
    for m in &modes {
        let v = spec.system_value_at(&m.tau, &lams[&m.j]);
        if !v.zero.is_zero() {
            let sig = spec.symbol_value_at(v.r_star, &m.tau, &lams[&m.j]).value;
            u.insert(m.clone(), f.components[v.r_star].get(m) / sig)?;
        }
    }
    Ok(u)
}

/// Which necessity argument the counterexample follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum Flavor {
    /// Smooth data with a non-smooth ultradistribution solution.
    GH,
    /// Admissible data with no ultradistribution solution.
    GS,
}

/// Builds the counterexample data on `bounds` from small-divisor witnesses.
///
/// GH: `f̂_r = σ_{L_r}·|(τ_k, j_k)|`, `û = |(τ_k, j_k)|` at the witnesses.
/// GS: unit data at the witnesses (for `ℓ ≥ 2` the unit vector
/// `σ_{L_r}/‖σ_𝕃‖`, so that the compatibility condition holds); no `u`.
pub fn counterexample_pair<T: Real>(
    spec: &SystemSpec<T>,
    bounds: &Bounds,
    witnesses: &[ModeIndex],
    flavor: Flavor,
) -> Result<(DataVector<T>, Option<SpectralField<T>>)> {
    check_m(spec, bounds)?;
    let lams = lambda_table(spec, witnesses)?;
    let mut comps = vec![SpectralField::zeros(bounds.clone()); spec.len()];
    let mut u = SpectralField::zeros(bounds.clone());
    for w in witnesses {
        if !bounds.contains(w) {
            return Err(Error::InvalidWitness(format!("{w:?} lies outside the bounds")));
        }
        let sv = spec.system_value_at(&w.tau, &lams[&w.j]);
        if sv.zero.is_zero() {
            return Err(Error::InvalidWitness(format!("the symbol vanishes at {w:?}")));
        }
        let sig: Vec<Complex<T>> = symbols_at(spec, w, &lams[&w.j]).into_iter().map(|s| s.0).collect();
        match flavor {
            Flavor::GH => {
                let size = T::of(w.pair_norm());
                for (r, s) in sig.iter().enumerate() {
                    comps[r].insert(w.clone(), s * size)?;
                }
                u.insert(w.clone(), Complex::new(size, T::zero()))?;
            }
            Flavor::GS => {
                for (r, s) in sig.iter().enumerate() {
                    let v = if spec.len() == 1 { Complex::new(T::one(), T::zero()) } else { s / sv.norm };
                    comps[r].insert(w.clone(), v)?;
                }
            }
        }
    }
    let f = DataVector::new(comps)?;
    Ok(match flavor {
        Flavor::GH => (f, Some(u)),
        Flavor::GS => (f, None),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::EigenProvider;
    use crate::exact::{parse_rational, Coefficient};
    use crate::spectral::SpaceParams;
    use crate::symbols::{OperatorSpec, TimeSymbol};

    fn rat(s: &str) -> Coefficient<f64> {
        Coefficient::exact_real(parse_rational(s).unwrap())
    }

    fn single(d: &str) -> SystemSpec<f64> {
        let params = SpaceParams::new(1, 1, 1.0, 0.5, 2).unwrap();
        SystemSpec::new(vec![OperatorSpec::new(TimeSymbol::derivative(1, 0), rat(d))], EigenProvider::Harmonic1D, params)
            .unwrap()
    }

    fn pair() -> SystemSpec<f64> {
        let params = SpaceParams::new(2, 1, 1.0, 0.5, 2).unwrap();
        SystemSpec::new(
            vec![
                OperatorSpec::new(TimeSymbol::derivative(2, 0), rat("1/2")),
                OperatorSpec::new(TimeSymbol::derivative(2, 1), rat("1/3")),
            ],
            EigenProvider::Harmonic1D,
            params,
        )
        .unwrap()
    }

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    #[test]
    fn apply_examples() {
        let spec = single("1");
        let b = Bounds::uniform(1, 3, 3).unwrap();
        let zero_u = SpectralField::zeros(b.clone());
        assert!(apply_system(&spec, &zero_u).unwrap().component(0).is_zero());
        let mut u = SpectralField::zeros(b);
        u.insert(ModeIndex::new(vec![1], 0), c(1.0)).unwrap();
        let f = apply_system(&spec, &u).unwrap();
        assert_eq!(f.component(0).get(&ModeIndex::new(vec![1], 0)), c(2.0));
    }

    #[test]
    fn admissibility_examples() {
        let spec = single("-1");
        let b = Bounds::uniform(1, 3, 3).unwrap();
        let mut f = SpectralField::zeros(b.clone());
        f.insert(ModeIndex::new(vec![1], 0), c(1.0)).unwrap();
        let rep = admissibility_check(&spec, &DataVector::new(vec![f]).unwrap(), 1e-10).unwrap();
        assert!(!rep.admissible);
        assert_eq!(rep.kernel_violations, vec![KernelViolation { r: 0, mode: ModeIndex::new(vec![1], 0) }]);

        let spec = pair();
        let b2 = Bounds::uniform(2, 2, 2).unwrap();
        let mut f1 = SpectralField::zeros(b2.clone());
        f1.insert(ModeIndex::new(vec![1, 1], 1), c(1.0)).unwrap();
        let data = DataVector::new(vec![f1, SpectralField::zeros(b2)]).unwrap();
        let rep = admissibility_check(&spec, &data, 1e-10).unwrap();
        assert!(!rep.admissible);
        assert!(rep.commutation_residuals > 0.0);
        assert!(matches!(solve(&spec, &data), Err(Error::Inadmissible { .. })));
    }

    #[test]
    fn solve_example_with_kernel_mode() {
        let spec = single("-1");
        let b = Bounds::uniform(1, 3, 3).unwrap();
        let mut f = SpectralField::zeros(b.clone());
        f.insert(ModeIndex::new(vec![0], 0), c(3.0)).unwrap();
        let data = DataVector::new(vec![f]).unwrap();
        let u = solve(&spec, &data).unwrap();
        assert_eq!(u.get(&ModeIndex::new(vec![0], 0)), c(-3.0));
        assert_eq!(u.get(&ModeIndex::new(vec![1], 0)), c(0.0));
        let mut k = SpectralField::zeros(b);
        k.insert(ModeIndex::new(vec![1], 0), c(5.0)).unwrap();
        let (u, rep) = solve_with(&spec, &data, Some(&k), 1e-10).unwrap();
        assert_eq!(u.get(&ModeIndex::new(vec![1], 0)), c(5.0));
        assert_eq!(rep.kernel_modes, 1);
        assert_eq!(apply_system(&spec, &u).unwrap(), data);
    }

    #[test]
    fn zero_data_and_empty_witnesses() {
        let spec = pair();
        let b = Bounds::uniform(2, 2, 2).unwrap();
        let data = DataVector::zeros(2, b.clone());
        assert!(solve(&spec, &data).unwrap().is_zero());
        let (f, u) = counterexample_pair(&spec, &b, &[], Flavor::GH).unwrap();
        assert!(f.components().iter().all(SpectralField::is_zero));
        assert!(u.unwrap().is_zero());
    }

    #[test]
    fn witness_on_zero_set_is_rejected() {
        let spec = single("-1");
        let b = Bounds::uniform(1, 3, 3).unwrap();
        let err = counterexample_pair(&spec, &b, &[ModeIndex::new(vec![3], 1)], Flavor::GS).unwrap_err();
        assert!(matches!(err, Error::InvalidWitness(_)));
    }

    #[test]
    fn gs_data_is_admissible_for_systems() {
        let spec = pair();
        let b = Bounds::uniform(2, 3, 3).unwrap();
        let w = vec![ModeIndex::new(vec![1, -1], 0), ModeIndex::new(vec![-2, 3], 2)];
        let (f, u) = counterexample_pair(&spec, &b, &w, Flavor::GS).unwrap();
        assert!(u.is_none());
        assert!(admissibility_check(&spec, &f, 1e-10).unwrap().admissible);
        let (f, u) = counterexample_pair(&spec, &b, &w, Flavor::GH).unwrap();
        assert_eq!(apply_system(&spec, &u.unwrap()).unwrap(), f);
    }
}
