//! File formats: field CSV with a JSON sidecar, data-vector manifests,
//! custom eigenvalue tables, and TOML configs for constant and
//! time-dependent systems.
//!
//! Floats are written in shortest round-trip form, so a field read back is
//! bit-identical to the one written.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{Thresholds, SCHEMA_VERSION};
use crate::eigen::{CustomSpectrum, EigenProvider};
use crate::error::{Error, Result};
use crate::exact::{format_rational, parse_rational, rational_to_f64, Coefficient, ExactComplex};
use crate::normal_form::{TimeCoefficient, TimeCoefficientSet, TimeDependentSystem};
use crate::scalar::Real;
use crate::solver::DataVector;
use crate::spectral::{Bounds, ModeIndex, SpaceParams, SpectralField};
use crate::symbols::{Monomial, OperatorSpec, SystemSpec, TabulatedSymbol, TimeSymbol};

/// JSON written next to every field CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FieldSidecar {
    pub schema_version: u32,
    pub bounds: Bounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<SpaceParams>,
}

/// `foo.csv` → `foo.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `tau_1,…,tau_m,j,re,im` rows for the nonzero entries, in mode
/// order, plus the sidecar.
pub fn write_field<T: Real>(field: &SpectralField<T>, params: Option<&SpaceParams>, path: &Path) -> Result<()> {
    let m = field.bounds().m();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=m).map(|k| format!("tau_{k}")).collect();
    header.extend(["j", "re", "im"].map(String::from));
    w.write_record(&header)?;
    for (mode, v) in field.iter() {
        let mut row: Vec<String> = mode.tau.iter().map(i64::to_string).collect();
        row.push(mode.j.to_string());
        row.push(v.re.to_string());
        row.push(v.im.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    let sidecar = FieldSidecar { schema_version: SCHEMA_VERSION, bounds: field.bounds().clone(), params: params.cloned() };
    write_json(&sidecar_path(path), &sidecar)
}

fn parse_num<V: std::str::FromStr>(text: &str, what: &str, line: u64) -> Result<V> {
    text.trim().parse().map_err(|_| Error::Parse(format!("line {line}: bad {what} {text:?}")))
}

/// Reads a field CSV and its sidecar.
pub fn read_field<T: Real>(path: &Path) -> Result<(SpectralField<T>, Option<SpaceParams>)> {
    let side_path = sidecar_path(path);
    let text = fs::read_to_string(&side_path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("sidecar {}: {e}", side_path.display())))?;
    let side: FieldSidecar = serde_json::from_str(&text)?;
    let m = side.bounds.m();
    let mut field = SpectralField::zeros(side.bounds);
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() != m + 3 {
        return Err(Error::Shape(format!("expected {} columns, found {}", m + 3, header.len())));
    }
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let tau = (0..m).map(|k| parse_num::<i64>(&rec[k], "tau", line)).collect::<Result<Vec<_>>>()?;
        let j = parse_num::<u64>(&rec[m], "j", line)?;
        let re = parse_num::<T>(&rec[m + 1], "re", line)?;
        let im = parse_num::<T>(&rec[m + 2], "im", line)?;
        field.insert(ModeIndex::new(tau, j), Complex::new(re, im))?;
    }
    Ok((field, side.params))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub schema_version: u32,
    /// Component CSVs, relative to the manifest.
    pub components: Vec<String>,
}

/// Writes `stem_1.csv … stem_ℓ.csv` and `stem.manifest.json` into `dir`;
/// returns the manifest path.
pub fn write_data_vector<T: Real>(
    data: &DataVector<T>,
    params: Option<&SpaceParams>,
    dir: &Path,
    stem: &str,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(data.len());
    for (r, c) in data.components().iter().enumerate() {
        let name = format!("{stem}_{}.csv", r + 1);
        write_field(c, params, &dir.join(&name))?;
        names.push(name);
    }
    let path = dir.join(format!("{stem}.manifest.json"));
    write_json(&path, &Manifest { schema_version: SCHEMA_VERSION, components: names })?;
    Ok(path)
}

pub fn read_data_vector<T: Real>(manifest: &Path) -> Result<DataVector<T>> {
    let man: Manifest = serde_json::from_str(&fs::read_to_string(manifest)?)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let comps = man.components.iter().map(|c| read_field::<T>(&base.join(c)).map(|(f, _)| f)).collect::<Result<Vec<_>>>()?;
    DataVector::new(comps)
}

/// Custom spectrum metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    #[serde(rename = "M")]
    pub big_m: u32,
    pub n: usize,
    /// Read the `lambda` column as exact decimals (default true).
    #[serde(default = "yes")]
    pub exact: bool,
}

fn yes() -> bool {
    true
}

/// Loads `j,lambda` rows (indices `0..N` in order) with `{M, n}` metadata.
pub fn read_custom_spectrum(csv_path: &Path, meta_path: &Path) -> Result<EigenProvider> {
    let meta: SpectrumMeta = serde_json::from_str(&fs::read_to_string(meta_path)?)?;
    let mut r = csv::Reader::from_path(csv_path)?;
    let (mut values, mut exact) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        if rec.len() != 2 {
            return Err(Error::Shape(format!("line {line}: expected j,lambda")));
        }
        let j: u64 = parse_num(&rec[0], "j", line)?;
        if j != i as u64 {
            return Err(Error::Parse(format!("line {line}: expected j = {i}, found {j}")));
        }
        values.push(parse_num::<f64>(&rec[1], "lambda", line)?);
        if meta.exact {
            exact.push(parse_rational(&rec[1])?);
        }
    }
    let exact = meta.exact.then_some(exact);
    Ok(EigenProvider::Custom(CustomSpectrum::new(values, exact, meta.big_m, meta.n)?))
}

/// A number in a config: strings are exact rationals (`"1/2"`, `"0.49"`),
/// integers are exact, floats are not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Scalar {
    fn exact(&self) -> Result<Option<BigRational>> {
        Ok(match self {
            Scalar::Int(k) => Some(BigRational::from_integer((*k).into())),
            Scalar::Float(_) => None,
            Scalar::Text(s) => Some(parse_rational(s)?),
        })
    }

    fn value(&self) -> Result<f64> {
        Ok(match self {
            Scalar::Int(k) => *k as f64,
            Scalar::Float(x) => *x,
            Scalar::Text(s) => rational_to_f64(&parse_rational(s)?),
        })
    }

    pub fn from_rational(r: &BigRational) -> Self {
        Scalar::Text(format_rational(r))
    }
}

/// A complex config value: a real scalar, `[re, im]`, or `{re, im}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(Scalar),
    Pair([Scalar; 2]),
    Parts {
        re: Scalar,
        #[serde(default)]
        im: Option<Scalar>,
    },
}

impl ComplexValue {
    fn coefficient<T: Real>(&self) -> Result<Coefficient<T>> {
        let zero = Scalar::Int(0);
        let (re, im) = match self {
            ComplexValue::Real(r) => (r, &zero),
            ComplexValue::Pair([r, i]) => (r, i),
            ComplexValue::Parts { re, im } => (re, im.as_ref().unwrap_or(&zero)),
        };
        match (re.exact()?, im.exact()?) {
            (Some(a), Some(b)) => Ok(Coefficient::exact(ExactComplex::new(a, b))),
            _ => Ok(Coefficient::float(Complex::new(T::of(re.value()?), T::of(im.value()?)))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub m: usize,
    pub n: usize,
    pub sigma: f64,
    pub mu: f64,
    #[serde(rename = "M")]
    pub big_m: u32,
}

impl ParamsConfig {
    pub fn build(&self) -> Result<SpaceParams> {
        SpaceParams::new(self.m, self.n, self.sigma, self.mu, self.big_m)
    }

    pub fn from_params(p: &SpaceParams) -> Self {
        Self { m: p.m, n: p.n, sigma: p.sigma, mu: p.mu, big_m: p.big_m }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EigenConfig {
    Harmonic,
    HarmonicNd { n: usize },
    Power { base: Box<EigenConfig>, exponent: u32 },
    Custom { csv: PathBuf, meta: PathBuf },
}

impl EigenConfig {
    pub fn build(&self, base_dir: &Path) -> Result<EigenProvider> {
        Ok(match self {
            EigenConfig::Harmonic => EigenProvider::Harmonic1D,
            EigenConfig::HarmonicNd { n } => EigenProvider::HarmonicND(*n),
            EigenConfig::Power { base, exponent } => EigenProvider::power_of(base.build(base_dir)?, *exponent),
            EigenConfig::Custom { csv, meta } => read_custom_spectrum(&base_dir.join(csv), &base_dir.join(meta))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialConfig {
    pub alpha: Vec<u32>,
    pub re: Scalar,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Scalar>,
}

/// Built-in time symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BuiltinSymbol {
    /// `D_{t_axis}` (0-based axis).
    Dt { axis: usize },
    /// Planted small divisors, see [`TabulatedSymbol::planted`].
    Planted {
        #[serde(default = "planted_rate")]
        rate: f64,
        #[serde(default = "planted_stride")]
        stride: i64,
        #[serde(default = "planted_offset")]
        offset: f64,
    },
}

fn planted_rate() -> f64 {
    0.25
}

fn planted_stride() -> i64 {
    3
}

fn planted_offset() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<MonomialConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinSymbol>,
    pub d: ComplexValue,
}

impl OperatorConfig {
    fn build<T: Real>(&self, params: &SpaceParams) -> Result<OperatorSpec<T>> {
        let q = match (&self.q, &self.builtin) {
            (Some(terms), None) => TimeSymbol::Polynomial(
                terms
                    .iter()
                    .map(|t| {
                        let c = ComplexValue::Parts { re: t.re.clone(), im: t.im.clone() };
                        Ok(Monomial { alpha: t.alpha.clone(), coeff: c.coefficient()? })
                    })
                    .collect::<Result<_>>()?,
            ),
            (None, Some(BuiltinSymbol::Dt { axis })) => {
                if *axis >= params.m {
                    return Err(Error::InvalidParams(format!("axis {axis} out of range for m = {}", params.m)));
                }
                TimeSymbol::derivative(params.m, *axis)
            }
            (None, Some(BuiltinSymbol::Planted { rate, stride, offset })) => {
                TimeSymbol::Tabulated(TabulatedSymbol::planted(params, *rate, *stride, *offset))
            }
            _ => return Err(Error::Parse("each operator needs exactly one of `q` or `builtin`".into())),
        };
        Ok(OperatorSpec::new(q, self.d.coefficient()?))
    }
}

/// Default grid of a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GridConfig {
    pub tau_max: Option<Vec<i64>>,
    pub j_max: Option<u64>,
    pub shells: Option<usize>,
}

/// `[params]`, `[eigen]`, `[[operator]]`, optional `[grid]` and
/// `[thresholds]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub params: ParamsConfig,
    pub eigen: EigenConfig,
    #[serde(rename = "operator")]
    pub operators: Vec<OperatorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Thresholds>,
}

impl SystemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn build<T: Real>(&self, base_dir: &Path) -> Result<SystemSpec<T>> {
        let params = self.params.build()?;
        let eigen = self.eigen.build(base_dir)?;
        let ops = self.operators.iter().map(|o| o.build(&params)).collect::<Result<Vec<_>>>()?;
        SystemSpec::new(ops, eigen, params)
    }
}

/// Loads a system config; relative paths resolve against its directory.
pub fn load_system<T: Real>(path: &Path) -> Result<(SystemSpec<T>, SystemConfig)> {
    let cfg = SystemConfig::load(path)?;
    let spec = cfg.build(path.parent().unwrap_or(Path::new(".")))?;
    Ok((spec, cfg))
}

/// One coefficient: `{const, cos, sin}` or `samples = "a.csv"` (`t,value`
/// on the uniform grid `2πk/N`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    #[serde(rename = "const", default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Scalar>,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
}

impl CoefficientConfig {
    fn build(&self, base_dir: &Path) -> Result<TimeCoefficient> {
        if let Some(path) = &self.samples {
            if self.constant.is_some() || !self.cos.is_empty() || !self.sin.is_empty() {
                return Err(Error::Parse("`samples` excludes const/cos/sin".into()));
            }
            return TimeCoefficient::from_samples(&read_samples(&base_dir.join(path))?);
        }
        let c = self.constant.clone().unwrap_or(Scalar::Int(0));
        let a = TimeCoefficient::trig(c.value()?, self.cos.clone(), self.sin.clone())?;
        Ok(match c.exact()? {
            Some(e) => a.with_exact_constant(e),
            None => a,
        })
    }
}

/// Samples from a `t,value` CSV whose `t` column is `2πk/N`.
pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        rows.push((parse_num::<f64>(&rec[0], "t", line)?, parse_num::<f64>(&rec[1], "value", line)?));
    }
    let n = rows.len() as f64;
    for (k, (t, _)) in rows.iter().enumerate() {
        let want = std::f64::consts::TAU * k as f64 / n;
        if (t - want).abs() > 1e-9 * (1.0 + want) {
            return Err(Error::Parse(format!("sample {k}: t = {t} is not on the uniform grid (expected {want})")));
        }
    }
    Ok(rows.into_iter().map(|(_, v)| v).collect())
}

/// `[params]`, `[eigen]`, `[[coefficient]]` (one per time axis).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSystemConfig {
    pub params: ParamsConfig,
    pub eigen: EigenConfig,
    #[serde(rename = "coefficient")]
    pub coefficients: Vec<CoefficientConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

impl TimeSystemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn build(&self, base_dir: &Path) -> Result<TimeDependentSystem> {
        let coeffs = self.coefficients.iter().map(|c| c.build(base_dir)).collect::<Result<Vec<_>>>()?;
        TimeDependentSystem::new(TimeCoefficientSet::new(coeffs)?, self.eigen.build(base_dir)?, self.params.build()?)
    }

    /// Config of the normal form `D_r + a_{r,0} P`.
    pub fn reduced(&self, sys: &TimeDependentSystem) -> SystemConfig {
        let operators = sys
            .coeffs
            .coeffs
            .iter()
            .enumerate()
            .map(|(r, a)| OperatorConfig {
                q: None,
                builtin: Some(BuiltinSymbol::Dt { axis: r }),
                d: ComplexValue::Real(match &a.constant_exact {
                    Some(e) => Scalar::from_rational(e),
                    None => Scalar::Float(a.constant),
                }),
            })
            .collect();
        SystemConfig {
            params: self.params.clone(),
            eigen: self.eigen.clone(),
            operators,
            grid: self.grid.clone(),
            thresholds: None,
        }
    }
}

pub fn load_time_system(path: &Path) -> Result<(TimeDependentSystem, TimeSystemConfig)> {
    let cfg = TimeSystemConfig::parse(&fs::read_to_string(path)?)?;
    let sys = cfg.build(path.parent().unwrap_or(Path::new(".")))?;
    Ok((sys, cfg))
}

/// Two-column CSV for plotting.
pub fn write_two_column(path: &Path, header: [&str; 2], rows: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (a, b) in rows {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
