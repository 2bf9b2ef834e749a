//! Config loading and the merge of file settings with flags.

use std::fs;
use std::path::{Path, PathBuf};

use fhspec::io::{load_system, load_time_system, EigenConfig, GridConfig, SystemConfig, TimeSystemConfig};
use fhspec::{Bounds, EigenProvider, SystemSpec, Thresholds, TimeDependentSystem};
use serde::Deserialize;

use crate::{CliError, GridArgs, ThresholdArgs};

pub const DEFAULT_SHELLS: usize = 8;

/// Settings shared by the grid-based subcommands.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub spec_path: Option<PathBuf>,
    pub bounds: Option<Bounds>,
    pub shells: usize,
    pub thresholds: Thresholds,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Flags take precedence over the config's `[grid]` and `[thresholds]`.
    pub fn merge(
        spec_path: Option<&Path>,
        m: usize,
        file_grid: Option<&GridConfig>,
        file_thresholds: Option<&Thresholds>,
        grid: &GridArgs,
        thresholds: &ThresholdArgs,
        out_dir: &Path,
    ) -> Result<Self, CliError> {
        let tau = if grid.tau_max.is_empty() {
            file_grid.and_then(|g| g.tau_max.clone()).unwrap_or_default()
        } else {
            grid.tau_max.clone()
        };
        let j_max = grid.j_max.or(file_grid.and_then(|g| g.j_max));
        let bounds = match (tau.is_empty(), j_max) {
            (true, None) => None,
            (false, Some(j)) => {
                let tau = match tau.len() {
                    1 => vec![tau[0]; m],
                    k if k == m => tau,
                    k => {
                        return Err(CliError::precondition(
                            "one tau-max per time axis",
                            format!("got {k} values for m = {m}"),
                        ))
                    }
                };
                Some(Bounds::new(tau, j)?)
            }
            _ => return Err(CliError::precondition("complete grid", "tau-max and j-max must be given together")),
        };
        let shells = grid.shells.or(file_grid.and_then(|g| g.shells)).unwrap_or(DEFAULT_SHELLS);
        let mut t = file_thresholds.copied().unwrap_or_default();
        if let Some(v) = thresholds.delta0 {
            t.delta0 = v;
        }
        if let Some(v) = thresholds.delta1 {
            t.delta1 = v;
        }
        if let Some(v) = thresholds.admissibility_tol {
            t.admissibility_tol = v;
        }
        t.validate()?;
        Ok(Self { spec_path: spec_path.map(Path::to_path_buf), bounds, shells, thresholds: t, out_dir: out_dir.to_path_buf() })
    }

    pub fn bounds(&self) -> Result<&Bounds, CliError> {
        self.bounds
            .as_ref()
            .ok_or_else(|| CliError::precondition("grid bounds", "pass --tau-max and --j-max or add a [grid] section"))
    }

    /// Output path inside the artifact directory, created on demand.
    pub fn artifact(&self, name: &str) -> Result<PathBuf, CliError> {
        artifact(&self.out_dir, name)
    }
}

pub fn artifact(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

/// Input files must exist; read and parse failures are input errors.
pub fn input<T>(path: &Path, read: impl FnOnce(&Path) -> fhspec::Result<T>) -> Result<T, CliError> {
    if !path.is_file() {
        return Err(CliError::precondition("input file exists", format!("{} not found", path.display())));
    }
    read(path).map_err(|e| match e {
        fhspec::Error::Io(_) | fhspec::Error::Csv(_) | fhspec::Error::Json(_) => {
            CliError::precondition("well-formed input", format!("{}: {e}", path.display()))
        }
        other => other.into(),
    })
}

pub fn system(path: &Path) -> Result<(SystemSpec<f64>, SystemConfig), CliError> {
    input(path, load_system::<f64>)
}

pub fn time_system(path: &Path) -> Result<(TimeDependentSystem, TimeSystemConfig), CliError> {
    input(path, load_time_system)
}

#[derive(Deserialize)]
struct EigenSection {
    eigen: EigenConfig,
}

/// The `[eigen]` section of either config kind.
pub fn eigen(path: &Path) -> Result<EigenProvider, CliError> {
    input(path, |p| {
        let text = fs::read_to_string(p)?;
        let section: EigenSection = toml::from_str(&text).map_err(|e| fhspec::Error::Parse(e.to_string()))?;
        section.eigen.build(p.parent().unwrap_or(Path::new(".")))
    })
}

/// `harmonic` or `harmonic-nd:N`.
pub fn named_eigen(name: &str) -> Result<EigenProvider, CliError> {
    match name.split_once(':') {
        None if name == "harmonic" => Ok(EigenProvider::Harmonic1D),
        Some(("harmonic-nd", n)) => match n.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(EigenProvider::HarmonicND(n)),
            _ => Err(CliError::precondition("well-formed input", format!("bad dimension in {name:?}"))),
        },
        _ => Err(CliError::precondition("well-formed input", format!("unknown spectrum {name:?}"))),
    }
}
