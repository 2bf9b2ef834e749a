//! One function per subcommand; each returns the JSON document for stdout.

use std::path::Path;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use fhspec::diagnostics::{
    decay_classify_with, hypoellipticity_verdict_with, solvability_verdict_with, SCHEMA_VERSION,
};
use fhspec::exact::format_rational;
use fhspec::io::{read_data_vector, read_field, write_data_vector, write_field, write_two_column};
use fhspec::liouville::ContinuedFraction;
use fhspec::solver::{division_field, solve_with};
use fhspec::spectral::torus_point;
use fhspec::{
    apply_system, compat_integral, conjugation_residual, counterexample_pair, exp_liouville_test, psi_apply, reconstruct,
    reduce_system, resonance_exact, vector_coordinate_test, weight, weyl_fit, zero_set_flagged, Bounds, Direction,
    EigenProvider, Flavor, ModeIndex, NormalFormMap, SpaceParams, SpectralField,
};

use crate::config::{self, artifact, input, RunConfig};
use crate::{CliError, Command, DirectionArg, FlavorArg, GridArgs, ThresholdArgs};

type Out = Result<Value, CliError>;

/// Largest grid a witness scan visits mode by mode.
const SCAN_LIMIT: u128 = 8_000_000;

pub fn dispatch(command: Command, out_dir: &Path) -> Out {
    match command {
        Command::Symbol { spec, tau, j } => symbol(&spec, tau, j),
        Command::ZeroSet { spec, grid } => zero_set(&spec, &grid, out_dir),
        Command::CheckHypo { spec, grid, thresholds } => verdict(&spec, &grid, &thresholds, out_dir, true),
        Command::CheckSolv { spec, grid, thresholds } => verdict(&spec, &grid, &thresholds, out_dir, false),
        Command::Apply { spec, field, stem } => apply(&spec, &field, &stem, out_dir),
        Command::Solve { spec, data, kernel, thresholds, stem } => {
            solve(&spec, &data, kernel.as_deref(), &thresholds, &stem, out_dir)
        }
        Command::Counterexample { spec, flavor, witnesses, eps, grid, thresholds, stem } => {
            counterexample(&spec, flavor, witnesses.as_deref(), eps, &grid, &thresholds, &stem, out_dir)
        }
        Command::DecayFit { field, spec, thresholds } => decay_fit(&field, spec.as_deref(), &thresholds, out_dir),
        Command::Liouville { rule, quotients, sigma, depth } => liouville(&rule, &quotients, sigma, depth, out_dir),
        Command::Weyl { spec, eigen, j0, j1 } => weyl(spec.as_deref(), &eigen, j0, j1, out_dir),
        Command::NormalForm { spec, grid, nt, reduced, compat, r } => {
            normal_form(&spec, &grid, &nt, reduced.as_deref(), compat.as_deref(), r)
        }
        Command::Psi { spec, field, direction, nt, stem } => psi(&spec, &field, direction, &nt, &stem, out_dir),
        Command::Reconstruct { field, spec, t_points, x_min, x_max, x_count, stem } => {
            reconstruct_cmd(&field, spec.as_deref(), &t_points, x_min, x_max, x_count, &stem, out_dir)
        }
    }
}

/// `{schemaVersion, command, …fields of value}`.
fn document(command: &str, value: impl Serialize) -> Out {
    let mut map = match serde_json::to_value(value).map_err(|e| CliError::Internal(e.to_string()))? {
        Value::Object(map) => map,
        other => {
            let mut map = Map::new();
            map.insert("result".into(), other);
            map
        }
    };
    map.insert("schemaVersion".into(), json!(SCHEMA_VERSION));
    map.insert("command".into(), json!(command));
    Ok(Value::Object(map))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn symbol(spec_path: &Path, tau: Vec<i64>, j: u64) -> Out {
    let (spec, _) = config::system(spec_path)?;
    if tau.len() != spec.params.m {
        return Err(CliError::precondition("one tau per time axis", format!("got {} values for m = {}", tau.len(), spec.params.m)));
    }
    let mode = ModeIndex::new(tau, j);
    let lambda = spec.lambda(j)?;
    let symbols = (0..spec.len())
        .map(|r| {
            let v = spec.symbol_value(r, &mode)?;
            let exact = spec.symbol_exact(r, &mode)?.map(|e| e.to_string());
            Ok(json!({ "r": r, "re": v.value.re, "im": v.value.im, "zero": v.zero, "exact": exact }))
        })
        .collect::<fhspec::Result<Vec<_>>>()?;
    let sv = spec.system_value(&mode)?;
    let norm_sq = spec.system_norm_sqr_exact(&mode)?.map(|r| format_rational(&r));
    document(
        "symbol",
        json!({
            "mode": mode,
            "lambda": lambda.value,
            "lambdaExact": lambda.exact.as_ref().map(format_rational),
            "weight": weight::<f64>(&spec.params, &mode),
            "symbols": symbols,
            "norm": sv.norm,
            "normSquaredExact": norm_sq,
            "rStar": sv.r_star,
            "zero": sv.zero,
        }),
    )
}

fn run_config(
    spec_path: &Path,
    cfg: &fhspec::io::SystemConfig,
    m: usize,
    grid: &GridArgs,
    thresholds: &ThresholdArgs,
    out_dir: &Path,
) -> Result<RunConfig, CliError> {
    RunConfig::merge(Some(spec_path), m, cfg.grid.as_ref(), cfg.thresholds.as_ref(), grid, thresholds, out_dir)
}

fn zero_set(spec_path: &Path, grid: &GridArgs, out_dir: &Path) -> Out {
    let (spec, cfg) = config::system(spec_path)?;
    let run = run_config(spec_path, &cfg, spec.params.m, grid, &ThresholdArgs::default(), out_dir)?;
    let bounds = run.bounds()?;
    let (modes, float_zeros) = zero_set_flagged(&spec, bounds)?;
    document(
        "zero-set",
        json!({
            "bounds": bounds,
            "resonance": resonance_exact(&spec),
            "count": modes.len(),
            "floatDecisions": float_zeros,
            "modes": modes,
        }),
    )
}

fn verdict(spec_path: &Path, grid: &GridArgs, thresholds: &ThresholdArgs, out_dir: &Path, hypo: bool) -> Out {
    let (spec, cfg) = config::system(spec_path)?;
    let run = run_config(spec_path, &cfg, spec.params.m, grid, thresholds, out_dir)?;
    let bounds = run.bounds()?;
    let v = if hypo {
        hypoellipticity_verdict_with(&spec, bounds, run.shells, &run.thresholds)?
    } else {
        solvability_verdict_with(&spec, bounds, run.shells, &run.thresholds)?
    };
    let rows: Vec<(f64, f64)> = v.report.shell_eps.iter().map(|s| (s.radius, s.eps_hat)).collect();
    let csv = run.artifact(&format!("{}_shells.csv", v.property))?;
    write_two_column(&csv, ["R", "epsHat"], &rows)?;
    document(if hypo { "check-hypo" } else { "check-solv" }, &v)
}

fn apply(spec_path: &Path, field_path: &Path, stem: &str, out_dir: &Path) -> Out {
    let (spec, _) = config::system(spec_path)?;
    let (u, _) = input(field_path, read_field::<f64>)?;
    let f = apply_system(&spec, &u)?;
    artifact(out_dir, "")?;
    let manifest = write_data_vector(&f, Some(&spec.params), out_dir, stem)?;
    document("apply", json!({ "components": f.len(), "manifest": path_str(&manifest), "bounds": f.bounds() }))
}

fn solve(spec_path: &Path, data: &Path, kernel: Option<&Path>, thresholds: &ThresholdArgs, stem: &str, out_dir: &Path) -> Out {
    let (spec, cfg) = config::system(spec_path)?;
    let run = run_config(spec_path, &cfg, spec.params.m, &GridArgs::default(), thresholds, out_dir)?;
    let f = input(data, read_data_vector::<f64>)?;
    let kernel = kernel.map(|k| input(k, read_field::<f64>).map(|(k, _)| k)).transpose()?;
    let (u, report) = solve_with(&spec, &f, kernel.as_ref(), run.thresholds.admissibility_tol)?;
    let path = run.artifact(&format!("{stem}.csv"))?;
    write_field(&u, Some(&spec.params), &path)?;
    document("solve", json!({ "solution": path_str(&path), "report": report }))
}

fn read_witnesses(path: &Path, m: usize) -> Result<Vec<ModeIndex>, CliError> {
    input(path, |p| {
        let mut r = csv::Reader::from_path(p)?;
        let mut out = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != m + 1 {
                return Err(fhspec::Error::Shape(format!("witness row {} has {} columns, expected {}", i + 2, rec.len(), m + 1)));
            }
            let bad = |what: &str| fhspec::Error::Parse(format!("witness row {}: bad {what}", i + 2));
            let tau = (0..m).map(|k| rec[k].trim().parse::<i64>().map_err(|_| bad("tau"))).collect::<fhspec::Result<Vec<_>>>()?;
            let j = rec[m].trim().parse::<u64>().map_err(|_| bad("j"))?;
            out.push(ModeIndex::new(tau, j));
        }
        Ok(out)
    })
}

#[allow(clippy::too_many_arguments)]
fn counterexample(
    spec_path: &Path,
    flavor: FlavorArg,
    witnesses: Option<&Path>,
    eps: Option<f64>,
    grid: &GridArgs,
    thresholds: &ThresholdArgs,
    stem: &str,
    out_dir: &Path,
) -> Out {
    let (spec, cfg) = config::system(spec_path)?;
    let run = run_config(spec_path, &cfg, spec.params.m, grid, thresholds, out_dir)?;
    let bounds = run.bounds()?;
    let eps = eps.unwrap_or(run.thresholds.delta1);
    if !(eps.is_finite() && eps > 0.0) {
        return Err(CliError::precondition("positive eps", format!("eps = {eps}")));
    }
    let witnesses = match witnesses {
        Some(p) => read_witnesses(p, spec.params.m)?,
        None => {
            if bounds.len() > SCAN_LIMIT {
                return Err(fhspec::Error::GridTooLarge(format!("witness scan visits {} modes, limit {SCAN_LIMIT}", bounds.len())).into());
            }
            let mut found = Vec::new();
            for mode in bounds.modes() {
                let (norm, _) = spec.system_norm_argmax(&mode)?;
                if norm > 0.0 && norm < (-eps * weight::<f64>(&spec.params, &mode)).exp() {
                    found.push(mode);
                }
            }
            found
        }
    };
    let flavor = match flavor {
        FlavorArg::Gh => Flavor::GH,
        FlavorArg::Gs => Flavor::GS,
    };
    let (f, u) = counterexample_pair(&spec, bounds, &witnesses, flavor)?;
    artifact(out_dir, "")?;
    let manifest = write_data_vector(&f, Some(&spec.params), out_dir, stem)?;
    let (solution, candidate) = match &u {
        Some(u) => {
            let p = run.artifact(&format!("{stem}_u.csv"))?;
            write_field(u, Some(&spec.params), &p)?;
            (Some(path_str(&p)), None)
        }
        None => {
            // the only candidate, f̂/σ, for inspection with decay-fit
            let d = division_field(&spec, &f)?;
            let p = run.artifact(&format!("{stem}_division.csv"))?;
            write_field(&d, Some(&spec.params), &p)?;
            (None, Some(path_str(&p)))
        }
    };
    document(
        "counterexample",
        json!({
            "flavor": flavor,
            "eps": eps,
            "witnesses": witnesses,
            "manifest": path_str(&manifest),
            "solution": solution,
            "divisionField": candidate,
        }),
    )
}

fn decay_fit(field_path: &Path, spec: Option<&Path>, thresholds: &ThresholdArgs, out_dir: &Path) -> Out {
    let (field, sidecar_params) = input(field_path, read_field::<f64>)?;
    let (params, file_thresholds) = match (sidecar_params, spec) {
        (_, Some(s)) => {
            let (spec, cfg) = config::system(s)?;
            (spec.params, cfg.thresholds)
        }
        (Some(p), None) => (p, None),
        (None, None) => {
            return Err(CliError::precondition("weight parameters", "the field sidecar has no params; pass --spec"))
        }
    };
    let run = RunConfig::merge(spec, params.m, None, file_thresholds.as_ref(), &GridArgs::default(), thresholds, out_dir)?;
    let v = decay_classify_with(&field, &params, &run.thresholds)?;
    write_two_column(&run.artifact("decay_profile.csv")?, ["weight", "negLogAbs"], &v.profile.points)?;
    document("decay-fit", &v)
}

fn liouville(rules: &[String], quotients: &[String], sigma: f64, depth: usize, out_dir: &Path) -> Out {
    let mut cfs = rules.iter().map(|r| ContinuedFraction::parse_rule(r)).collect::<fhspec::Result<Vec<_>>>()?;
    if !quotients.is_empty() {
        let q = quotients
            .iter()
            .map(|s| s.trim().parse().map_err(|_| fhspec::Error::Parse(format!("bad partial quotient {s:?}"))))
            .collect::<fhspec::Result<Vec<_>>>()?;
        cfs.push(ContinuedFraction::finite(q)?);
    }
    match cfs.len() {
        0 => Err(CliError::precondition("a continued fraction", "pass --rule or --quotients")),
        1 => {
            let report = exp_liouville_test(&cfs[0], sigma, depth)?;
            let rows: Vec<(f64, f64)> = report.depths.iter().map(|d| (d.k as f64, d.eps_hat)).collect();
            write_two_column(&artifact(out_dir, "liouville_eps.csv")?, ["k", "epsHat"], &rows)?;
            document("liouville", &report)
        }
        _ => {
            let verdict = vector_coordinate_test(&cfs, sigma, depth)?;
            let coords = cfs.iter().map(|cf| exp_liouville_test(cf, sigma, depth)).collect::<fhspec::Result<Vec<_>>>()?;
            let mut doc = document("liouville", &verdict)?;
            doc["coordinates"] = serde_json::to_value(coords).map_err(|e| CliError::Internal(e.to_string()))?;
            Ok(doc)
        }
    }
}

fn weyl(spec: Option<&Path>, eigen: &str, j0: u64, j1: u64, out_dir: &Path) -> Out {
    let provider = match spec {
        Some(p) => config::eigen(p)?,
        None => config::named_eigen(eigen)?,
    };
    let fit = weyl_fit(&provider, j0, j1)?;
    // log-spaced samples of the fitted range
    let mut rows = Vec::new();
    let mut last = None;
    for i in 0..=200 {
        let j = (j0.max(1) as f64 * ((j1.max(1) as f64) / j0.max(1) as f64).powf(i as f64 / 200.0)).round() as u64;
        let j = j.clamp(j0, j1);
        if last == Some(j) {
            continue;
        }
        last = Some(j);
        let lam = provider.eigenvalue_f64(j)?;
        rows.push((((j + 1) as f64).ln(), lam.abs().ln()));
    }
    write_two_column(&artifact(out_dir, "weyl.csv")?, ["logJ", "logLambda"], &rows)?;
    document("weyl", &fit)
}

fn normal_form(spec_path: &Path, grid: &GridArgs, nt: &[usize], reduced: Option<&Path>, compat: Option<&Path>, r: usize) -> Out {
    let (sys, cfg) = config::time_system(spec_path)?;
    sys.check_regularity()?;
    let m = sys.params.m;
    let reduced_cfg = cfg.reduced(&sys);
    let reduced_spec = reduce_system::<f64>(&sys)?;
    let run = RunConfig::merge(Some(spec_path), m, cfg.grid.as_ref(), None, grid, &ThresholdArgs::default(), Path::new("."))?;
    let nt = (!nt.is_empty()).then_some(nt);
    let mut doc = Map::new();
    doc.insert("averages".into(), json!(sys.coeffs.averages()));
    doc.insert(
        "exactAverages".into(),
        json!(sys.coeffs.coeffs.iter().map(|a| a.constant_exact.as_ref().map(format_rational)).collect::<Vec<_>>()),
    );
    doc.insert("reducedExact".into(), json!(reduced_spec.is_exact()));
    doc.insert("resonance".into(), json!(resonance_exact(&reduced_spec)));
    if let Some(path) = reduced {
        let text = reduced_cfg.to_toml()?;
        std::fs::write(path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
        doc.insert("reducedConfig".into(), json!(path_str(path)));
    }
    if let Some(bounds) = &run.bounds {
        let grid = match nt {
            Some(g) => g.to_vec(),
            None => sys.default_grid(bounds)?,
        };
        doc.insert("map".into(), json!(NormalFormMap::build(&sys.coeffs, &grid)?));
        let test = test_field(bounds, &sys.params);
        doc.insert("conjugation".into(), json!(conjugation_residual(&sys, &test, Some(&grid))?));
        if let Some(path) = compat {
            let (f, _) = input(path, read_field::<f64>)?;
            let js = f.bounds().j_max().map_or(0, |j| j + 1);
            let values = (0..js)
                .map(|j| Ok(json!({ "j": j, "value": compat_integral(&sys, r, j, &f, Some(&grid))? })))
                .collect::<fhspec::Result<Vec<_>>>()?;
            doc.insert("compat".into(), json!({ "r": r, "integrals": values }));
        }
    } else if compat.is_some() {
        return Err(CliError::precondition("grid bounds", "compatibility integrals need --tau-max and --j-max"));
    }
    document("normal-form", Value::Object(doc))
}

/// Seeded test field with `exp(−weight)` moduli on the inner half of the grid.
fn test_field(bounds: &Bounds, params: &SpaceParams) -> SpectralField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    SpectralField::from_fn(bounds.clone(), |md| {
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let inner = md.tau.iter().zip(bounds.tau_max()).all(|(t, m)| 4 * t.abs() <= *m);
        if inner {
            Complex::from_polar((-weight::<f64>(params, md)).exp(), phase)
        } else {
            Complex::new(0.0, 0.0)
        }
    })
}

fn psi(spec_path: &Path, field_path: &Path, direction: DirectionArg, nt: &[usize], stem: &str, out_dir: &Path) -> Out {
    let (sys, _) = config::time_system(spec_path)?;
    let (u, _) = input(field_path, read_field::<f64>)?;
    let direction = match direction {
        DirectionArg::Forward => Direction::Forward,
        DirectionArg::Inverse => Direction::Inverse,
    };
    let res = psi_apply(direction, &u, &sys, (!nt.is_empty()).then_some(nt))?;
    let path = artifact(out_dir, &format!("{stem}.csv"))?;
    write_field(&res.field, Some(&sys.params), &path)?;
    document(
        "psi",
        json!({
            "direction": direction,
            "output": path_str(&path),
            "grid": res.grid,
            "truncated": res.truncated,
            "aliasBand": res.alias_band,
        }),
    )
}

#[allow(clippy::too_many_arguments)]
fn reconstruct_cmd(
    field_path: &Path,
    spec: Option<&Path>,
    t_points: &[usize],
    x_min: f64,
    x_max: f64,
    x_count: usize,
    stem: &str,
    out_dir: &Path,
) -> Out {
    let (field, _) = input(field_path, read_field::<f64>)?;
    let basis = match spec {
        Some(p) => config::eigen(p)?,
        None => EigenProvider::Harmonic1D,
    };
    let m = field.bounds().m();
    let t_shape = match t_points.len() {
        1 => vec![t_points[0]; m],
        k if k == m => t_points.to_vec(),
        k => return Err(CliError::precondition("one t-points value per time axis", format!("got {k} for m = {m}"))),
    };
    if x_count == 0 || t_shape.contains(&0) || !(x_min.is_finite() && x_max.is_finite() && x_min <= x_max) {
        return Err(CliError::precondition("nonempty sample grids", "need x-count ≥ 1, t-points ≥ 1 and x-min ≤ x-max"));
    }
    let n = basis.n();
    let axis: Vec<f64> = (0..x_count)
        .map(|i| if x_count == 1 { x_min } else { x_min + (x_max - x_min) * i as f64 / (x_count - 1) as f64 })
        .collect();
    let total = x_count.checked_pow(n as u32).filter(|&t| t <= 1_000_000).ok_or_else(|| {
        CliError::precondition("sample grid size", format!("{x_count}^{n} spatial points exceed 10^6"))
    })?;
    let xs: Vec<Vec<f64>> = (0..total)
        .map(|mut flat| {
            let mut x = vec![0.0; n];
            for slot in x.iter_mut().rev() {
                *slot = axis[flat % x_count];
                flat /= x_count;
            }
            x
        })
        .collect();
    let rec = reconstruct(&field, &t_shape, &xs, &basis)?;
    let path = artifact(out_dir, &format!("{stem}.csv"))?;
    let write = || -> fhspec::Result<()> {
        let mut w = csv::Writer::from_path(&path)?;
        let mut header: Vec<String> = (1..=m).map(|k| format!("t_{k}")).collect();
        header.extend((1..=n).map(|k| format!("x_{k}")));
        header.extend(["re".to_string(), "im".to_string()]);
        w.write_record(&header)?;
        let t_total: usize = t_shape.iter().product();
        for ti in 0..t_total {
            let t: Vec<f64> = torus_point(&t_shape, ti);
            for (xi, x) in xs.iter().enumerate() {
                let v = rec.at(ti, xi);
                let mut row: Vec<String> = t.iter().chain(x).map(f64::to_string).collect();
                row.push(v.re.to_string());
                row.push(v.im.to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    };
    write()?;
    let max_abs = rec.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    document("reconstruct", json!({ "output": path_str(&path), "tShape": t_shape, "xCount": x_count, "maxAbs": max_abs }))
}
