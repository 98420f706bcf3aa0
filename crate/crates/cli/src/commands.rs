use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sysweyl_core::asymptotics::{time_reverse, AsymptoticCoeffs, CoeffOptions, SphereRule};
use sysweyl_core::brackets::REAL_TOL;
use sysweyl_core::eigen::{DEGENERACY_TOL, ZERO_TOL};
use sysweyl_core::flow::{self, FlowOptions, LoopReport};
use sysweyl_core::identities::{is_differential, run_identities, IdentityOptions};
use sysweyl_core::symbol::{load_spec, OperatorSpec};
use sysweyl_core::torus::{self, Mollifier, Spectrum, ZERO_MODE_TOL};
use sysweyl_core::{Error, Result};

use crate::manifest::{RunManifest, Sink};
use crate::{Command, Outcome};

const MOLLIFIER_GRID: usize = 1 << 16;
const LOOP_DIRECTIONS: usize = 64;
const LOOP_TOL: f64 = 1e-6;
const VERIFY_POINTS: usize = 200;

fn load(path: &Path) -> Result<(Vec<u8>, OperatorSpec)> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Validation {
        field: "config".into(),
        reason: "not valid UTF-8".into(),
    })?;
    let spec = load_spec(&text)?;
    Ok((bytes, spec))
}

fn default_grid(n: usize) -> usize {
    if n == 2 {
        16
    } else {
        8
    }
}

fn manifest(command: &str, bytes: &[u8], spec: &OperatorSpec) -> RunManifest {
    RunManifest::new(command, bytes, &spec.name)
        .tol("eigen_degeneracy", DEGENERACY_TOL)
        .tol("eigen_zero", ZERO_TOL)
        .tol("imaginary_residue", REAL_TOL)
}

pub fn run(cmd: Command) -> Result<Outcome> {
    let start = Instant::now();
    let (man, sink, outcome) = match cmd {
        Command::Coeffs { common, grid, sphere_order, drop_curvature } => {
            let (bytes, spec) = load(&common.config)?;
            let order = sphere_order.unwrap_or(SphereRule::default_order(spec.n()));
            let grid = grid.unwrap_or(default_grid(spec.n()));
            let opts = CoeffOptions { include_curvature: !drop_curvature };
            let c = AsymptoticCoeffs::compute(&spec, grid, order, opts)?;
            log::info!("{}: a_global = {:.15e}, b_global = {:.15e}", spec.name, c.a_global, c.b_global);
            let man = manifest("coeffs", &bytes, &spec)
                .opt("grid", grid)
                .opt("sphere_order", order)
                .opt("include_curvature", opts.include_curvature);
            let mut sink = Sink::new(common.out);
            sink.main(&man.wrap_json("coeffs", &c))?;
            (man, sink, Outcome::Passed)
        }
        Command::Identities { common, samples, seed, tol, sphere_order, drop_curvature } => {
            let (bytes, spec) = load(&common.config)?;
            let opts = IdentityOptions {
                samples,
                seed,
                tol,
                sphere_order,
                coeffs: CoeffOptions { include_curvature: !drop_curvature },
                ..IdentityOptions::default()
            };
            let report = run_identities(&spec, &opts)?;
            let mut man = manifest("identities", &bytes, &spec)
                .seed("points", seed)
                .opt("samples", samples)
                .opt("coeff_points", opts.coeff_points)
                .opt("sphere_order", sphere_order.unwrap_or(SphereRule::default_order(spec.n())))
                .opt("include_curvature", !drop_curvature);
            for c in &report.checks {
                man = man.tol(&c.name, c.tol);
                match &c.skipped {
                    Some(why) => eprintln!("skip  {:<20} {why}", c.name),
                    None => eprintln!(
                        "{}  {:<20} max residual {:.3e} (tol {:.0e})",
                        if c.passed { "pass" } else { "FAIL" },
                        c.name,
                        c.max_residual,
                        c.tol
                    ),
                }
            }
            let mut sink = Sink::new(common.out);
            sink.main(&man.wrap_json("report", &report))?;
            (man, sink, if report.all_passed { Outcome::Passed } else { Outcome::Failed })
        }
        Command::Flow { common, j, point, t_end, tol } => {
            let (bytes, spec) = load(&common.config)?;
            let n = spec.n();
            if point.len() != 2 * n {
                return Err(Error::Validation {
                    field: "point".into(),
                    reason: format!("expected {} values (x then xi), got {}", 2 * n, point.len()),
                });
            }
            let opts = FlowOptions::with_tol(tol);
            let traj = flow::integrate(&spec, j, &point[..n], &point[n..], t_end, opts)?;
            log::info!("{} accepted steps, energy drift {:.3e}", traj.samples.len(), traj.energy_drift(&spec)?);
            let man = manifest("flow", &bytes, &spec)
                .tol("ode_local_error", tol)
                .opt("j", j)
                .opt("point", &point)
                .opt("t_end", t_end)
                .opt("max_step", opts.max_step);
            let mut text = man.csv_header();
            let mut body = Vec::new();
            traj.write_csv(&mut body)?;
            text.push_str(&String::from_utf8_lossy(&body));
            let mut sink = Sink::new(common.out);
            sink.main(&text)?;
            (man, sink, Outcome::Passed)
        }
        Command::Loops { common, point, j, grid, t_end, tol, periodic } => {
            let (bytes, spec) = load(&common.config)?;
            let y = point.unwrap_or_else(|| vec![0.0; spec.n()]);
            if y.len() != spec.n() {
                return Err(Error::Validation {
                    field: "point".into(),
                    reason: format!("expected {} values, got {}", spec.n(), y.len()),
                });
            }
            let branches = match j {
                Some(j) => vec![j],
                None => spec.positive_branches()?,
            };
            let opts = FlowOptions::default();
            let mut found = Vec::new();
            for &b in &branches {
                if periodic {
                    found.extend(flow::find_periodic(&spec, b, std::slice::from_ref(&y), grid, t_end, tol, opts)?);
                } else {
                    found.push(flow::find_loops(&spec, b, &y, grid, t_end, tol, opts)?);
                }
            }
            let report = LoopReport::new(t_end, tol, found);
            match report.shortest {
                Some(t) => log::info!("shortest {} {t:.10}", if periodic { "period" } else { "loop" }),
                None => log::info!("no return found up to t = {t_end}"),
            }
            let man = manifest("loops", &bytes, &spec)
                .tol("loop", tol)
                .tol("ode_local_error", opts.tol)
                .opt("point", &y)
                .opt("branches", &branches)
                .opt("directions", grid)
                .opt("t_max", t_end)
                .opt("periodic", periodic);
            let mut sink = Sink::new(common.out);
            sink.main(&man.wrap_json("loops", &report))?;
            (man, sink, Outcome::Passed)
        }
        Command::Verify { common, k, lambda_max, mollifier_width, force, grid, sphere_order, seed } => {
            let (bytes, spec) = load(&common.config)?;
            verify(&bytes, &spec, common.out, k, lambda_max, mollifier_width, force, grid, sphere_order, seed)?
        }
        Command::Asym { common, grid, sphere_order, tol, k } => {
            let (bytes, spec) = load(&common.config)?;
            asym(&bytes, &spec, common.out, grid, sphere_order, tol, k)?
        }
    };
    sink.finish(&man, start.elapsed().as_secs_f64())?;
    Ok(outcome)
}

/// Shortest loop over a few base points and all positive branches; `None`
/// when nothing returns before `t_max`.
fn shortest_loop(spec: &OperatorSpec, t_max: f64) -> Result<Option<f64>> {
    let n = spec.n();
    let mut bases: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..n {
        bases = bases.into_iter().flat_map(|b| [0.0, PI].map(|v| [b.clone(), vec![v]].concat())).collect();
    }
    let mut best: Option<f64> = None;
    for j in spec.positive_branches()? {
        for y in &bases {
            let bl = flow::find_loops(spec, j, y, LOOP_DIRECTIONS, t_max, LOOP_TOL, FlowOptions::default())?;
            if let Some(t) = bl.shortest {
                best = Some(best.map_or(t, |b| b.min(t)));
            }
        }
    }
    Ok(best)
}

#[derive(Serialize)]
struct VerifySummary {
    loop_length: f64,
    loop_found: bool,
    mollifier_width: f64,
    a_global: f64,
    b_global: f64,
    trust_lambda: f64,
    max_counting_residual: f64,
    max_mollified_residual: f64,
    max_truncation_tail: f64,
    fit_b: Option<f64>,
    fit_b_err: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn verify(
    bytes: &[u8],
    spec: &OperatorSpec,
    out: Option<std::path::PathBuf>,
    k: usize,
    lambda_max: f64,
    width: Option<f64>,
    force: bool,
    grid: Option<usize>,
    sphere_order: Option<usize>,
    seed: u64,
) -> Result<(RunManifest, Sink, Outcome)> {
    if !(lambda_max > 0.0) {
        return Err(Error::Validation { field: "lambda-max".into(), reason: "must be positive".into() });
    }
    let t_max = 3.0 * PI;
    let found = shortest_loop(spec, t_max)?;
    let loop_length = found.unwrap_or(t_max);
    match found {
        Some(t) => log::info!("shortest loop T = {t:.10}"),
        None => log::info!("no loop below t = {t_max:.6}; using it as the bound"),
    }
    let t0 = width.unwrap_or(0.9 * loop_length);
    if t0 >= loop_length {
        if !force {
            return Err(Error::SupportExceedsT { t0, loop_length });
        }
        log::warn!("mollifier width {t0} is not below the shortest loop {loop_length}; proceeding (--force)");
    }
    let moll = Mollifier::new(t0, MOLLIFIER_GRID, if force { f64::INFINITY } else { loop_length })?;
    let order = sphere_order.unwrap_or(SphereRule::default_order(spec.n()));
    let grid = grid.unwrap_or(default_grid(spec.n()));
    let coeffs = AsymptoticCoeffs::compute(spec, grid, order, CoeffOptions::default())?;
    let solve_start = Instant::now();
    let sample = torus::assemble_and_solve(spec, k, false)?;
    log::info!("Galerkin K={k}: {} eigenvalues in {:.2} s", sample.eigenvalues.len(), solve_start.elapsed().as_secs_f64());
    // cell midpoints keep integer-radius lattice eigenvalues off the counting edge
    let lambdas: Vec<f64> = (0..VERIFY_POINTS).map(|i| lambda_max * (i as f64 + 0.5) / VERIFY_POINTS as f64).collect();
    let rows = torus::comparison(&sample, &moll, coeffs.a_global, coeffs.b_global, spec.n(), &lambdas, true)?;
    let max_abs = |f: fn(&torus::ComparisonRow) -> f64| rows.iter().map(f).fold(0.0_f64, |m, v| m.max(v.abs()));
    let fit = if lambda_max - 1.0 >= 4.0 {
        Some(torus::weyl_fit(&sample, coeffs.a_global, spec.n(), 1.0, lambda_max, seed)?)
    } else {
        log::info!("fit skipped: [1, {lambda_max}] is shorter than 4");
        None
    };
    let summary = VerifySummary {
        loop_length,
        loop_found: found.is_some(),
        mollifier_width: t0,
        a_global: coeffs.a_global,
        b_global: coeffs.b_global,
        trust_lambda: sample.trusted_below(),
        max_counting_residual: max_abs(|r| r.counting as f64 - r.two_term),
        max_mollified_residual: max_abs(|r| r.residual),
        max_truncation_tail: max_abs(|r| r.truncation_tail),
        fit_b: fit.as_ref().map(|f| f.b),
        fit_b_err: fit.as_ref().map(|f| f.b_err),
    };
    log::info!("max |N - (a λ^n + b λ^(n-1))| = {:.6e}", summary.max_counting_residual);
    log::info!("max |mollified N - (a λ^n + b λ^(n-1))| = {:.6e}", summary.max_mollified_residual);
    if let Some(f) = &fit {
        log::info!("fitted b = {:.6} ± {:.2e} (coefficient b = {:.6})", f.b, f.b_err, coeffs.b_global);
    }
    let man = manifest("verify", bytes, spec)
        .seed("fit", seed)
        .tol("zero_mode", ZERO_MODE_TOL)
        .tol("fourier_band", torus::BAND_TOL)
        .tol("loop", LOOP_TOL)
        .opt("K", k)
        .opt("lambda_max", lambda_max)
        .opt("mollifier_width", t0)
        .opt("mollifier_grid", MOLLIFIER_GRID)
        .opt("force", force)
        .opt("grid", grid)
        .opt("sphere_order", order);
    let mut text = man.csv_header();
    text.push_str(&format!("# summary: {}\n", serde_json::to_string(&summary).expect("json")));
    let mut body = Vec::new();
    torus::write_comparison_csv(&rows, &mut body)?;
    text.push_str(&String::from_utf8_lossy(&body));
    let mut sink = Sink::new(out);
    sink.main(&text)?;
    let mut ev = man.csv_header();
    let mut body = Vec::new();
    sample.write_csv(&mut body)?;
    ev.push_str(&String::from_utf8_lossy(&body));
    if let Some(p) = sink.extra("eigenvalues.csv", &ev)? {
        log::info!("eigenvalues written to {}", p.display());
    }
    Ok((man, sink, Outcome::Passed))
}

#[derive(Serialize)]
struct AsymLine {
    name: &'static str,
    value: f64,
    reversed: f64,
    defect: f64,
    tol: f64,
    status: &'static str,
}

fn asym(
    bytes: &[u8],
    spec: &OperatorSpec,
    out: Option<std::path::PathBuf>,
    grid: Option<usize>,
    sphere_order: Option<usize>,
    tol: f64,
    k: Option<usize>,
) -> Result<(RunManifest, Sink, Outcome)> {
    let order = sphere_order.unwrap_or(SphereRule::default_order(spec.n()));
    let grid = grid.unwrap_or(default_grid(spec.n()));
    let rev = time_reverse(spec)?;
    let fwd = AsymptoticCoeffs::compute(spec, grid, order, CoeffOptions::default())?;
    let bwd = AsymptoticCoeffs::compute(&rev, grid, order, CoeffOptions::default())?;
    let differential = is_differential(spec)?;
    let pointwise = |p: &[f64], q: &[f64], sign: f64| p.iter().zip(q).fold(0.0_f64, |m, (u, v)| m.max((u - sign * v).abs()));
    let status = |d: f64| match (differential, d <= tol) {
        (false, _) => "info",
        (true, true) => "pass",
        (true, false) => "FAIL",
    };
    let da = pointwise(&fwd.a_density, &bwd.a_density, 1.0).max((fwd.a_global - bwd.a_global).abs());
    let db = pointwise(&fwd.b_density, &bwd.b_density, -1.0).max((fwd.b_global + bwd.b_global).abs());
    let mut lines = vec![
        AsymLine { name: "a=ã", value: fwd.a_global, reversed: bwd.a_global, defect: da, tol, status: status(da) },
        AsymLine { name: "b=−b̃", value: fwd.b_global, reversed: bwd.b_global, defect: db, tol, status: status(db) },
    ];
    if let Some(k) = k {
        let s = torus::assemble_and_solve(spec, k, false)?;
        let r = torus::assemble_and_solve(&rev, k, false)?;
        let mut neg: Vec<f64> = r.eigenvalues.iter().map(|v| -v).collect();
        neg.sort_by(f64::total_cmp);
        let d = s.eigenvalues.iter().zip(&neg).fold(0.0_f64, |m, (u, v)| m.max((u - v).abs()));
        let st = if d <= 1e-9 { "pass" } else { "FAIL" };
        lines.push(AsymLine { name: "spectrum(−A)=−spectrum(A)", value: f64::NAN, reversed: f64::NAN, defect: d, tol: 1e-9, status: st });
    }
    for l in &lines {
        println!("{} {} (defect {:.3e}, tol {:.0e})", l.name, l.status, l.defect, l.tol);
    }
    if !differential {
        println!("note: the reversal identity applies to differential operators; values reported only");
    }
    let failed = lines.iter().any(|l| l.status == "FAIL");
    let man = manifest("asym", bytes, spec)
        .tol("asymmetry", tol)
        .opt("grid", grid)
        .opt("sphere_order", order)
        .opt("K", k)
        .opt("differential", differential);
    let mut sink = Sink::new(out);
    if sink.path.is_some() {
        sink.main(&man.wrap_json("asymmetry", &lines))?;
    }
    Ok((man, sink, if failed { Outcome::Failed } else { Outcome::Passed }))
}
