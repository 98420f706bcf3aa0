//! Acceptance suite: one line per criterion, exit status 1 if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use sysweyl_core::asymptotics::{
    point_coeffs, time_reverse, unitary_conjugate, AsymptoticCoeffs, CoeffOptions, SphereRule,
};
use sysweyl_core::fixtures;
use sysweyl_core::flow::{self, FlowOptions};
use sysweyl_core::identities::{is_differential, random_points, run_identities, IdentityOptions};
use sysweyl_core::symbol::OperatorSpec;
use sysweyl_core::torus::{self, LatticeSpectrum, Mollifier};
use sysweyl_core::Result;

/// Worst `|mollified N − πλ²| / ln λ` over `λ ∈ [5, 40]` for the flat Dirac
/// lattice, recorded at the first green run (0.50019). Must not grow.
const MOLLIFIED_DIRAC_CONSTANT: f64 = 0.5002;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn sorted_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    max_abs(a.iter().zip(b).map(|(p, q)| p - q))
}

fn flat_dirac() -> Result<Outcome> {
    let t = Instant::now();
    let spec = fixtures::dirac();
    let rule = SphereRule::new(2, 256)?;
    let mut da: f64 = 0.0;
    let mut db: f64 = 0.0;
    for (x, _) in random_points(2, 8, 1) {
        let p = point_coeffs(&spec, &x, &rule, CoeffOptions::default())?;
        da = da.max((p.a - 1.0 / (4.0 * PI)).abs());
        db = db.max(p.b.abs());
    }
    let c = AsymptoticCoeffs::compute(&spec, 4, 256, CoeffOptions::default())?;
    let dg = (c.a_global - PI).abs();
    let el = secs(t);
    outcome(
        da < 1e-10 && db < 1e-10 && dg < 1e-9 && el < 1.0,
        format!("|a-1/(4π)|={da:.1e} |b|={db:.1e} |a_global-π|={dg:.1e} in {el:.2}s"),
    )
}

fn shifted_dirac() -> Result<Outcome> {
    let t = Instant::now();
    let c = AsymptoticCoeffs::compute(&fixtures::shifted_dirac(0.3), 4, 256, CoeffOptions::default())?;
    let db = (c.b_global + 1.8849556).abs();
    let exact_b = -2.0 * PI * 0.3;
    let lattice = LatticeSpectrum::shifted_dirac(0.3, 61.0);
    let fit = torus::weyl_fit(&lattice, PI, 2, 10.0, 60.0, 0)?;
    let rel = (fit.b - exact_b).abs() / exact_b.abs();
    let el = secs(t);
    outcome(
        db < 1e-8 && rel < 0.05 && el < 5.0,
        format!(
            "b_global={:.10} (|Δ|={db:.1e}); fit b={:.4}±{:.3} ({:.2}% off) in {el:.2}s",
            c.b_global,
            fit.b,
            fit.b_err,
            100.0 * rel
        ),
    )
}

fn unitary_invariance(info: &mut Vec<String>) -> Result<Outcome> {
    let t = Instant::now();
    let base = fixtures::variable_dirac();
    let conj = unitary_conjugate(&base, &fixtures::sigma3_rotation())?;
    let opts = CoeffOptions::default();
    let b0 = AsymptoticCoeffs::compute(&base, 16, 256, opts)?;
    let b1 = AsymptoticCoeffs::compute(&conj, 16, 256, opts)?;
    let dropped = AsymptoticCoeffs::compute(&conj, 16, 256, CoeffOptions { include_curvature: false })?;
    let inv = (b0.b_global - b1.b_global).abs();
    let curv = max_abs(b1.b_terms.curvature.iter().copied());
    let shift = (dropped.b_global - b1.b_global).abs();
    let el = secs(t);
    // the σ3 rotation of the constant-coefficient operator keeps the curvature at zero
    let flat = fixtures::conjugated_shifted_dirac();
    let fc = AsymptoticCoeffs::compute(&flat, 8, 256, opts)?;
    info.push(format!(
        "conjugated shifted dirac: b_global={:.10} (Δ={:.1e}), max|curvature term|={:.1e}",
        fc.b_global,
        (fc.b_global + 2.0 * PI * 0.3).abs(),
        max_abs(fc.b_terms.curvature.iter().copied())
    ));
    outcome(
        inv < 1e-6 && curv > 1e-3 && shift > 1e-3 && el < 10.0,
        format!("|Δb|={inv:.1e}, max|curvature term|={curv:.3e}, dropping it moves b by {shift:.3e}, in {el:.2}s"),
    )
}

fn identity_fixtures() -> Vec<OperatorSpec> {
    vec![
        fixtures::variable_dirac(),
        fixtures::conjugated_variable_dirac(),
        fixtures::weyl_spatial(),
        fixtures::spin1_planar(),
        fixtures::spin1_spatial(),
    ]
}

fn check_residual(report: &sysweyl_core::identities::IdentityReport, name: &str) -> (f64, bool) {
    let c = report.checks.iter().find(|c| c.name == name).expect("check present");
    (c.max_residual, c.passed)
}

fn trace_formula(reports: &[sysweyl_core::identities::IdentityReport]) -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in reports {
        let (tr, p1) = check_residual(r, "trace_formula");
        let (rt, p2) = check_residual(r, "trace_routes");
        ok &= p1 && p2 && tr < 1e-9 && rt < 1e-7;
        parts.push(format!("{}: {tr:.1e}/{rt:.1e}", r.operator));
    }
    outcome(ok, format!("residual/routes at 200 points; {}", parts.join(", ")))
}

fn identity_suite(reports: &[sysweyl_core::identities::IdentityReport]) -> Result<Outcome> {
    let names = [
        ("curvature_sum", 1e-10),
        ("u_minus1_sum", 1e-12),
        ("u0_sum", 1e-12),
        ("euler_identity", 1e-10),
        ("gauge_residue", 1e-10),
    ];
    let mut ok = true;
    let mut worst = Vec::new();
    for (name, tol) in names {
        let w = reports.iter().map(|r| check_residual(r, name)).fold((0.0_f64, true), |(m, p), (v, q)| (m.max(v), p && q));
        ok &= w.1 && w.0 < tol;
        worst.push(format!("{name}={:.1e}", w.0));
    }
    outcome(ok, format!("worst over {} fixtures: {}", reports.len(), worst.join(" ")))
}

fn transport() -> Result<Outcome> {
    let opts = FlowOptions::with_tol(1e-12);
    let (mut drift, mut res, mut norm) = (0.0_f64, 0.0_f64, 0.0_f64);
    let fx = fixtures::all();
    for (f, spec) in fx.iter().enumerate() {
        let branches = spec.branches()?;
        for (i, (y, eta)) in random_points(spec.n(), 50, 100 + f as u64).into_iter().enumerate() {
            let j = branches[i % branches.len()];
            let traj = flow::integrate(spec, j, &y, &eta, 10.0, opts)?;
            drift = drift.max(traj.energy_drift(spec)?);
            let (r, nd) = traj.transport_residuals(spec)?;
            res = res.max(r);
            norm = norm.max(nd);
        }
    }
    outcome(
        drift < 1e-10 && res < 1e-8 && norm < 1e-8,
        format!("{} fixtures x 50: |h drift|={drift:.1e}, (A1-h)u0={res:.1e}, ‖u0‖ dev={norm:.1e}", fx.len()),
    )
}

fn asymmetry(info: &mut Vec<String>) -> Result<Outcome> {
    let mut ok = true;
    let (mut da, mut db) = (0.0_f64, 0.0_f64);
    let mut count = 0;
    for spec in fixtures::all() {
        let rev = time_reverse(&spec)?;
        let rule = SphereRule::new(spec.n(), SphereRule::default_order(spec.n()))?;
        let (mut sa, mut sb) = (0.0_f64, 0.0_f64);
        for (x, _) in random_points(spec.n(), 4, 3) {
            let p = point_coeffs(&spec, &x, &rule, CoeffOptions::default())?;
            let q = point_coeffs(&rev, &x, &rule, CoeffOptions::default())?;
            sa = sa.max((p.a - q.a).abs());
            sb = sb.max((p.b + q.b).abs());
        }
        if is_differential(&spec)? {
            count += 1;
            da = da.max(sa);
            db = db.max(sb);
            ok &= sa < 1e-10 && sb < 1e-10;
        } else {
            info.push(format!("{} (not differential): |a-ã|={sa:.3e} |b+b̃|={sb:.3e}", spec.name));
        }
    }
    let mut spec_gap: f64 = 0.0;
    for spec in fixtures::planar_torus() {
        let s = torus::assemble_and_solve(&spec, 12, false)?;
        let r = torus::assemble_and_solve(&time_reverse(&spec)?, 12, false)?;
        let mut neg: Vec<f64> = r.eigenvalues.iter().map(|v| -v).collect();
        neg.sort_by(f64::total_cmp);
        spec_gap = spec_gap.max(sorted_distance(&s.eigenvalues, &neg));
    }
    ok &= spec_gap < 1e-9;
    outcome(
        ok,
        format!("{count} differential fixtures: |a-ã|={da:.1e} |b+b̃|={db:.1e}; Galerkin K=12 spectra of A, -A: {spec_gap:.1e}"),
    )
}

fn mollified_weyl() -> Result<Outcome> {
    let t = Instant::now();
    let moll = Mollifier::new(0.9 * 2.0 * PI, 1 << 16, 2.0 * PI)?;
    let exact = LatticeSpectrum::shifted_dirac(0.0, 40.0 + moll.tail_width(1e-10));
    let mut worst: f64 = 0.0;
    for i in 0..=700 {
        let lam = 5.0 + 0.05 * i as f64;
        let v = torus::mollified_counting(&exact, &moll, lam)?.value;
        worst = worst.max((v - PI * lam * lam).abs() / lam.ln());
    }
    let el = secs(t);
    outcome(
        worst <= MOLLIFIED_DIRAC_CONSTANT && el < 10.0,
        format!("max |mollified N - πλ²|/ln λ = {worst:.5} (frozen {MOLLIFIED_DIRAC_CONSTANT}) in {el:.2}s"),
    )
}

fn galerkin() -> Result<Outcome> {
    let t = Instant::now();
    let ss = torus::assemble_and_solve(&fixtures::dirac(), 12, false)?;
    let el = secs(t);
    // radius 6 is itself a lattice shell; no |k| lies in (√35, 6)
    let exact = LatticeSpectrum::shifted_dirac(0.0, 5.95);
    let d = sorted_distance(&ss.below(5.95), &exact.eigenvalues);
    let zeros = exact.eigenvalues.iter().filter(|v| v.abs() < 1e-12).count();
    let conj = torus::assemble_and_solve(&fixtures::conjugated_shifted_dirac(), 14, false)?;
    let shifted = LatticeSpectrum::shifted_dirac(0.3, 5.95);
    let dc = sorted_distance(&conj.below(5.95), &shifted.eigenvalues);
    outcome(
        d < 1e-9 && zeros == 2 && dc < 1e-9 && el < 60.0,
        format!("dim {}: Dirac multiset {d:.1e}, conjugated (K=14) {dc:.1e}, solve {el:.2}s", ss.eigenvalues.len()),
    )
}

fn main() {
    let mut info = Vec::new();
    let mut rows: Vec<(usize, &str, Result<Outcome>)> = Vec::new();
    rows.push((1, "flat Dirac densities", flat_dirac()));
    rows.push((2, "shifted Dirac b", shifted_dirac()));
    rows.push((3, "unitary invariance with curvature", unitary_invariance(&mut info)));
    let opts = IdentityOptions { samples: 200, seed: 0, ..IdentityOptions::default() };
    let reports: Result<Vec<_>> = identity_fixtures().iter().map(|s| run_identities(s, &opts)).collect();
    match reports {
        Ok(reports) => {
            rows.push((4, "trace formula", trace_formula(&reports)));
            rows.push((5, "identity suite", identity_suite(&reports)));
        }
        Err(e) => {
            let msg = e.to_string();
            rows.push((4, "trace formula", Err(e)));
            rows.push((5, "identity suite", outcome(false, msg)));
        }
    }
    rows.push((6, "transport along trajectories", transport()));
    rows.push((7, "spectral asymmetry", asymmetry(&mut info)));
    rows.push((8, "mollified Weyl law", mollified_weyl()));
    rows.push((9, "Galerkin correctness", galerkin()));
    let mut failed = 0;
    for (id, name, r) in rows {
        let (passed, detail) = match r {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!("[{}] {id}. {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    }
    for line in info {
        println!("[info] {line}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
