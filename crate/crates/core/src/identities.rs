//! Pointwise identity suite: residuals of every identity the coefficient
//! formulas rely on, at seeded random points.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::asymptotics::{phase_rotation, point_coeffs, time_reverse, unitary_conjugate, CoeffOptions, SphereRule};
use crate::brackets::{bracket_term_b, curvature_scalar, oracle, subprincipal_term};
use crate::eigen::decompose;
use crate::error::Result;
use crate::expr::parse;
use crate::flow::{integrate, FlowOptions};
use crate::symbol::{subprincipal, CMat, OperatorSpec};
use crate::wave::{compute_b0, compute_u_minus1_at0, compute_u_sub, compute_u_sub_via_correction};

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_residual: f64,
    pub tol: f64,
    pub passed: bool,
    /// Set when the identity does not apply to this operator.
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub operator: String,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<IdentityCheck>,
    pub all_passed: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct IdentityOptions {
    pub samples: usize,
    pub seed: u64,
    /// Replaces every per-check default tolerance when set.
    pub tol: Option<f64>,
    /// Points in `x` used by the checks that integrate over the sphere.
    pub coeff_points: usize,
    pub sphere_order: Option<usize>,
    pub coeffs: CoeffOptions,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        IdentityOptions { samples: 200, seed: 0, tol: None, coeff_points: 4, sphere_order: None, coeffs: CoeffOptions::default() }
    }
}

/// Seeded points `x ∈ [0,2π)ⁿ`, `ξ` in a random direction with `|ξ| ∈ [0.5, 3]`.
pub fn random_points(n: usize, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let mut xi: Vec<f64>;
            loop {
                xi = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r > 0.1 && r <= 1.0 {
                    let s = rng.random_range(0.5..3.0) / r;
                    xi.iter_mut().for_each(|v| *v *= s);
                    break;
                }
            }
            (x, xi)
        })
        .collect()
}

/// A generic Hermitian generator: ones off the diagonal, `0.5·k` on it.
pub fn generic_generator(m: usize) -> CMat {
    CMat::from_fn(m, m, |r, c| if r == c { Complex64::new(0.5 * r as f64, 0.0) } else { Complex64::new(1.0, 0.0) })
}

/// The rotation `exp(iθ(x)H)` used by the invariance check.
pub fn test_rotation(n: usize, m: usize) -> Result<crate::symbol::ExprMatrix> {
    let theta = if n == 2 { "0.4*sin(x1) + 0.2*cos(x2)" } else { "0.4*sin(x1) + 0.2*cos(x2) + 0.3*sin(x3)" };
    Ok(phase_rotation(&parse(theta).map_err(|e| crate::Error::Expression { field: "rotation".into(), source: e })?, &generic_generator(m)))
}

struct Tally {
    name: &'static str,
    tol: f64,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str, default_tol: f64, opts: &IdentityOptions) -> Self {
        Tally { name, tol: opts.tol.unwrap_or(default_tol), worst: 0.0 }
    }

    fn see(&mut self, r: f64) {
        // NaN must fail the check
        if r.is_nan() || r > self.worst {
            self.worst = if r.is_nan() { f64::INFINITY } else { r };
        }
    }

    fn done(self) -> IdentityCheck {
        IdentityCheck { name: self.name.into(), max_residual: self.worst, tol: self.tol, passed: self.worst < self.tol, skipped: None }
    }
}

/// `A1(x, -ξ) = -A1(x, ξ)` at the validation points.
pub fn is_differential(spec: &OperatorSpec) -> Result<bool> {
    for (x, xi) in crate::symbol::sample_points(spec.n(), 20) {
        let a = spec.symbol_at(&x, &xi)?.a1();
        let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
        let b = spec.symbol_at(&x, &neg)?.a1();
        if (a + b).norm() > 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn run_identities(spec: &OperatorSpec, opts: &IdentityOptions) -> Result<IdentityReport> {
    let n = spec.n();
    let m = spec.m();
    let id = CMat::identity(m, m);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9);
    let mut curv_sum = Tally::new("curvature_sum", 1e-10, opts);
    let mut um1_sum = Tally::new("u_minus1_sum", 1e-12, opts);
    let mut u0_sum = Tally::new("u0_sum", 1e-12, opts);
    let mut euler = Tally::new("euler_identity", 1e-10, opts);
    let mut gauge = Tally::new("gauge_residue", 1e-10, opts);
    let mut trace = Tally::new("trace_formula", 1e-9, opts);
    let mut routes = Tally::new("trace_routes", 1e-7, opts);
    for (x, xi) in random_points(n, opts.samples, opts.seed) {
        let sj = spec.symbol_at(&x, &xi)?;
        let es = decompose(&sj)?;
        let a_sub = subprincipal(&sj)?;
        let mut ksum = 0.0;
        let mut b0 = Vec::with_capacity(m);
        for pos in 0..m {
            let j = es.branch(pos);
            ksum += curvature_scalar(&es, j)?;
            b0.push(compute_b0(&es, &sj, j)?);
            let h = es.h[pos];
            let hxi: f64 = (0..n).map(|a| xi[a] * es.dh[pos][n + a]).sum();
            euler.see((hxi - h).abs() / h.abs().max(1.0));
            // random phase residue c·dz added to the eigenvector derivatives
            let cs: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v = &es.v[pos];
            let dv2 = oracle::shift_gauge(v, &es.dv[pos], &cs);
            let v2 = v * Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
            let bmat = sj.a1() - &id * Complex64::new(h, 0.0);
            let sub1 = subprincipal_term(&es, &a_sub, j)?;
            let sub2 = (v2.adjoint() * &a_sub * &v2)[(0, 0)];
            let br1 = bracket_term_b(&es, &sj, j)?;
            let br2 = -0.5 * Complex64::i() * oracle::bracket_vbv(&dv2, &bmat);
            let k1 = curvature_scalar(&es, j)?;
            let k2 = -Complex64::i() * oracle::bracket_vv(&dv2);
            gauge.see((sub2 - sub1).norm().max((br2 - br1).norm()).max((k2 - k1).norm()));
            let us = compute_u_sub(&es, &sj, j)?;
            trace.see((us.trace() - k1).norm());
        }
        curv_sum.see(ksum.abs());
        let um1 = compute_u_minus1_at0(&b0, &es)?;
        let total = um1.iter().fold(CMat::zeros(m, m), |acc, u| acc + u);
        um1_sum.see(total.norm());
        for (pos, u) in um1.iter().enumerate() {
            let j = es.branch(pos);
            let closed = compute_u_sub(&es, &sj, j)?;
            let fd = compute_u_sub_via_correction(spec, u, &x, &xi, j)?;
            routes.see((closed - fd).norm());
        }
        let mut u0 = CMat::zeros(m, m);
        for pos in 0..m {
            u0 += integrate(spec, es.branch(pos), &x, &xi, 0.0, FlowOptions::default())?.u0_at(0.0)?;
        }
        u0_sum.see((u0 - &id).norm());
    }
    let mut checks = vec![
        curv_sum.done(),
        um1_sum.done(),
        u0_sum.done(),
        euler.done(),
        gauge.done(),
        trace.done(),
        routes.done(),
    ];
    checks.extend(coefficient_checks(spec, opts)?);
    let all_passed = checks.iter().all(|c| c.passed || c.skipped.is_some());
    Ok(IdentityReport { operator: spec.name.clone(), samples: opts.samples, seed: opts.seed, checks, all_passed })
}

/// Checks on `a(x)`, `b(x)`: invariance under `R A R*` and the sign flip
/// under `A ↦ -A`.
fn coefficient_checks(spec: &OperatorSpec, opts: &IdentityOptions) -> Result<Vec<IdentityCheck>> {
    let n = spec.n();
    let order = opts.sphere_order.unwrap_or_else(|| SphereRule::default_order(n));
    let rule = SphereRule::new(n, order)?;
    let xs: Vec<Vec<f64>> = random_points(n, opts.coeff_points, opts.seed ^ 0x51).into_iter().map(|p| p.0).collect();
    let rotated = unitary_conjugate(spec, &test_rotation(n, spec.m())?)?;
    let mut inv = Tally::new("unitary_invariance", 1e-10, opts);
    for x in &xs {
        let p = point_coeffs(spec, x, &rule, opts.coeffs)?;
        let q = point_coeffs(&rotated, x, &rule, opts.coeffs)?;
        inv.see((p.b - q.b).abs().max((p.a - q.a).abs()));
    }
    let mut out = vec![inv.done()];
    let mut rev = Tally::new("time_reversal", 1e-10, opts);
    if is_differential(spec)? {
        let neg = time_reverse(spec)?;
        for x in &xs {
            let p = point_coeffs(spec, x, &rule, opts.coeffs)?;
            let q = point_coeffs(&neg, x, &rule, opts.coeffs)?;
            rev.see((p.a - q.a).abs().max((p.b + q.b).abs()));
        }
        out.push(rev.done());
    } else {
        let mut c = rev.done();
        c.passed = false;
        c.skipped = Some("principal symbol is not odd in xi, so -A is not the time reversal of A".into());
        out.push(c);
    }
    Ok(out)
}
