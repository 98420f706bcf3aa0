//! Two-term Weyl coefficients and the transforms that must leave them
//! invariant (unitary conjugation) or flip them (time reversal).
//!
//! Fibre integrals use the normalised measure `đξ = (2π)^{-n} dξ`. For an
//! integrand `g` homogeneous of degree 0,
//! `∫_{h<1} g đξ = (2π)^{-n} (1/n) ∫_{S^{n-1}} g(ω) h(ω)^{-n} dω`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::brackets::{bracket_term_b, curvature_scalar, subprincipal_term};
use crate::eigen::{decompose, jacobi_eigen, EigenSystem};
use crate::error::{Error, Result};
use crate::expr::{build, Expr, Var};
use crate::numerics::gauss_legendre;
use crate::symbol::{mixed_trace, subprincipal, ExprMatrix, OperatorForm, OperatorSpec, SymbolJet, Validation};

pub const NORMALISATION: &str = "fibre measure d-bar xi = (2*pi)^(-n) d xi; densities integrate over [0, 2*pi)^n";

/// Quadrature on the unit sphere of `R^n`.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub n: usize,
    pub order: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// `n = 2`: `order` equispaced points. `n = 3`: `order/2` Gauss–Legendre
    /// nodes in `cos θ` times `order` equispaced azimuths.
    pub fn new(n: usize, order: usize) -> Result<Self> {
        if order < 4 {
            return Err(Error::validation("sphere-order", format!("must be at least 4, got {order}")));
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match n {
            2 => {
                for k in 0..order {
                    let t = 2.0 * PI * k as f64 / order as f64;
                    points.push(vec![t.cos(), t.sin()]);
                    weights.push(2.0 * PI / order as f64);
                }
            }
            3 => {
                let (zs, ws) = gauss_legendre(order / 2);
                for (z, w) in zs.iter().zip(&ws) {
                    let r = (1.0 - z * z).sqrt();
                    for k in 0..order {
                        let t = 2.0 * PI * (k as f64 + 0.5) / order as f64;
                        points.push(vec![r * t.cos(), r * t.sin(), *z]);
                        weights.push(w * 2.0 * PI / order as f64);
                    }
                }
            }
            _ => return Err(Error::validation("n", format!("sphere quadrature supports n = 2, 3, got {n}"))),
        }
        Ok(SphereRule { n, order, points, weights })
    }

    pub fn default_order(n: usize) -> usize {
        if n == 2 {
            256
        } else {
            64
        }
    }
}

fn fibre_factor(n: usize) -> f64 {
    (2.0 * PI).powi(-(n as i32)) / n as f64
}

/// `∫_{h⁽ʲ⁾(x,·)<1} g đξ` for `g` homogeneous of degree 0 in `ξ`, evaluated on
/// the unit sphere. `g` receives the jet, the eigen-system and the storage
/// position of `j`.
pub fn ball_integral(
    spec: &OperatorSpec,
    x: &[f64],
    j: i32,
    rule: &SphereRule,
    g: &dyn Fn(&SymbolJet, &EigenSystem, usize) -> Result<f64>,
) -> Result<f64> {
    let n = spec.n();
    let mut acc = 0.0;
    for (w, om) in rule.weights.iter().zip(&rule.points) {
        let sj = spec.symbol_at(x, om)?;
        let es = decompose(&sj)?;
        let pos = es.pos(j)?;
        let h = es.h[pos];
        if h <= 0.0 {
            return Err(Error::NonpositiveHamiltonian { value: h });
        }
        acc += w * g(&sj, &es, pos)? * h.powi(-(n as i32));
    }
    Ok(acc * fibre_factor(n))
}

/// Pointwise coefficients with the three parts of `b(x)`.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct PointCoeffs {
    pub a: f64,
    pub b: f64,
    pub sub: f64,
    pub bracket: f64,
    pub curvature: f64,
}

/// Which integrand terms enter `b(x)`. Dropping the curvature term exists
/// only to show that invariance then fails.
#[derive(Clone, Copy, Debug)]
pub struct CoeffOptions {
    pub include_curvature: bool,
}

impl Default for CoeffOptions {
    fn default() -> Self {
        CoeffOptions { include_curvature: true }
    }
}

/// `a(x)` and `b(x)` in one pass over the sphere.
pub fn point_coeffs(spec: &OperatorSpec, x: &[f64], rule: &SphereRule, opts: CoeffOptions) -> Result<PointCoeffs> {
    let n = spec.n();
    if rule.n != n {
        return Err(Error::DimensionMismatch(format!("sphere rule for n={}, operator has n={n}", rule.n)));
    }
    let nf = n as f64;
    let mut out = PointCoeffs::default();
    for (w, om) in rule.weights.iter().zip(&rule.points) {
        let sj = spec.symbol_at(x, om)?;
        let es = decompose(&sj)?;
        let a_sub = subprincipal(&sj)?;
        for pos in es.m_minus..es.m {
            let j = es.branch(pos);
            let h = es.h[pos];
            if h <= 0.0 {
                return Err(Error::NonpositiveHamiltonian { value: h });
            }
            let wh = w * h.powi(-(n as i32));
            out.a += wh;
            out.sub += wh * subprincipal_term(&es, &a_sub, j)?;
            out.bracket += wh * bracket_term_b(&es, &sj, j)?;
            out.curvature -= wh * h * curvature_scalar(&es, j)? / (nf - 1.0);
        }
    }
    let f = fibre_factor(n);
    out.a *= f;
    out.sub *= -nf * f;
    out.bracket *= -nf * f;
    out.curvature *= -nf * f;
    out.b = out.sub + out.bracket + if opts.include_curvature { out.curvature } else { 0.0 };
    Ok(out)
}

/// `a(x) = Σ_{j=1..m⁺} ∫_{h⁽ʲ⁾<1} đξ`.
pub fn coeff_a(spec: &OperatorSpec, x: &[f64], rule: &SphereRule) -> Result<f64> {
    let mut a = 0.0;
    for j in spec.positive_branches()? {
        a += ball_integral(spec, x, j, rule, &|_, _, _| Ok(1.0))?;
    }
    Ok(a)
}

/// `b(x)` with its breakdown.
pub fn coeff_b(spec: &OperatorSpec, x: &[f64], rule: &SphereRule, opts: CoeffOptions) -> Result<PointCoeffs> {
    point_coeffs(spec, x, rule, opts)
}

/// Rectangle rule on a uniform periodic grid over `[0, 2π)^n`.
pub fn integrate_density(values: &[f64], n: usize) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    mean * (2.0 * PI).powi(n as i32)
}

/// Uniform grid with `grid` points per axis, in row-major order (last axis fastest).
pub fn torus_grid(n: usize, grid: usize) -> Vec<Vec<f64>> {
    let total = grid.pow(n as u32);
    (0..total)
        .map(|mut k| {
            let mut x = vec![0.0; n];
            for a in (0..n).rev() {
                x[a] = 2.0 * PI * (k % grid) as f64 / grid as f64;
                k /= grid;
            }
            x
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TermDensities {
    pub sub: Vec<f64>,
    pub bracket: Vec<f64>,
    pub curvature: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TermTotals {
    pub sub: f64,
    pub bracket: f64,
    pub curvature: f64,
}

/// Densities on a torus grid and their integrals.
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticCoeffs {
    pub operator: String,
    pub n: usize,
    pub m: usize,
    pub grid: usize,
    pub sphere_order: usize,
    pub include_curvature: bool,
    pub normalisation: &'static str,
    pub a_global: f64,
    pub b_global: f64,
    pub b_terms_global: TermTotals,
    pub a_density: Vec<f64>,
    pub b_density: Vec<f64>,
    pub b_terms: TermDensities,
}

impl AsymptoticCoeffs {
    /// Evaluate on a `grid^n` torus grid. Parallel over grid points; the
    /// reduction order is fixed.
    pub fn compute(spec: &OperatorSpec, grid: usize, sphere_order: usize, opts: CoeffOptions) -> Result<Self> {
        if grid == 0 {
            return Err(Error::validation("grid", "must be positive"));
        }
        let n = spec.n();
        let rule = SphereRule::new(n, sphere_order)?;
        let xs = torus_grid(n, grid);
        let pts: Vec<PointCoeffs> =
            xs.par_iter().map(|x| point_coeffs(spec, x, &rule, opts)).collect::<Result<Vec<_>>>()?;
        let col = |f: fn(&PointCoeffs) -> f64| pts.iter().map(f).collect::<Vec<f64>>();
        let a_density = col(|p| p.a);
        let b_density = col(|p| p.b);
        let terms = TermDensities { sub: col(|p| p.sub), bracket: col(|p| p.bracket), curvature: col(|p| p.curvature) };
        Ok(AsymptoticCoeffs {
            operator: spec.name.clone(),
            n,
            m: spec.m(),
            grid,
            sphere_order,
            include_curvature: opts.include_curvature,
            normalisation: NORMALISATION,
            a_global: integrate_density(&a_density, n),
            b_global: integrate_density(&b_density, n),
            b_terms_global: TermTotals {
                sub: integrate_density(&terms.sub, n),
                bracket: integrate_density(&terms.bracket, n),
                curvature: integrate_density(&terms.curvature, n),
            },
            a_density,
            b_density,
            b_terms: terms,
        })
    }
}

/// The operator `-A`.
pub fn time_reverse(spec: &OperatorSpec) -> Result<OperatorSpec> {
    let neg = Complex64::new(-1.0, 0.0);
    let name = format!("{} (reversed)", spec.name);
    match spec.form() {
        OperatorForm::TorusDifferential { c, v } => {
            OperatorSpec::from_torus(&name, c.iter().map(|m| m.scale(neg)).collect(), v.scale(neg))
        }
        OperatorForm::Symbol => OperatorSpec::from_symbol(&name, spec.n(), spec.a1().scale(neg), spec.a0().scale(neg)),
    }
}

/// Largest `‖R R* - I‖` over sample points.
pub fn unitarity_defect(r: &ExprMatrix, n: usize, samples: usize) -> Result<f64> {
    let m = r.dim();
    let mut worst = 0.0f64;
    for (x, xi) in crate::symbol::sample_points(n, samples) {
        let point: Vec<f64> = x.iter().chain(&xi).copied().collect();
        let rv = r.eval(&point)?;
        worst = worst.max((&rv * rv.adjoint() - crate::symbol::CMat::identity(m, m)).norm());
    }
    Ok(worst)
}

/// The operator `R A R*` for a unitary multiplication `R(x)`.
///
/// Torus form stays torus form: `C' = R C R*`,
/// `V' = R V R* + (i/2)Σ(R_{x^α} C^α R* - R C^α R*_{x^α})`. Symbol form rewrites
/// `A1' = R A1 R*` and `A_sub` by the same law with `C^α = ∂A1/∂ξ_α`.
pub fn unitary_conjugate(spec: &OperatorSpec, r: &ExprMatrix) -> Result<OperatorSpec> {
    let n = spec.n();
    let m = spec.m();
    if r.dim() != m {
        return Err(Error::DimensionMismatch(format!("R is {0}x{0}, operator is {m}x{m}", r.dim())));
    }
    if r.depends_on_p() {
        return Err(Error::validation("R", "must depend on x only"));
    }
    if r.max_index().0 > n {
        return Err(Error::validation("R", format!("uses variables beyond n = {n}")));
    }
    let defect = unitarity_defect(r, n, 50)?;
    if defect > 1e-12 {
        return Err(Error::NotUnitary { defect });
    }
    let rs = r.adjoint();
    let half_i = Complex64::new(0.0, 0.5);
    let twist = |c: &[ExprMatrix]| -> ExprMatrix {
        c.iter().enumerate().fold(ExprMatrix::zeros(m), |acc, (a, ca)| {
            let left = r.derivative(Var::x(a)).mul(ca).mul(&rs);
            let right = r.mul(ca).mul(&rs.derivative(Var::x(a)));
            acc.add(&left.sub(&right))
        })
    };
    let name = format!("{} (conjugated)", spec.name);
    match spec.form() {
        OperatorForm::TorusDifferential { c, v } => {
            let c2: Vec<ExprMatrix> = c.iter().map(|ca| r.mul(ca).mul(&rs)).collect();
            let v2 = r.mul(v).mul(&rs).add(&twist(c).scale(half_i));
            OperatorSpec::from_torus(&name, c2, v2)
        }
        OperatorForm::Symbol => {
            let a1 = spec.a1();
            let a_sub = spec.a0().add(&mixed_trace(a1, n).scale(half_i));
            let grads: Vec<ExprMatrix> = (0..n).map(|a| a1.derivative(Var::p(a))).collect();
            let a1_new = r.mul(a1).mul(&rs);
            let sub_new = r.mul(&a_sub).mul(&rs).add(&twist(&grads).scale(half_i));
            let a0_new = sub_new.sub(&mixed_trace(&a1_new, n).scale(half_i));
            OperatorSpec::symbol_unchecked(&name, n, a1_new, a0_new)?.validate(&Validation::default())
        }
    }
}

/// `exp(iθ(x) H)` for a constant Hermitian `H`, as an expression matrix.
pub fn phase_rotation(theta: &Expr, h: &crate::symbol::CMat) -> ExprMatrix {
    let m = h.nrows();
    let (d, w) = jacobi_eigen(h);
    ExprMatrix::from_fn(m, |r, c| {
        let mut e = Expr::zero();
        for k in 0..m {
            let coef = w[(r, k)] * w[(c, k)].conj();
            if coef.norm() < 1e-15 {
                continue;
            }
            let phase = if d[k].abs() < 1e-15 {
                Expr::one()
            } else {
                build::call(
                    crate::expr::Func::Exp,
                    build::scale(Complex64::new(0.0, d[k]), theta.clone()),
                )
            };
            e = build::add(e, build::scale(coef, phase));
        }
        e
    })
}
