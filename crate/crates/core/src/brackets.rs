//! Matrix Poisson brackets, the U(1) connection of an eigenvector field and
//! its curvature.
//!
//! Everything that enters `b(x)` is computed from projectors, which carry no
//! phase ambiguity. The eigenvector formulas live in [`oracle`] and are used
//! only to cross-check.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::eigen::{decompose, leading_index, CVec, EigenSystem};
use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, wrap_angle};
use crate::symbol::{subprincipal, CMat, OperatorSpec, SymbolJet};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Imaginary residue allowed on quantities that are real in exact arithmetic.
pub const REAL_TOL: f64 = 1e-10;

/// A matrix-valued field with its first derivatives in `x` then `ξ`.
#[derive(Clone, Debug)]
pub struct MatJet1 {
    pub value: CMat,
    pub grad: Vec<CMat>,
}

impl MatJet1 {
    pub fn new(value: CMat, grad: Vec<CMat>) -> Self {
        MatJet1 { value, grad }
    }

    /// Projector `P⁽ʲ⁾` as a field.
    pub fn projector(es: &EigenSystem, pos: usize) -> Self {
        MatJet1 { value: es.p[pos].clone(), grad: es.dp[pos].clone() }
    }

    /// `A1 + s·h⁽ʲ⁾ I` as a field.
    pub fn principal_shifted(sj: &SymbolJet, es: &EigenSystem, pos: usize, s: f64) -> Self {
        let m = es.m;
        let id = CMat::identity(m, m);
        let value = sj.a1() + &id * Complex64::new(s * es.h[pos], 0.0);
        let grad = es.da1.iter().zip(&es.dh[pos]).map(|(d, dh)| d + &id * Complex64::new(s * dh, 0.0)).collect();
        MatJet1 { value, grad }
    }

    /// Scalar field from value and gradient.
    pub fn scalar(value: Complex64, grad: &[Complex64]) -> Self {
        let one = |z: Complex64| CMat::from_element(1, 1, z);
        MatJet1 { value: one(value), grad: grad.iter().map(|&g| one(g)).collect() }
    }

    fn n(&self) -> usize {
        self.grad.len() / 2
    }

    pub fn adjoint(&self) -> Self {
        MatJet1 { value: self.value.adjoint(), grad: self.grad.iter().map(|g| g.adjoint()).collect() }
    }
}

fn check_shapes(left: (usize, usize), right: (usize, usize), nl: usize, nr: usize) -> Result<()> {
    if left.1 != right.0 {
        return Err(Error::DimensionMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            left.0, left.1, right.0, right.1
        )));
    }
    if nl != nr {
        return Err(Error::DimensionMismatch(format!("fields on spaces of dimension {nl} and {nr}")));
    }
    Ok(())
}

/// `{P, R} = P_{x^α} R_{ξ_α} - P_{ξ_α} R_{x^α}`.
pub fn poisson(p: &MatJet1, r: &MatJet1) -> Result<CMat> {
    check_shapes(p.value.shape(), r.value.shape(), p.n(), r.n())?;
    let n = p.n();
    let mut out = CMat::zeros(p.value.nrows(), r.value.ncols());
    for a in 0..n {
        out += &p.grad[a] * &r.grad[n + a] - &p.grad[n + a] * &r.grad[a];
    }
    Ok(out)
}

/// `{P, Q, R} = P_{x^α} Q R_{ξ_α} - P_{ξ_α} Q R_{x^α}`.
pub fn poisson3(p: &MatJet1, q: &CMat, r: &MatJet1) -> Result<CMat> {
    check_shapes(p.value.shape(), q.shape(), p.n(), r.n())?;
    check_shapes(q.shape(), r.value.shape(), p.n(), r.n())?;
    let n = p.n();
    let mut out = CMat::zeros(p.value.nrows(), r.value.ncols());
    for a in 0..n {
        out += &p.grad[a] * q * &r.grad[n + a] - &p.grad[n + a] * q * &r.grad[a];
    }
    Ok(out)
}

fn real_part(z: Complex64, what: &'static str) -> Result<f64> {
    if z.im.abs() > REAL_TOL * (1.0 + z.re.abs()) {
        return Err(Error::NonrealResult { what, residue: z.im.abs() });
    }
    Ok(z.re)
}

/// `{v*, A1 - h, v}` evaluated as `tr(P_x B P_ξ - P_ξ B P_x)`, `B = A1 - h`.
/// Purely imaginary.
pub fn generalised_bracket(es: &EigenSystem, sj: &SymbolJet, j: i32) -> Result<Complex64> {
    let pos = es.pos(j)?;
    let b = MatJet1::principal_shifted(sj, es, pos, -1.0).value;
    let pj = MatJet1::projector(es, pos);
    Ok(poisson3(&pj, &b, &pj)?.trace())
}

/// The second term of the `b(x)` integrand, `-(i/2){v*, A1 - h, v}`.
pub fn bracket_term_b(es: &EigenSystem, sj: &SymbolJet, j: i32) -> Result<f64> {
    let z = -0.5 * I * generalised_bracket(es, sj, j)?;
    real_part(z, "generalised bracket term")
}

/// Scalar curvature `-i{v*, v} = -i tr(P{P, P})`.
pub fn curvature_scalar(es: &EigenSystem, j: i32) -> Result<f64> {
    let pos = es.pos(j)?;
    let pj = MatJet1::projector(es, pos);
    let z = -I * (&es.p[pos] * poisson(&pj, &pj)?).trace();
    real_part(z, "scalar curvature")
}

/// `v*A_sub v`.
pub fn subprincipal_term(es: &EigenSystem, a_sub: &CMat, j: i32) -> Result<f64> {
    let pos = es.pos(j)?;
    real_part((&es.p[pos] * a_sub).trace(), "subprincipal term")
}

/// Curvature 2-form of the eigenvector connection, a real antisymmetric
/// `2n × 2n` matrix over `(x, ξ)`.
#[derive(Clone, Debug)]
pub struct Curvature2Form {
    pub n: usize,
    pub matrix: DMatrix<f64>,
}

impl Curvature2Form {
    fn block(&self, r0: usize, c0: usize) -> DMatrix<f64> {
        self.matrix.view((r0, c0), (self.n, self.n)).into_owned()
    }

    pub fn xx(&self) -> DMatrix<f64> {
        self.block(0, 0)
    }

    pub fn x_xi(&self) -> DMatrix<f64> {
        self.block(0, self.n)
    }

    pub fn xi_x(&self) -> DMatrix<f64> {
        self.block(self.n, 0)
    }

    pub fn xi_xi(&self) -> DMatrix<f64> {
        self.block(self.n, self.n)
    }
}

/// `R_{μν} = i(v_ν* v_μ - v_μ* v_ν) = ∂_ν A_μ - ∂_μ A_ν`, from parallel-gauge
/// derivatives. The trace of the `x`-`ξ` block is the scalar curvature.
pub fn curvature_form(es: &EigenSystem, j: i32) -> Result<Curvature2Form> {
    let pos = es.pos(j)?;
    let dv = &es.dv[pos];
    let nd = dv.len();
    let matrix = DMatrix::from_fn(nd, nd, |mu, nu| {
        let w = (dv[nu].adjoint() * &dv[mu])[(0, 0)];
        -2.0 * w.im
    });
    Ok(Curvature2Form { n: es.n, matrix })
}

/// Connection 1-form `A_μ = i v*∂_μ v` in the gauge where component `k` of
/// the eigenvector is real and positive.
pub fn connection_in_gauge(es: &EigenSystem, pos: usize, k: usize) -> Vec<f64> {
    let v = &es.v[pos];
    let vk = v[k];
    let r2 = vk.norm_sqr();
    es.dv[pos].iter().map(|d| (vk.conj() * d[k]).im / r2).collect()
}

/// Connection 1-form of the deterministic gauge (largest component real positive).
#[derive(Clone, Debug, Serialize)]
pub struct ConnectionForm {
    /// `P_α = i v* v_{x^α}`.
    pub x: Vec<f64>,
    /// `Q^γ = i v* v_{ξ_γ}`.
    pub xi: Vec<f64>,
}

pub fn connection_form(es: &EigenSystem, j: i32) -> Result<ConnectionForm> {
    let pos = es.pos(j)?;
    let a = connection_in_gauge(es, pos, leading_index(&es.v[pos]));
    Ok(ConnectionForm { x: a[..es.n].to_vec(), xi: a[es.n..].to_vec() })
}

/// The three parts of `q⁽ʲ⁾ = v*A_sub v - (i/2){v*, A1 - h, v} - i v*{v, h}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QPhase {
    pub subprincipal: f64,
    pub bracket: f64,
    /// `-i v*{v, h} = Q·h_x - P·h_ξ`; depends on the gauge.
    pub connection: f64,
}

impl QPhase {
    /// Gauge-invariant part.
    pub fn invariant(&self) -> f64 {
        self.subprincipal + self.bracket
    }

    pub fn total(&self) -> Complex64 {
        Complex64::new(self.subprincipal + self.bracket + self.connection, 0.0)
    }
}

/// `q⁽ʲ⁾` for an eigenvector field whose connection 1-form is `connection`
/// (`2n` reals, `x` then `ξ`). Pass zeros for the parallel gauge.
pub fn q_phase(es: &EigenSystem, sj: &SymbolJet, j: i32, connection: &[f64]) -> Result<QPhase> {
    let pos = es.pos(j)?;
    let n = es.n;
    if connection.len() != 2 * n {
        return Err(Error::DimensionMismatch(format!("connection has {} components, need {}", connection.len(), 2 * n)));
    }
    let a_sub = subprincipal(sj)?;
    let dh = &es.dh[pos];
    let conn = (0..n).map(|a| connection[n + a] * dh[a] - connection[a] * dh[n + a]).sum();
    Ok(QPhase { subprincipal: subprincipal_term(es, &a_sub, j)?, bracket: bracket_term_b(es, sj, j)?, connection: conn })
}

/// `q⁽ʲ⁾` in the deterministic gauge of [`crate::eigen::fix_gauge`].
pub fn q_phase_fixed_gauge(es: &EigenSystem, sj: &SymbolJet, j: i32) -> Result<QPhase> {
    let pos = es.pos(j)?;
    let conn = connection_in_gauge(es, pos, leading_index(&es.v[pos]));
    q_phase(es, sj, j, &conn)
}

/// Result of transporting an eigenvector along a curve.
#[derive(Clone, Debug)]
pub struct Transport {
    pub v_end: CVec,
    /// Accumulated phase `∫ A`, unwrapped. For a closed curve `v_end = e^{i·phase} v_start`.
    pub phase: f64,
}

/// Parallel transport of an eigenvector of branch `j` along `curve`.
///
/// `curve(s)` returns `(z, dz/ds)` for `s ∈ [0, 1]` with `z = (x, ξ)`. The
/// connection is integrated by adaptive Simpson on each of `panels` pieces in
/// a gauge that is smooth on the piece; the gauge reference only changes
/// when its component becomes small.
pub fn parallel_transport(
    spec: &OperatorSpec,
    j: i32,
    curve: &dyn Fn(f64) -> (Vec<f64>, Vec<f64>),
    panels: usize,
    v_start: &CVec,
) -> Result<Transport> {
    let n = spec.n();
    let system_at = |s: f64| -> Result<(EigenSystem, Vec<f64>)> {
        let (z, dz) = curve(s);
        let es = decompose(&spec.symbol_at(&z[..n], &z[n..])?)?;
        Ok((es, dz))
    };
    let (es0, _) = system_at(0.0)?;
    let pos0 = es0.pos(j)?;
    let v0 = &es0.v[pos0];
    let overlap = (v0.adjoint() * v_start)[(0, 0)];
    if (overlap.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::validation("v_start", "is not a unit eigenvector of the branch at the curve start"));
    }
    let k0 = leading_index(v0);
    let mut k = k0;
    // phase of the transported vector relative to the gauge-k eigenvector
    let start_offset = gauge_phase(v_start, k);
    let mut theta = start_offset;
    let panels = panels.max(1);
    for p in 0..panels {
        let (a, b) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
        let (es_a, _) = system_at(a)?;
        let va = &es_a.v[es_a.pos(j)?];
        let lead = leading_index(va);
        if va[k].norm() < 0.5 * va[lead].norm() {
            // switch reference component: rephase so that `lead` is real positive
            theta += gauge_phase(va, lead) - gauge_phase(va, k);
            k = lead;
        }
        let mut f = |s: f64| -> Result<f64> {
            let (es, dz) = system_at(s)?;
            let a = connection_in_gauge(&es, es.pos(j)?, k);
            Ok(a.iter().zip(&dz).map(|(a, d)| a * d).sum())
        };
        theta += adaptive_simpson(&mut f, a, b, 1e-13 / panels as f64, 0.1)?;
    }
    let (es1, _) = system_at(1.0)?;
    let v1 = &es1.v[es1.pos(j)?];
    // express relative to the starting reference component
    let phase_in_k0 = theta - gauge_phase(v1, k) + gauge_phase(v1, k0);
    let v_gauge_k0 = rephase(v1, k0);
    let v_end = &v_gauge_k0 * Complex64::from_polar(1.0, phase_in_k0);
    Ok(Transport { v_end, phase: phase_in_k0 - start_offset })
}

/// Phase `θ` with `v = e^{iθ} ṽ`, where `ṽ` has component `k` real positive.
fn gauge_phase(v: &CVec, k: usize) -> f64 {
    wrap_angle(v[k].arg())
}

fn rephase(v: &CVec, k: usize) -> CVec {
    v * Complex64::from_polar(1.0, -v[k].arg())
}

/// Eigenvector formulas, kept as independent cross-checks of the projector
/// routes. `dv` may be any admissible derivative representative.
pub mod oracle {
    use super::*;

    /// `{v*, v} = v_x*·v_ξ - v_ξ*·v_x`.
    pub fn bracket_vv(dv: &[CVec]) -> Complex64 {
        let n = dv.len() / 2;
        (0..n)
            .map(|a| (dv[a].adjoint() * &dv[n + a])[(0, 0)] - (dv[n + a].adjoint() * &dv[a])[(0, 0)])
            .sum()
    }

    /// `{v*, B, v}`.
    pub fn bracket_vbv(dv: &[CVec], b: &CMat) -> Complex64 {
        let n = dv.len() / 2;
        (0..n)
            .map(|a| (dv[a].adjoint() * b * &dv[n + a])[(0, 0)] - (dv[n + a].adjoint() * b * &dv[a])[(0, 0)])
            .sum()
    }

    /// `dv + i c_μ v` for real `c`.
    pub fn shift_gauge(v: &CVec, dv: &[CVec], c: &[f64]) -> Vec<CVec> {
        dv.iter().zip(c).map(|(d, &cm)| d + v * Complex64::new(0.0, cm)).collect()
    }
}
