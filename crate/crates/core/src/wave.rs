//! Time-zero quantities of the wave group: the degree-0 source term, the
//! first correction `u₋₁(0)` and the subprincipal symbol of each branch's
//! oscillatory integral at `t = 0`.
//!
//! The subprincipal symbol is computed twice: from `u₋₁(0)` and a finite
//! difference second derivative of the projector, and from a closed form
//! that needs first derivatives only. Its trace equals the scalar curvature.

use num_complex::Complex64;
use serde::Serialize;

use crate::brackets::{poisson, q_phase_fixed_gauge, MatJet1};
use crate::eigen::{decompose, second_mixed_projector_trace, EigenSystem};
use crate::error::{Error, Result};
use crate::symbol::{subprincipal, CMat, OperatorSpec, SymbolJet};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Degree-0 source term of branch `j` with the phase function's `q` given.
pub fn compute_b0_with_q(es: &EigenSystem, sj: &SymbolJet, j: i32, q: Complex64) -> Result<CMat> {
    let pos = es.pos(j)?;
    let n = es.n;
    let m = es.m;
    let id = CMat::identity(m, m);
    let p = &es.p[pos];
    let scalar = cx(0.5 * es.h_mixed(sj, pos)) * I;
    let coeff = sj.a0() + sj.a1_mixed() * I - &id * (q + scalar);
    let mut out = coeff * p;
    for a in 0..n {
        out -= &es.dp[pos][a] * (I * es.dh[pos][n + a]);
        out += &es.da1[a] * &es.dp[pos][n + a] * I;
    }
    Ok(out)
}

/// Degree-0 source term with `q` from the deterministic eigenvector gauge.
pub fn compute_b0(es: &EigenSystem, sj: &SymbolJet, j: i32) -> Result<CMat> {
    let q = q_phase_fixed_gauge(es, sj, j)?.total();
    compute_b0_with_q(es, sj, j, q)
}

fn gap(es: &EigenSystem, j: usize, l: usize) -> Result<f64> {
    let d = es.h[j] - es.h[l];
    if d == 0.0 {
        return Err(Error::DegenerateEigenvalue { gap: 0.0 });
    }
    Ok(d)
}

/// `u₋₁⁽ʲ⁾(0) = Σ_{l≠j}(P⁽ˡ⁾B₀⁽ʲ⁾ + P⁽ʲ⁾B₀⁽ˡ⁾)/(h⁽ʲ⁾ - h⁽ˡ⁾)` for every
/// branch; `b0` and the result are indexed by storage position.
pub fn compute_u_minus1_at0(b0: &[CMat], es: &EigenSystem) -> Result<Vec<CMat>> {
    if b0.len() != es.m {
        return Err(Error::DimensionMismatch(format!("{} source terms for {} branches", b0.len(), es.m)));
    }
    let m = es.m;
    (0..m)
        .map(|j| {
            let mut u = CMat::zeros(m, m);
            for l in (0..m).filter(|&l| l != j) {
                u += (&es.p[l] * &b0[j] + &es.p[j] * &b0[l]) / cx(gap(es, j, l)?);
            }
            Ok(u)
        })
        .collect()
}

/// Closed form of the time-zero subprincipal symbol of branch `j`:
/// `½Σ_{l≠j}[P⁽ˡ⁾(2A_sub P⁽ʲ⁾ + i{A1+h⁽ʲ⁾, P⁽ʲ⁾}) + P⁽ʲ⁾(2A_sub P⁽ˡ⁾ + i{A1+h⁽ˡ⁾, P⁽ˡ⁾})]/(h⁽ʲ⁾-h⁽ˡ⁾)`.
pub fn compute_u_sub(es: &EigenSystem, sj: &SymbolJet, j: i32) -> Result<CMat> {
    let pos = es.pos(j)?;
    let a_sub = subprincipal(sj)?;
    let inner = |k: usize| -> Result<CMat> {
        let br = poisson(&MatJet1::principal_shifted(sj, es, k, 1.0), &MatJet1::projector(es, k))?;
        Ok(&a_sub * &es.p[k] * cx(2.0) + br * I)
    };
    let own = inner(pos)?;
    let mut out = CMat::zeros(es.m, es.m);
    for l in (0..es.m).filter(|&l| l != pos) {
        let term = &es.p[l] * &own + &es.p[pos] * inner(l)?;
        out += term / cx(2.0 * gap(es, pos, l)?);
    }
    Ok(out)
}

/// `u₋₁⁽ʲ⁾(0) - (i/2)Σ_α P⁽ʲ⁾_{x^αξ_α}` with the second derivative by finite differences.
pub fn compute_u_sub_via_correction(spec: &OperatorSpec, u_minus1: &CMat, x: &[f64], xi: &[f64], j: i32) -> Result<CMat> {
    let pxx = second_mixed_projector_trace(spec, x, xi, j)?;
    Ok(u_minus1 - pxx * (I * 0.5))
}

/// All time-zero quantities at one point, per branch in storage order.
#[derive(Clone, Debug, Serialize)]
pub struct WaveInvariantSet {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub branches: Vec<i32>,
    #[serde(skip)]
    pub b0: Vec<CMat>,
    #[serde(skip)]
    pub u_minus1_at0: Vec<CMat>,
    /// Closed-form route.
    #[serde(skip)]
    pub u_sub: Vec<CMat>,
    pub trace_u_sub: Vec<Complex64>,
}

impl WaveInvariantSet {
    pub fn compute(spec: &OperatorSpec, x: &[f64], xi: &[f64]) -> Result<Self> {
        let sj = spec.symbol_at(x, xi)?;
        let es = decompose(&sj)?;
        let branches: Vec<i32> = (0..es.m).map(|p| es.branch(p)).collect();
        let b0 = branches.iter().map(|&j| compute_b0(&es, &sj, j)).collect::<Result<Vec<_>>>()?;
        let u_minus1_at0 = compute_u_minus1_at0(&b0, &es)?;
        let u_sub = branches.iter().map(|&j| compute_u_sub(&es, &sj, j)).collect::<Result<Vec<_>>>()?;
        let trace_u_sub = u_sub.iter().map(|u| u.trace()).collect();
        Ok(WaveInvariantSet { x: x.to_vec(), xi: xi.to_vec(), branches, b0, u_minus1_at0, u_sub, trace_u_sub })
    }
}
