//! Eigen-decomposition of the principal symbol with signed branch indices.
//!
//! Branches are numbered `-m⁻..=-1` for negative eigenvalues and `1..=m⁺`
//! for positive ones, both in increasing order of the eigenvalue. Storage
//! is by position `0..m` in ascending order.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::symbol::{CMat, OperatorSpec, SymbolJet};

pub type CVec = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative gap below which two eigenvalues count as equal.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Relative size below which an eigenvalue counts as zero.
pub const ZERO_TOL: f64 = 1e-10;

/// Cyclic Jacobi for a Hermitian matrix. Returns ascending eigenvalues and
/// the matching orthonormal eigenvectors as columns.
pub fn jacobi_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let m = a.nrows();
    let mut a = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v = CMat::identity(m, m);
    let total = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..m {
            for q in p + 1..m {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-16 * total {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let b = a[(p, q)];
                let babs = b.norm();
                if babs <= 1e-20 * total {
                    continue;
                }
                let phase = b / babs;
                let (app, aqq) = (a[(p, p)].re, a[(q, q)].re);
                let theta = 0.5 * (2.0 * babs).atan2(app - aqq);
                let (c, s) = (theta.cos(), theta.sin());
                // U acts on the (p, q) plane: columns (c, s·e^{-iφ}) and (-s, c·e^{-iφ})
                let u = [
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [phase.conj() * s, phase.conj() * c],
                ];
                for k in 0..m {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * u[0][0] + akq * u[1][0];
                    a[(k, q)] = akp * u[0][1] + akq * u[1][1];
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * u[0][0] + vkq * u[1][0];
                    v[(k, q)] = vkp * u[0][1] + vkq * u[1][1];
                }
                for k in 0..m {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = u[0][0].conj() * apk + u[1][0].conj() * aqk;
                    a[(q, k)] = u[0][1].conj() * apk + u[1][1].conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
            }
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let h = order.iter().map(|&i| a[(i, i)].re).collect();
    let vecs = CMat::from_fn(m, m, |r, c| v[(r, order[c])]);
    (h, vecs)
}

/// Multiply by the unit phase that makes the largest-magnitude component
/// real and positive (first index wins ties).
pub fn fix_gauge(v: &CVec) -> CVec {
    let k = leading_index(v);
    let vk = v[k];
    if vk.norm() == 0.0 {
        return v.clone();
    }
    v * (vk.conj() / vk.norm())
}

pub(crate) fn leading_index(v: &CVec) -> usize {
    let mut k = 0;
    let mut best = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best {
            best = a;
            k = i;
        }
    }
    k
}

/// Eigenvalues, eigenvectors, projectors and their first derivatives at one point.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub n: usize,
    pub m: usize,
    pub m_minus: usize,
    pub m_plus: usize,
    /// Ascending eigenvalues.
    pub h: Vec<f64>,
    /// Gauge-fixed eigenvectors.
    pub v: Vec<CVec>,
    pub p: Vec<CMat>,
    /// `dh[pos][μ]`, `μ` over `x` then `ξ`.
    pub dh: Vec<Vec<f64>>,
    pub dp: Vec<Vec<CMat>>,
    /// Eigenvector derivatives in the pointwise parallel gauge (`v*∂v = 0`).
    pub dv: Vec<Vec<CVec>>,
    /// Derivatives of `A1`, kept for second-order quantities.
    pub da1: Vec<CMat>,
}

impl EigenSystem {
    /// Storage position of signed branch `j`.
    pub fn pos(&self, j: i32) -> Result<usize> {
        if j < 0 && (-j) as usize <= self.m_minus {
            Ok((self.m_minus as i32 + j) as usize)
        } else if j > 0 && j as usize <= self.m_plus {
            Ok(self.m_minus + j as usize - 1)
        } else {
            Err(Error::NoSuchBranch(j))
        }
    }

    /// Signed branch index of storage position `pos`.
    pub fn branch(&self, pos: usize) -> i32 {
        if pos < self.m_minus {
            pos as i32 - self.m_minus as i32
        } else {
            (pos - self.m_minus) as i32 + 1
        }
    }

    pub fn eigenvalue(&self, j: i32) -> Result<f64> {
        Ok(self.h[self.pos(j)?])
    }

    /// `Σ_α ∂²h/∂x^α∂ξ_α` by differentiating Hellmann–Feynman once more.
    pub fn h_mixed(&self, sj: &SymbolJet, pos: usize) -> f64 {
        let n = self.n;
        let mut s = ZERO;
        for a in 0..n {
            s += (&self.dp[pos][n + a] * &self.da1[a]).trace() + (&self.p[pos] * sj.a1_dd(a, n + a)).trace();
        }
        s.re
    }

    /// Full second derivative `∂²h/∂z^μ∂z^ν`.
    pub fn h_second(&self, sj: &SymbolJet, pos: usize, mu: usize, nu: usize) -> f64 {
        ((&self.dp[pos][nu] * &self.da1[mu]).trace() + (&self.p[pos] * sj.a1_dd(mu, nu)).trace()).re
    }

    pub fn min_gap(&self) -> f64 {
        self.h.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

/// Decompose the principal symbol at the jet's point.
pub fn decompose(sj: &SymbolJet) -> Result<EigenSystem> {
    let a1 = sj.a1();
    let da1 = sj.a1_grad();
    decompose_matrix(&a1, da1, sj.n)
}

pub(crate) fn decompose_matrix(a1: &CMat, da1: Vec<CMat>, n: usize) -> Result<EigenSystem> {
    let m = a1.nrows();
    let (h, vecs) = jacobi_eigen(a1);
    let scale = h.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    for &e in &h {
        if e.abs() < ZERO_TOL * scale {
            return Err(Error::ZeroEigenvalue { eigenvalue: e });
        }
    }
    let gap = h.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if gap < DEGENERACY_TOL * scale {
        return Err(Error::DegenerateEigenvalue { gap });
    }
    let m_minus = h.iter().filter(|&&e| e < 0.0).count();
    let v: Vec<CVec> = (0..m).map(|k| fix_gauge(&vecs.column(k).into_owned())).collect();
    let p: Vec<CMat> = v.iter().map(|vk| vk * vk.adjoint()).collect();
    let nd = 2 * n;
    let mut dh = vec![vec![0.0; nd]; m];
    let mut dp = vec![vec![CMat::zeros(m, m); nd]; m];
    let mut dv = vec![vec![CVec::zeros(m); nd]; m];
    for (mu, am) in da1.iter().enumerate() {
        // matrix elements <v_l| A_μ |v_j>
        let vh: Vec<CVec> = v.iter().map(|vk| am * vk).collect();
        for j in 0..m {
            dh[j][mu] = (v[j].adjoint() * &vh[j])[(0, 0)].re;
            let mut dpj = CMat::zeros(m, m);
            let mut dvj = CVec::zeros(m);
            for l in 0..m {
                if l == j {
                    continue;
                }
                let inv = 1.0 / (h[j] - h[l]);
                let c = (v[l].adjoint() * &vh[j])[(0, 0)] * inv;
                // P_l A P_j + P_j A P_l = c v_l v_j* + conj(c) v_j v_l*
                dpj += &v[l] * v[j].adjoint() * c + &v[j] * v[l].adjoint() * c.conj();
                dvj += &v[l] * c;
            }
            dp[j][mu] = dpj;
            dv[j][mu] = dvj;
        }
    }
    Ok(EigenSystem { n, m, m_minus, m_plus: m - m_minus, h, v, p, dh, dp, dv, da1 })
}

/// `Σ_α ∂²P⁽ʲ⁾/∂x^α∂ξ_α`: central differences in `x` of the analytic `∂P/∂ξ_α`,
/// one Richardson step.
pub fn second_mixed_projector_trace(spec: &OperatorSpec, x: &[f64], xi: &[f64], j: i32) -> Result<CMat> {
    let n = spec.n();
    let m = spec.m();
    let mut out = CMat::zeros(m, m);
    for a in 0..n {
        let step = 1e-4 * x[a].abs().max(1.0);
        let dpxi = |s: f64| -> Result<CMat> {
            let mut xs = x.to_vec();
            xs[a] += s;
            let es = decompose(&spec.symbol_at(&xs, xi)?)?;
            Ok(es.dp[es.pos(j)?][n + a].clone())
        };
        let central = |h: f64| -> Result<CMat> { Ok((dpxi(h)? - dpxi(-h)?) / Complex64::new(2.0 * h, 0.0)) };
        let coarse = central(step)?;
        let fine = central(step / 2.0)?;
        out += (fine * Complex64::new(4.0, 0.0) - coarse) / Complex64::new(3.0, 0.0);
    }
    Ok(out)
}
