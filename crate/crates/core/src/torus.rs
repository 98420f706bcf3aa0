//! Fourier–Galerkin spectra of differential operators on the 2-torus,
//! counting and spectral functions, mollified counting and Weyl fits, and
//! exact lattice spectra of the shifted Dirac operator.

use std::f64::consts::PI;
use std::io::Write;

use faer::{c64, Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symbol::{CMat, ExprMatrix, OperatorForm, OperatorSpec};

/// Eigenvalues with `|λ| <` this count as zero modes and never enter `N(λ)`.
pub const ZERO_MODE_TOL: f64 = 1e-9;
/// Fourier coefficients below this (relative to the largest) are dropped.
pub const BAND_TOL: f64 = 1e-10;
const MAX_SAMPLING: usize = 1024;

/// Anything whose eigenvalues are completely known below some ceiling.
pub trait Spectrum {
    /// Ascending eigenvalues.
    fn eigenvalues(&self) -> &[f64];
    /// Every eigenvalue with `|λ|` below this is present.
    fn trusted_below(&self) -> f64;
}

fn check_trust(lambda: f64, trust: f64) -> Result<()> {
    if lambda > trust {
        return Err(Error::BeyondTrust { lambda, trust });
    }
    Ok(())
}

/// `#{k : 0 < λ_k < λ}` with zero modes excluded.
pub fn counting(s: &impl Spectrum, lambda: f64) -> Result<usize> {
    check_trust(lambda, s.trusted_below())?;
    let ev = s.eigenvalues();
    let edge = ev.iter().filter(|e| (*e - lambda).abs() < 1e-12).count();
    if edge > 0 {
        log::warn!("{edge} eigenvalue(s) within 1e-12 of the counting edge {lambda}");
    }
    let lo = ev.partition_point(|&e| e < ZERO_MODE_TOL);
    let hi = ev.partition_point(|&e| e < lambda);
    Ok(hi.saturating_sub(lo))
}

/// Fourier coefficients `f̂_k`, `|k|_∞ ≤ band`, of a matrix function on `T²`.
#[derive(Clone, Debug)]
pub struct FourierMatrix {
    pub band: usize,
    pub sampling: usize,
    m: usize,
    /// Row-major over `(k1 + band, k2 + band)`.
    coeffs: Vec<CMat>,
}

impl FourierMatrix {
    pub fn get(&self, k1: i64, k2: i64) -> Option<&CMat> {
        let b = self.band as i64;
        if k1.abs() > b || k2.abs() > b {
            return None;
        }
        let w = 2 * self.band + 1;
        Some(&self.coeffs[(k1 + b) as usize * w + (k2 + b) as usize])
    }

    /// Coefficients of `f` sampled on a `g × g` grid; doubles the grid until
    /// the top frequencies are below [`BAND_TOL`].
    pub fn of(f: &ExprMatrix, min_sampling: usize) -> Result<Self> {
        let m = f.dim();
        let mut g = min_sampling.max(32).next_power_of_two();
        loop {
            let raw = sample_fft(f, g)?;
            let scale = raw.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
            let idx = |k: i64| k.rem_euclid(g as i64) as usize;
            let half = (g / 2) as i64;
            let mut band = 0i64;
            for k1 in -half + 1..half {
                for k2 in -half + 1..half {
                    if raw[idx(k1) * g + idx(k2)].norm() > BAND_TOL * scale {
                        band = band.max(k1.abs()).max(k2.abs());
                    }
                }
            }
            // the band must sit well inside the sampled range to rule out aliasing
            if 2 * band + 2 <= half {
                let w = 2 * band as usize + 1;
                let mut coeffs = vec![CMat::zeros(m, m); w * w];
                for k1 in -band..=band {
                    for k2 in -band..=band {
                        coeffs[(k1 + band) as usize * w + (k2 + band) as usize] = raw[idx(k1) * g + idx(k2)].clone();
                    }
                }
                return Ok(FourierMatrix { band: band as usize, sampling: g, m, coeffs });
            }
            if g >= MAX_SAMPLING {
                return Err(Error::validation("torus coefficients", "Fourier series does not decay to 1e-10 within 512 modes"));
            }
            g *= 2;
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }
}

fn sample_fft(f: &ExprMatrix, g: usize) -> Result<Vec<CMat>> {
    let m = f.dim();
    let h = 2.0 * PI / g as f64;
    let rows: Vec<Result<Vec<CMat>>> = (0..g)
        .into_par_iter()
        .map(|i| (0..g).map(|j| f.eval(&[i as f64 * h, j as f64 * h, 0.0, 0.0])).collect())
        .collect();
    let vals: Vec<CMat> = rows.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(g);
    let mut out = vec![CMat::zeros(m, m); g * g];
    let norm = 1.0 / (g * g) as f64;
    for r in 0..m {
        for c in 0..m {
            let mut grid: Vec<Complex64> = vals.iter().map(|v| v[(r, c)]).collect();
            for row in grid.chunks_mut(g) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); g];
            for j in 0..g {
                for i in 0..g {
                    col[i] = grid[i * g + j];
                }
                fft.process(&mut col);
                for i in 0..g {
                    grid[i * g + j] = col[i];
                }
            }
            for (k, z) in grid.into_iter().enumerate() {
                out[k][(r, c)] = z * norm;
            }
        }
    }
    Ok(out)
}

/// Galerkin eigenpairs in the plane-wave basis `e^{ik·x}`, `|k|_∞ ≤ K`.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSample {
    pub operator: String,
    pub cutoff: usize,
    pub m: usize,
    pub eigenvalues: Vec<f64>,
    pub trust_lambda: f64,
    /// Largest coefficient frequency.
    pub band: usize,
    #[serde(skip)]
    eigenvectors: Option<Mat<c64>>,
}

impl Spectrum for SpectrumSample {
    fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn trusted_below(&self) -> f64 {
        self.trust_lambda
    }
}

/// Plane-wave modes in basis order.
fn modes(cutoff: usize) -> Vec<(i64, i64)> {
    let k = cutoff as i64;
    (-k..=k).flat_map(|a| (-k..=k).map(move |b| (a, b))).collect()
}

fn torus_parts(spec: &OperatorSpec) -> Result<(&[ExprMatrix], &ExprMatrix)> {
    match spec.form() {
        OperatorForm::TorusDifferential { c, v } if spec.n() == 2 => Ok((c, v)),
        OperatorForm::TorusDifferential { .. } => Err(Error::validation("operator", "the Galerkin verifier handles n = 2 only")),
        OperatorForm::Symbol => Err(Error::validation("operator", "the Galerkin verifier needs a torus-form operator")),
    }
}

/// Assemble `⟨k′s′|A|ks⟩ = Ĉ^α_{k′−k}(k+k′)_α/2 + V̂_{k′−k}` and diagonalise.
pub fn assemble_and_solve(spec: &OperatorSpec, cutoff: usize, vectors: bool) -> Result<SpectrumSample> {
    let (c, v) = torus_parts(spec)?;
    let min_sampling = 4 * cutoff + 4;
    let ch = c.iter().map(|ca| FourierMatrix::of(ca, min_sampling)).collect::<Result<Vec<_>>>()?;
    let vh = FourierMatrix::of(v, min_sampling)?;
    let band = ch.iter().map(|f| f.band).chain([vh.band]).max().unwrap_or(0);
    if cutoff < band + 2 {
        return Err(Error::CutoffTooSmall { k: cutoff, needed: band + 2 });
    }
    let m = spec.m();
    let md = modes(cutoff);
    let dim = md.len() * m;
    let rows: Vec<Vec<Complex64>> = md
        .par_iter()
        .flat_map_iter(|&(p1, p2)| {
            let (md, ch, vh) = (&md, &ch, &vh);
            (0..m).map(move |s1| {
                let mut row = vec![Complex64::new(0.0, 0.0); dim];
                for (col, &(q1, q2)) in md.iter().enumerate() {
                    let (d1, d2) = (p1 - q1, p2 - q2);
                    let avg = [0.5 * (p1 + q1) as f64, 0.5 * (p2 + q2) as f64];
                    let vblock = match vh.get(d1, d2) {
                        Some(b) => b.clone(),
                        None if ch.iter().all(|f| f.get(d1, d2).is_none()) => continue,
                        None => CMat::zeros(m, m),
                    };
                    let mut block = vblock;
                    for (a, f) in ch.iter().enumerate() {
                        if let Some(cb) = f.get(d1, d2) {
                            block += cb * Complex64::new(avg[a], 0.0);
                        }
                    }
                    for s2 in 0..m {
                        row[col * m + s2] = block[(s1, s2)];
                    }
                }
                row
            })
        })
        .collect();
    let mat = Mat::<c64>::from_fn(dim, dim, |i, j| rows[i][j]);
    let mut asym: f64 = 0.0;
    let mut size: f64 = 0.0;
    for i in 0..dim {
        for j in 0..=i {
            asym = asym.max((rows[i][j] - rows[j][i].conj()).norm());
            size = size.max(rows[i][j].norm());
        }
    }
    if asym > 1e-10 * size.max(1.0) {
        return Err(Error::HermiticityDrift { asymmetry: asym });
    }
    // threaded faer reductions reorder sums; keep output independent of the pool size
    faer::set_global_parallelism(faer::Par::Seq);
    let (eigenvalues, eigenvectors) = if vectors {
        let evd = mat.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let vals = evd.S().column_vector().iter().map(|z| z.re).collect();
        (vals, Some(evd.U().to_owned()))
    } else {
        let vals = mat.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        (vals, None)
    };
    Ok(SpectrumSample {
        operator: spec.name.clone(),
        cutoff,
        m,
        eigenvalues,
        trust_lambda: cutoff as f64 / 2.0,
        band,
        eigenvectors,
    })
}

impl SpectrumSample {
    /// Eigenvalues with `|λ| < trust_lambda`.
    pub fn trusted(&self) -> Vec<f64> {
        self.below(self.trust_lambda)
    }

    /// Eigenvalues with `|λ| < cap`.
    pub fn below(&self, cap: f64) -> Vec<f64> {
        self.eigenvalues.iter().copied().filter(|e| e.abs() < cap).collect()
    }

    /// Signed index: `k ≥ 1` is the k-th positive eigenvalue, `k ≤ 0` counts
    /// down from the largest nonpositive one. Zero modes count as nonpositive.
    pub fn signed(&self, k: i64) -> Option<f64> {
        let first_pos = self.eigenvalues.partition_point(|&e| e < ZERO_MODE_TOL);
        let i = first_pos as i64 + k - 1;
        if i < 0 {
            return None;
        }
        self.eigenvalues.get(i as usize).copied()
    }

    fn signed_index(&self, pos: usize) -> i64 {
        let first_pos = self.eigenvalues.partition_point(|&e| e < ZERO_MODE_TOL);
        pos as i64 - first_pos as i64 + 1
    }

    /// `e(λ, x, x) = Σ_{0<λ_k<λ} ‖v_k(x)‖²`, eigenfunctions normalised in
    /// `L²([0,2π)²)`.
    pub fn spectral_function(&self, lambda: f64, x: &[f64]) -> Result<f64> {
        check_trust(lambda, self.trust_lambda)?;
        let u = self.eigenvectors.as_ref().ok_or_else(|| Error::validation("spectrum", "computed without eigenvectors"))?;
        if x.len() != 2 {
            return Err(Error::DimensionMismatch(format!("point has {} coordinates, need 2", x.len())));
        }
        let md = modes(self.cutoff);
        let waves: Vec<Complex64> =
            md.iter().map(|&(a, b)| Complex64::from_polar(1.0 / (2.0 * PI), a as f64 * x[0] + b as f64 * x[1])).collect();
        let lo = self.eigenvalues.partition_point(|&e| e < ZERO_MODE_TOL);
        let hi = self.eigenvalues.partition_point(|&e| e < lambda);
        let m = self.m;
        let mut total = 0.0;
        for col in lo..hi.max(lo) {
            for s in 0..m {
                let mut z = Complex64::new(0.0, 0.0);
                for (k, w) in waves.iter().enumerate() {
                    z += u[(k * m + s, col)] * w;
                }
                total += z.norm_sqr();
            }
        }
        Ok(total)
    }

    /// Eigenvalue dump: `index, lambda` with signed indices.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "index,lambda")?;
        for (pos, e) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{},{e:.17e}", self.signed_index(pos))?;
        }
        Ok(())
    }
}

/// Largest change of the trusted eigenvalues between cutoffs `K` and `K + 4`.
pub fn cutoff_stability(spec: &OperatorSpec, cutoff: usize) -> Result<f64> {
    let a = assemble_and_solve(spec, cutoff, false)?;
    let b = assemble_and_solve(spec, cutoff + 4, false)?;
    let ta = a.trusted();
    let tb: Vec<f64> = b.eigenvalues.iter().copied().filter(|e| e.abs() < a.trust_lambda).collect();
    if ta.len() != tb.len() {
        return Ok(f64::INFINITY);
    }
    Ok(ta.iter().zip(&tb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Exact spectrum `{c ± |k| : k ∈ Z²}` of `Dirac + c·I` on `T²`.
#[derive(Clone, Debug, Serialize)]
pub struct LatticeSpectrum {
    pub shift: f64,
    pub complete_below: f64,
    pub eigenvalues: Vec<f64>,
}

impl LatticeSpectrum {
    /// All eigenvalues with `|λ| < lambda_max`.
    pub fn shifted_dirac(shift: f64, lambda_max: f64) -> Self {
        let r = (lambda_max + shift.abs()).ceil() as i64 + 1;
        let mut eigenvalues = Vec::new();
        for a in -r..=r {
            for b in -r..=r {
                let k = ((a * a + b * b) as f64).sqrt();
                for e in [shift + k, shift - k] {
                    if e.abs() < lambda_max {
                        eigenvalues.push(e);
                    }
                }
            }
        }
        eigenvalues.sort_by(f64::total_cmp);
        LatticeSpectrum { shift, complete_below: lambda_max, eigenvalues }
    }
}

impl Spectrum for LatticeSpectrum {
    fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn trusted_below(&self) -> f64 {
        self.complete_below
    }
}

/// Plain eigenvalue list, complete below `trusted_below`.
#[derive(Clone, Debug)]
pub struct EigenList {
    values: Vec<f64>,
    trust: f64,
}

impl EigenList {
    pub fn new(mut values: Vec<f64>, trust: f64) -> Self {
        values.sort_by(f64::total_cmp);
        EigenList { values, trust }
    }
}

impl Spectrum for EigenList {
    fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    fn trusted_below(&self) -> f64 {
        self.trust
    }
}

/// Smoothing kernel `ρ` with `ρ̂(t) = exp(1 - 1/(1 - (t/T0)²))` on `|t| < T0`.
#[derive(Clone, Debug)]
pub struct Mollifier {
    pub t0: f64,
    pub grid: usize,
    mu0: f64,
    dmu: f64,
    rho: Vec<f64>,
    phi: Vec<f64>,
}

/// Ratio of the transform window to the support of `ρ̂`.
const PADDING: f64 = 128.0;

impl Mollifier {
    /// `ρ̂` itself.
    pub fn rho_hat(&self, t: f64) -> f64 {
        bump(t / self.t0)
    }

    /// Tabulate `ρ(μ) = (1/2π)∫ρ̂(t)e^{iμt}dt` with one FFT of `grid` points
    /// and its antiderivative by cumulative Simpson. `loop_length` is the
    /// shortest loop of the flow; the support must stay below it.
    pub fn new(t0: f64, grid: usize, loop_length: f64) -> Result<Self> {
        if !(t0 > 0.0) {
            return Err(Error::validation("mollifier width", "must be positive"));
        }
        if t0 >= loop_length {
            return Err(Error::SupportExceedsT { t0, loop_length });
        }
        if grid < 1024 || !grid.is_power_of_two() {
            return Err(Error::validation("mollifier grid", "must be a power of two, at least 1024"));
        }
        let n = grid;
        let dt = 2.0 * PADDING * t0 / n as f64;
        let dmu = 2.0 * PI / (n as f64 * dt);
        let mut buf: Vec<Complex64> = (0..n)
            .map(|j| {
                let t = if j < n / 2 { j as f64 } else { j as f64 - n as f64 } * dt;
                Complex64::new(bump(t / t0), 0.0)
            })
            .collect();
        FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut buf);
        // reorder to ascending μ = (k - n/2)·dμ
        let rho: Vec<f64> = (0..n).map(|k| buf[(k + n / 2) % n].re * dt / (2.0 * PI)).collect();
        let mu0 = -((n / 2) as f64) * dmu;
        let phi = cumulative_simpson(&rho, dmu);
        Ok(Mollifier { t0, grid, mu0, dmu, rho, phi })
    }

    fn locate(&self, mu: f64) -> Option<(usize, f64)> {
        let s = (mu - self.mu0) / self.dmu;
        if s < 0.0 || s >= (self.rho.len() - 1) as f64 {
            return None;
        }
        let i = s.floor() as usize;
        Some((i, s - i as f64))
    }

    pub fn rho(&self, mu: f64) -> f64 {
        match self.locate(mu) {
            None => 0.0,
            Some((i, s)) => {
                let r = &self.rho;
                let (a, b) = (r[i], r[i + 1]);
                let pa = if i > 0 { r[i - 1] } else { a };
                let pb = if i + 2 < r.len() { r[i + 2] } else { b };
                // Catmull-Rom
                let (ma, mb) = (0.5 * (b - pa), 0.5 * (pb - a));
                hermite(a, b, ma, mb, s)
            }
        }
    }

    /// `Φ(μ) = ∫_{-∞}^μ ρ`.
    pub fn antiderivative(&self, mu: f64) -> f64 {
        match self.locate(mu) {
            None if mu < self.mu0 => 0.0,
            None => self.phi[self.phi.len() - 1],
            Some((i, s)) => hermite(self.phi[i], self.phi[i + 1], self.rho[i] * self.dmu, self.rho[i + 1] * self.dmu, s),
        }
    }

    /// `∫ρ` over the table.
    pub fn mass(&self) -> f64 {
        self.phi[self.phi.len() - 1]
    }

    /// Smallest `s` with `|Φ(-s')| < eps` and `|1 - Φ(s')| < eps` for all `s' ≥ s`.
    pub fn tail_width(&self, eps: f64) -> f64 {
        let total = self.mass();
        let mut last_bad = 0usize;
        for (i, p) in self.phi.iter().enumerate().take(self.phi.len() / 2) {
            let j = self.phi.len() - 1 - i;
            if p.abs() >= eps || (total - self.phi[j]).abs() >= eps {
                last_bad = self.phi.len() / 2 - i;
                break;
            }
        }
        last_bad as f64 * self.dmu
    }

    /// Half-width of the tabulated range.
    pub fn range(&self) -> f64 {
        -self.mu0
    }
}

fn hermite(a: f64, b: f64, ma: f64, mb: f64, s: f64) -> f64 {
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * a + (s3 - 2.0 * s2 + s) * ma + (-2.0 * s3 + 3.0 * s2) * b + (s3 - s2) * mb
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Running integral on a uniform grid: Simpson on each pair of cells, the
/// odd points by the three-point rule over the left cell.
fn cumulative_simpson(y: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    let mut i = 0;
    while i + 2 < y.len() {
        out[i + 1] = out[i] + h / 12.0 * (5.0 * y[i] + 8.0 * y[i + 1] - y[i + 2]);
        out[i + 2] = out[i] + h / 3.0 * (y[i] + 4.0 * y[i + 1] + y[i + 2]);
        i += 2;
    }
    if i + 1 < y.len() {
        out[i + 1] = out[i] + 0.5 * h * (y[i] + y[i + 1]);
    }
    out
}

/// `∫N(λ - μ)ρ(μ)dμ = Σ_{λ_k > 0} Φ(λ - λ_k)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MollifiedCount {
    pub lambda: f64,
    pub value: f64,
    /// Estimate of the contribution of eigenvalues above the trusted ceiling,
    /// using `dN ≈ n·(N(Λ)/Λⁿ)·μ^{n-1}dμ`.
    pub truncation_tail: f64,
}

/// Mollified counting function; needs `λ + tail_width(1e-10)` within trust.
pub fn mollified_counting(s: &impl Spectrum, moll: &Mollifier, lambda: f64) -> Result<MollifiedCount> {
    check_trust(lambda + moll.tail_width(1e-10), s.trusted_below())?;
    mollified_sum(s, moll, lambda)
}

/// As [`mollified_counting`] but only needs `λ` within trust; eigenvalues
/// above the ceiling are accounted for by `truncation_tail` alone.
pub fn mollified_counting_truncated(s: &impl Spectrum, moll: &Mollifier, lambda: f64) -> Result<MollifiedCount> {
    check_trust(lambda, s.trusted_below())?;
    mollified_sum(s, moll, lambda)
}

fn mollified_sum(s: &impl Spectrum, moll: &Mollifier, lambda: f64) -> Result<MollifiedCount> {
    let trust = s.trusted_below();
    let ev = s.eigenvalues();
    let value: f64 = ev
        .iter()
        .filter(|&&e| e >= ZERO_MODE_TOL && e < trust)
        .map(|&e| moll.antiderivative(lambda - e))
        .sum();
    let n_top = ev.iter().filter(|&&e| e >= ZERO_MODE_TOL && e < trust).count() as f64;
    let density = n_top / (trust * trust);
    // ∫_Λ^∞ |Φ(λ-μ)| 2 a μ dμ on the table spacing
    let mut tail = 0.0;
    let mut mu = trust;
    while lambda - mu > -moll.range() {
        tail += moll.antiderivative(lambda - mu).abs() * 2.0 * density * mu * moll.dmu;
        mu += moll.dmu;
    }
    Ok(MollifiedCount { lambda, value, truncation_tail: tail })
}

/// Least-squares `b` in `N(λ) ≈ aλⁿ + bλ^{n-1}` with the leading coefficient fixed.
#[derive(Clone, Debug, Serialize)]
pub struct WeylFit {
    pub a: f64,
    pub b: f64,
    /// Standard deviation over bootstrap subranges.
    pub b_err: f64,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub resamples: usize,
    pub seed: u64,
}

const FIT_POINTS: usize = 512;
const RESAMPLES: usize = 200;

fn fit_b(s: &impl Spectrum, a: f64, n: usize, lo: f64, hi: f64) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..FIT_POINTS {
        // cell midpoints, away from the integer-squared radii of lattice spectra
        let lam = lo + (hi - lo) * (i as f64 + 0.5) / FIT_POINTS as f64;
        let w = lam.powi(n as i32 - 1);
        let r = counting(s, lam)? as f64 - a * lam.powi(n as i32);
        num += r * w;
        den += w * w;
    }
    Ok(num / den)
}

/// Fit `b` over `[lo, hi]` and bootstrap its spread over random subranges at
/// least half as long.
pub fn weyl_fit(s: &impl Spectrum, a: f64, n: usize, lo: f64, hi: f64, seed: u64) -> Result<WeylFit> {
    if !(lo >= 1.0 && hi - lo >= 4.0) {
        return Err(Error::InsufficientRange(format!("[{lo}, {hi}]: need lo >= 1 and hi - lo >= 4")));
    }
    check_trust(hi, s.trusted_below())?;
    let b = fit_b(s, a, n, lo, hi)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 * (hi - lo);
    let mut samples = Vec::with_capacity(RESAMPLES);
    for _ in 0..RESAMPLES {
        let len = rng.random_range(half..=hi - lo);
        let start = rng.random_range(lo..=hi - len);
        samples.push(fit_b(s, a, n, start, start + len)?);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
    Ok(WeylFit { a, b, b_err: var.sqrt(), lo, hi, points: FIT_POINTS, resamples: RESAMPLES, seed })
}

/// One row of the comparison report.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComparisonRow {
    pub lambda: f64,
    pub counting: usize,
    pub mollified: f64,
    pub truncation_tail: f64,
    pub two_term: f64,
    pub residual: f64,
}

/// Rows of `N`, mollified `N` and `aλⁿ + bλ^{n-1}`. With `truncated` the
/// mollified sum only needs `λ` within trust and reports its tail separately.
pub fn comparison(
    s: &impl Spectrum,
    moll: &Mollifier,
    a: f64,
    b: f64,
    n: usize,
    lambdas: &[f64],
    truncated: bool,
) -> Result<Vec<ComparisonRow>> {
    lambdas
        .iter()
        .map(|&lam| {
            let mc = if truncated { mollified_counting_truncated(s, moll, lam)? } else { mollified_counting(s, moll, lam)? };
            let two_term = a * lam.powi(n as i32) + b * lam.powi(n as i32 - 1);
            Ok(ComparisonRow {
                lambda: lam,
                counting: counting(s, lam)?,
                mollified: mc.value,
                truncation_tail: mc.truncation_tail,
                two_term,
                residual: mc.value - two_term,
            })
        })
        .collect()
}

/// Comparison report: `lambda, N, mollified_N, two_term, residual, truncation_tail`.
pub fn write_comparison_csv(rows: &[ComparisonRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "lambda,N,mollified_N,two_term,residual,truncation_tail")?;
    for r in rows {
        writeln!(
            w,
            "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.6e}",
            r.lambda, r.counting, r.mollified, r.two_term, r.residual, r.truncation_tail
        )?;
    }
    Ok(())
}
