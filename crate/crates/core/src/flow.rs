//! Hamiltonian flow of an eigenvalue branch, transport of its eigenvector,
//! and loop detection on the torus.
//!
//! The eigenvector is carried in the parallel gauge `v*dv/dt = 0`, so the
//! gauge-dependent part `-i v*{v, h}` of the phase function vanishes along
//! the flow and only `v*A_sub v - (i/2){v*, A1 - h, v}` is accumulated.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::brackets::generalised_bracket;
use crate::eigen::{decompose, CVec, EigenSystem};
use crate::error::{Error, Result};
use crate::symbol::{subprincipal, CMat, OperatorSpec};

const I: Complex64 = Complex64::new(0.0, 1.0);
const TWO_PI: f64 = 2.0 * PI;

/// Integrator settings.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlowOptions {
    /// Local error tolerance per step, relative to `1 + |y|`.
    pub tol: f64,
    pub max_step: f64,
    pub first_step: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { tol: 1e-10, max_step: 0.1, first_step: 1e-2 }
    }
}

impl FlowOptions {
    pub fn with_tol(tol: f64) -> Self {
        FlowOptions { tol, ..Self::default() }
    }
}

/// One accepted point of a trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct FlowSample {
    pub t: f64,
    /// Position reduced to `[0, 2π)ⁿ`.
    pub x: Vec<f64>,
    /// Number of times each coordinate has wrapped.
    pub winding: Vec<i64>,
    pub xi: Vec<f64>,
    #[serde(skip)]
    pub v: CVec,
    /// `∫₀ᵗ q dτ` without the connection term.
    #[serde(skip)]
    pub phase: Complex64,
    #[serde(skip)]
    state: Vec<f64>,
    #[serde(skip)]
    rate: Vec<f64>,
}

impl FlowSample {
    /// Position on the universal cover.
    pub fn x_unwrapped(&self) -> Vec<f64> {
        let n = self.x.len();
        self.state[..n].to_vec()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub j: i32,
    pub n: usize,
    pub m: usize,
    pub h0: f64,
    pub y: Vec<f64>,
    pub eta: Vec<f64>,
    #[serde(skip)]
    pub v0: CVec,
    pub samples: Vec<FlowSample>,
}

/// Layout of the flat state: `x`, `ξ`, `v` as (re, im) pairs, phase (re, im).
struct Layout {
    n: usize,
    m: usize,
}

impl Layout {
    fn len(&self) -> usize {
        2 * self.n + 2 * self.m + 2
    }

    fn v(&self, s: &[f64]) -> CVec {
        let o = 2 * self.n;
        CVec::from_fn(self.m, |k, _| Complex64::new(s[o + 2 * k], s[o + 2 * k + 1]))
    }

    fn phase(&self, s: &[f64]) -> Complex64 {
        let o = 2 * self.n + 2 * self.m;
        Complex64::new(s[o], s[o + 1])
    }

    fn pack(&self, x: &[f64], xi: &[f64], v: &CVec, phase: Complex64) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.len());
        s.extend_from_slice(x);
        s.extend_from_slice(xi);
        for z in v.iter() {
            s.push(z.re);
            s.push(z.im);
        }
        s.push(phase.re);
        s.push(phase.im);
        s
    }
}

/// Right-hand side of the coupled flow, transport and phase equations.
struct Rhs<'a> {
    spec: &'a OperatorSpec,
    j: i32,
    lay: Layout,
}

impl Rhs<'_> {
    fn system(&self, s: &[f64], t: f64) -> Result<(EigenSystem, crate::symbol::SymbolJet)> {
        let n = self.lay.n;
        let sj = self.spec.symbol_at(&s[..n], &s[n..2 * n])?;
        let es = decompose(&sj).map_err(|e| match e {
            Error::DegenerateEigenvalue { gap } => Error::DegenerateEigenvalueOnPath { t, gap },
            other => other,
        })?;
        Ok((es, sj))
    }

    fn eval(&self, s: &[f64], t: f64) -> Result<Vec<f64>> {
        let n = self.lay.n;
        let (es, sj) = self.system(s, t)?;
        let pos = es.pos(self.j)?;
        let dh = &es.dh[pos];
        let mut ds = Vec::with_capacity(self.lay.len());
        ds.extend_from_slice(&dh[n..]);
        ds.extend(dh[..n].iter().map(|d| -d));
        // dP/dt along the flow; v' = P' v keeps v in the eigenspace with v*v' = 0
        let mut pdot = CMat::zeros(es.m, es.m);
        for a in 0..n {
            pdot += &es.dp[pos][a] * Complex64::new(dh[n + a], 0.0) - &es.dp[pos][n + a] * Complex64::new(dh[a], 0.0);
        }
        let vdot = pdot * self.lay.v(s);
        for z in vdot.iter() {
            ds.push(z.re);
            ds.push(z.im);
        }
        let q = phase_rate(&es, &sj, self.j)?;
        ds.push(q.re);
        ds.push(q.im);
        Ok(ds)
    }
}

/// `v*A_sub v - (i/2){v*, A1 - h, v}` at one point.
pub fn phase_rate(es: &EigenSystem, sj: &crate::symbol::SymbolJet, j: i32) -> Result<Complex64> {
    let pos = es.pos(j)?;
    let a_sub = subprincipal(sj)?;
    Ok((&es.p[pos] * a_sub).trace() - 0.5 * I * generalised_bracket(es, sj, j)?)
}

fn axpy(y: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(y, k)| y + a * k).collect()
}

fn rk4(f: &Rhs, t: f64, y: &[f64], k1: &[f64], h: f64) -> Result<Vec<f64>> {
    let k2 = f.eval(&axpy(y, 0.5 * h, k1), t + 0.5 * h)?;
    let k3 = f.eval(&axpy(y, 0.5 * h, &k2), t + 0.5 * h)?;
    let k4 = f.eval(&axpy(y, h, &k3), t + h)?;
    Ok((0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

fn make_sample(lay: &Layout, t: f64, state: Vec<f64>, rate: Vec<f64>) -> FlowSample {
    let n = lay.n;
    let x = state[..n].iter().map(|v| v.rem_euclid(TWO_PI)).collect();
    let winding = state[..n].iter().map(|v| (v / TWO_PI).floor() as i64).collect();
    FlowSample { t, x, winding, xi: state[n..2 * n].to_vec(), v: lay.v(&state), phase: lay.phase(&state), state, rate }
}

/// Integrate branch `j` from `(y, η)` to `t_end` (either sign) with adaptive
/// RK4 and step doubling.
pub fn integrate(spec: &OperatorSpec, j: i32, y: &[f64], eta: &[f64], t_end: f64, opts: FlowOptions) -> Result<Trajectory> {
    let (n, m) = (spec.n(), spec.m());
    if y.len() != n || eta.len() != n {
        return Err(Error::DimensionMismatch(format!("start point needs {n} + {n} coordinates")));
    }
    if eta.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroCovector);
    }
    if !(opts.tol > 0.0 && opts.max_step > 0.0 && opts.first_step > 0.0) {
        return Err(Error::validation("ode options", "tolerance and step sizes must be positive"));
    }
    let lay = Layout { n, m };
    let rhs = Rhs { spec, j, lay: Layout { n, m } };
    let (es0, _) = rhs.system(&[y, eta].concat(), 0.0)?;
    let pos = es0.pos(j)?;
    let v0 = es0.v[pos].clone();
    let h0 = es0.h[pos];
    let mut state = lay.pack(y, eta, &v0, Complex64::new(0.0, 0.0));
    let mut rate = rhs.eval(&state, 0.0)?;
    let mut t = 0.0;
    let dir = if t_end < 0.0 { -1.0 } else { 1.0 };
    let mut step = opts.first_step.min(opts.max_step);
    let mut samples = vec![make_sample(&lay, 0.0, state.clone(), rate.clone())];
    while dir * (t_end - t) > 0.0 {
        let remaining = (t_end - t).abs();
        let last = step >= remaining;
        let h = dir * step.min(remaining);
        if h.abs() < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::StepUnderflow { t });
        }
        let full = rk4(&rhs, t, &state, &rate, h)?;
        let mid = rk4(&rhs, t, &state, &rate, 0.5 * h)?;
        let mid_rate = rhs.eval(&mid, t + 0.5 * h)?;
        let fine = rk4(&rhs, t + 0.5 * h, &mid, &mid_rate, 0.5 * h)?;
        let err = (0..state.len())
            .map(|i| (fine[i] - full[i]).abs() / 15.0 / (1.0 + state[i].abs()))
            .fold(0.0, f64::max)
            / opts.tol;
        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            state = (0..state.len()).map(|i| fine[i] + (fine[i] - full[i]) / 15.0).collect();
            rate = rhs.eval(&state, t)?;
            samples.push(make_sample(&lay, t, state.clone(), rate.clone()));
        }
        let grow = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 4.0) };
        step = (step.min(remaining) * grow).min(opts.max_step);
    }
    Ok(Trajectory { j, n, m, h0, y: y.to_vec(), eta: eta.to_vec(), v0, samples })
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    fn check_range(&self, t: f64) -> Result<()> {
        let (a, b) = (self.t_start().min(self.t_end()), self.t_start().max(self.t_end()));
        if !(t >= a && t <= b) {
            return Err(Error::OutOfRange { t, start: self.t_start(), end: self.t_end() });
        }
        Ok(())
    }

    /// Full state at `t`, cubic Hermite between accepted steps.
    fn state_at(&self, t: f64) -> Result<Vec<f64>> {
        self.check_range(t)?;
        let forward = self.t_end() >= self.t_start();
        let k = self.samples.partition_point(|s| if forward { s.t < t } else { s.t > t });
        if k < self.samples.len() && self.samples[k].t == t {
            return Ok(self.samples[k].state.clone());
        }
        let k = k.clamp(1, self.samples.len() - 1);
        let (a, b) = (&self.samples[k - 1], &self.samples[k]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let (h00, h10) = (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s);
        let (h01, h11) = (-2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
        Ok((0..a.state.len())
            .map(|i| h00 * a.state[i] + h10 * h * a.rate[i] + h01 * b.state[i] + h11 * h * b.rate[i])
            .collect())
    }

    /// `(x, ξ)` at `t`, with `x` on the universal cover.
    pub fn point_at(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = self.state_at(t)?;
        Ok((s[..self.n].to_vec(), s[self.n..2 * self.n].to_vec()))
    }

    /// Leading propagator symbol `v(t) v(y, η)* exp(-i∫q)`.
    pub fn u0_at(&self, t: f64) -> Result<CMat> {
        let s = self.state_at(t)?;
        let lay = Layout { n: self.n, m: self.m };
        let v = lay.v(&s);
        Ok(v * self.v0.adjoint() * (-I * lay.phase(&s)).exp())
    }

    /// Largest `|h(x(t), ξ(t)) - h0|` over the stored samples.
    pub fn energy_drift(&self, spec: &OperatorSpec) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for s in &self.samples {
            let es = decompose(&spec.symbol_at(&s.x, &s.xi)?)?;
            worst = worst.max((es.eigenvalue(self.j)? - self.h0).abs());
        }
        Ok(worst)
    }

    /// Largest `‖(A1 - h)u₀‖` and `|‖u₀‖_F - 1|` over the stored samples.
    pub fn transport_residuals(&self, spec: &OperatorSpec) -> Result<(f64, f64)> {
        let (mut res, mut norm): (f64, f64) = (0.0, 0.0);
        for s in &self.samples {
            let sj = spec.symbol_at(&s.x, &s.xi)?;
            let es = decompose(&sj)?;
            let h = es.eigenvalue(self.j)?;
            let u0 = self.u0_at(s.t)?;
            let b = sj.a1() - CMat::identity(self.m, self.m) * Complex64::new(h, 0.0);
            res = res.max((b * &u0).norm());
            norm = norm.max((u0.norm() - 1.0).abs());
        }
        Ok((res, norm))
    }

    /// Columns `t, x1..xn, xi1..xin, phase_re, phase_im`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut head = vec!["t".to_string()];
        head.extend((1..=self.n).map(|a| format!("x{a}")));
        head.extend((1..=self.n).map(|a| format!("xi{a}")));
        head.extend(["phase_re".to_string(), "phase_im".to_string()]);
        writeln!(w, "{}", head.join(","))?;
        for s in &self.samples {
            let mut row = vec![format!("{:.17e}", s.t)];
            row.extend(s.x.iter().chain(&s.xi).map(|v| format!("{v:.17e}")));
            row.push(format!("{:.17e}", s.phase.re));
            row.push(format!("{:.17e}", s.phase.im));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `max_β |Σ_α ∂x^α(t)/∂η_β ξ_α(t)|` by central differences in `η`.
pub fn homogeneity_defect(spec: &OperatorSpec, j: i32, y: &[f64], eta: &[f64], t: f64, opts: FlowOptions) -> Result<f64> {
    let base = integrate(spec, j, y, eta, t, opts)?;
    let (_, xi_t) = base.point_at(t)?;
    let scale = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d = 1e-4 * scale;
    let mut worst: f64 = 0.0;
    for b in 0..eta.len() {
        let end = |s: f64| -> Result<Vec<f64>> {
            let mut e = eta.to_vec();
            e[b] += s;
            Ok(integrate(spec, j, y, &e, t, opts)?.point_at(t)?.0)
        };
        let (plus, minus) = (end(d)?, end(-d)?);
        let c: f64 = (0..eta.len()).map(|a| (plus[a] - minus[a]) / (2.0 * d) * xi_t[a]).sum();
        worst = worst.max(c.abs());
    }
    Ok(worst)
}

/// Distance on the `2π`-periodic torus.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| crate::numerics::wrap_angle(p - q).powi(2)).sum::<f64>().sqrt()
}

/// A return of the trajectory to its base point.
#[derive(Clone, Debug, Serialize)]
pub struct Loop {
    pub direction: usize,
    /// Starting covector, normalised to `|h| = 1`.
    pub eta: Vec<f64>,
    pub period: f64,
    /// Torus distance between `x(T)` and `y`.
    pub closure_defect: f64,
    /// `|ξ(T) - η|`; zero for periodic trajectories.
    pub covector_defect: f64,
    pub winding: Vec<i64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchLoops {
    pub j: i32,
    pub y: Vec<f64>,
    pub directions: usize,
    pub loops: Vec<Loop>,
    pub shortest: Option<f64>,
    /// Weighted fraction of directions with at least one return.
    pub looping_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LoopReport {
    pub t_max: f64,
    pub loop_tol: f64,
    pub branches: Vec<BranchLoops>,
    /// Shortest loop over all branches.
    pub shortest: Option<f64>,
}

impl LoopReport {
    pub fn new(t_max: f64, loop_tol: f64, branches: Vec<BranchLoops>) -> Self {
        let shortest = branches.iter().filter_map(|b| b.shortest).min_by(f64::total_cmp);
        LoopReport { t_max, loop_tol, branches, shortest }
    }
}

/// Unit directions with quadrature-like weights. `n = 2`: `res` equispaced
/// angles. `n = 3`: `res + 1` polar angles (poles included) times `2·res`
/// azimuths; every coordinate axis is on the grid.
pub fn direction_grid(n: usize, res: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    if res == 0 {
        return Err(Error::validation("cosphere grid", "must be positive"));
    }
    match n {
        2 => Ok((0..res)
            .map(|k| {
                let t = TWO_PI * k as f64 / res as f64;
                (vec![t.cos(), t.sin()], 1.0)
            })
            .collect()),
        3 => {
            let mut out = vec![(vec![0.0, 0.0, 1.0], 1.0), (vec![0.0, 0.0, -1.0], 1.0)];
            for i in 1..res {
                let th = PI * i as f64 / res as f64;
                for k in 0..2 * res {
                    let ph = PI * k as f64 / res as f64;
                    out.push((vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()], th.sin()));
                }
            }
            Ok(out)
        }
        _ => Err(Error::validation("n", "direction grids exist for n = 2, 3")),
    }
}

/// Scale `ω` onto the cosphere `|h⁽ʲ⁾(y, ·)| = 1`.
pub fn to_cosphere(spec: &OperatorSpec, j: i32, y: &[f64], omega: &[f64]) -> Result<Vec<f64>> {
    let h = decompose(&spec.symbol_at(y, omega)?)?.eigenvalue(j)?.abs();
    Ok(omega.iter().map(|w| w / h).collect())
}

/// Returns within `tol` of `target`, located by bisection on the sign change
/// of the derivative of the squared distance between accepted steps.
fn find_returns(
    traj: &Trajectory,
    dist: &dyn Fn(&[f64]) -> (f64, f64),
    tol: f64,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    // skip the departure from the start point
    let mut departed = false;
    for w in traj.samples.windows(2) {
        let (d0, g0) = dist(&[&w[0].state[..], &w[0].rate[..]].concat());
        let (_, g1) = dist(&[&w[1].state[..], &w[1].rate[..]].concat());
        if d0 > 10.0 * tol.max(1e-6) {
            departed = true;
        }
        if !departed || !(g0 < 0.0 && g1 >= 0.0) || d0 > 1.0 {
            continue;
        }
        let (mut a, mut b) = (w[0].t, w[1].t);
        let probe = |t: f64| -> Result<(f64, f64)> {
            let s = traj.state_at(t)?;
            let lay = Rhs::rate_of(traj, t)?;
            Ok(dist(&[&s[..], &lay[..]].concat()))
        };
        for _ in 0..60 {
            let c = 0.5 * (a + b);
            if probe(c)?.1 < 0.0 {
                a = c;
            } else {
                b = c;
            }
        }
        let t = 0.5 * (a + b);
        let (d, _) = probe(t)?;
        if d < tol {
            out.push((t, d));
        }
    }
    Ok(out)
}

impl Rhs<'_> {
    /// Derivative of the Hermite interpolant, used for bisection.
    fn rate_of(traj: &Trajectory, t: f64) -> Result<Vec<f64>> {
        let forward = traj.t_end() >= traj.t_start();
        let k = traj.samples.partition_point(|s| if forward { s.t < t } else { s.t > t });
        let k = k.clamp(1, traj.samples.len() - 1);
        let (a, b) = (&traj.samples[k - 1], &traj.samples[k]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let (d00, d10) = ((6.0 * s * s - 6.0 * s) / h, 3.0 * s * s - 4.0 * s + 1.0);
        let (d01, d11) = ((-6.0 * s * s + 6.0 * s) / h, 3.0 * s * s - 2.0 * s);
        Ok((0..a.state.len()).map(|i| d00 * a.state[i] + d10 * a.rate[i] + d01 * b.state[i] + d11 * b.rate[i]).collect())
    }
}

fn scan(
    spec: &OperatorSpec,
    j: i32,
    starts: &[(Vec<f64>, Vec<f64>, f64)],
    t_max: f64,
    tol: f64,
    periodic: bool,
    opts: FlowOptions,
) -> Result<Vec<(usize, Vec<Loop>)>> {
    let n = spec.n();
    let found: Vec<Result<(usize, Vec<Loop>)>> = starts
        .par_iter()
        .enumerate()
        .map(|(k, (y, eta, _))| {
            let traj = integrate(spec, j, y, eta, t_max, opts)?;
            let dist = |z: &[f64]| -> (f64, f64) {
                // z = state followed by its rate
                let len = z.len() / 2;
                let (s, r) = (&z[..len], &z[len..]);
                let mut d2 = 0.0;
                let mut g = 0.0;
                for a in 0..n {
                    let w = crate::numerics::wrap_angle(s[a] - y[a]);
                    d2 += w * w;
                    g += w * r[a];
                    if periodic {
                        let e = s[n + a] - eta[a];
                        d2 += e * e;
                        g += e * r[n + a];
                    }
                }
                (d2.sqrt(), g)
            };
            let loops = find_returns(&traj, &dist, tol)?
                .into_iter()
                .map(|(t, d)| -> Result<Loop> {
                    let s = traj.state_at(t)?;
                    let x_end = &s[..n];
                    let xi_end = &s[n..2 * n];
                    Ok(Loop {
                        direction: k,
                        eta: eta.clone(),
                        period: t,
                        closure_defect: torus_distance(x_end, y),
                        covector_defect: xi_end.iter().zip(eta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
                        winding: x_end.iter().zip(y).map(|(a, b)| ((a - b) / TWO_PI).round() as i64).collect(),
                    })
                    .map(|l| if periodic { l } else { Loop { closure_defect: d, ..l } })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((k, loops))
        })
        .collect();
    let mut out = found.into_iter().collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|(k, _)| *k);
    Ok(out)
}

fn summarise(j: i32, y: Vec<f64>, weights: &[f64], per_dir: Vec<(usize, Vec<Loop>)>) -> BranchLoops {
    let total: f64 = weights.iter().sum();
    let hit: f64 = per_dir.iter().filter(|(_, l)| !l.is_empty()).map(|(k, _)| weights[*k]).sum();
    let mut loops: Vec<Loop> = per_dir.into_iter().flat_map(|(_, l)| l).collect();
    loops.sort_by(|a, b| a.direction.cmp(&b.direction).then(a.period.total_cmp(&b.period)));
    let shortest = loops.iter().map(|l| l.period).min_by(f64::total_cmp);
    BranchLoops { j, y, directions: weights.len(), loops, shortest, looping_fraction: if total > 0.0 { hit / total } else { 0.0 } }
}

/// Loops of branch `j` from base point `y` over a grid of cosphere directions,
/// forward in time up to `t_max`.
pub fn find_loops(
    spec: &OperatorSpec,
    j: i32,
    y: &[f64],
    cosphere_grid: usize,
    t_max: f64,
    loop_tol: f64,
    opts: FlowOptions,
) -> Result<BranchLoops> {
    if t_max <= 0.0 {
        return Err(Error::validation("t_max", "must be positive"));
    }
    let dirs = direction_grid(spec.n(), cosphere_grid)?;
    let starts = dirs
        .iter()
        .map(|(w, wt)| Ok((y.to_vec(), to_cosphere(spec, j, y, w)?, *wt)))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = starts.iter().map(|s| s.2).collect();
    let per_dir = scan(spec, j, &starts, t_max, loop_tol, false, opts)?;
    Ok(summarise(j, y.to_vec(), &weights, per_dir))
}

/// Periodic trajectories (return in both `x` and `ξ`) from `points` base
/// points, each with a `cosphere_grid` direction grid.
pub fn find_periodic(
    spec: &OperatorSpec,
    j: i32,
    points: &[Vec<f64>],
    cosphere_grid: usize,
    t_max: f64,
    tol: f64,
    opts: FlowOptions,
) -> Result<Vec<BranchLoops>> {
    if t_max <= 0.0 {
        return Err(Error::validation("t_max", "must be positive"));
    }
    let dirs = direction_grid(spec.n(), cosphere_grid)?;
    points
        .iter()
        .map(|y| {
            let starts = dirs
                .iter()
                .map(|(w, wt)| Ok((y.clone(), to_cosphere(spec, j, y, w)?, *wt)))
                .collect::<Result<Vec<_>>>()?;
            let weights: Vec<f64> = starts.iter().map(|s| s.2).collect();
            let per_dir = scan(spec, j, &starts, t_max, tol, true, opts)?;
            Ok(summarise(j, y.clone(), &weights, per_dir))
        })
        .collect()
}

/// Integrate backwards from `(y, ξ(T))` for time `T` and report how far the
/// end point is from `(y, η)`: `(torus distance, covector distance)`.
pub fn reversibility_defect(spec: &OperatorSpec, j: i32, y: &[f64], lp: &Loop, opts: FlowOptions) -> Result<(f64, f64)> {
    let fwd = integrate(spec, j, y, &lp.eta, lp.period, opts)?;
    let (_, xi_t) = fwd.point_at(lp.period)?;
    let back = integrate(spec, j, y, &xi_t, -lp.period, opts)?;
    let (x0, xi0) = back.point_at(-lp.period)?;
    let dxi = xi0.iter().zip(&lp.eta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok((torus_distance(&x0, y), dxi))
}
