use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

/// Largest number of independent variables a jet carries (`2n` with `n <= 3`).
pub const MAX_VARS: usize = 6;
const HESS_LEN: usize = MAX_VARS * (MAX_VARS + 1) / 2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
fn tri(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    b * (b + 1) / 2 + a
}

/// Second-order Taylor jet of a complex scalar in up to [`MAX_VARS`] real variables.
///
/// The Hessian stores only its upper triangle, so it is symmetric by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    nvars: usize,
    value: Complex64,
    grad: [Complex64; MAX_VARS],
    hess: [Complex64; HESS_LEN],
}

impl Jet2 {
    pub fn constant(nvars: usize, value: Complex64) -> Self {
        debug_assert!(nvars <= MAX_VARS);
        Jet2 { nvars, value, grad: [ZERO; MAX_VARS], hess: [ZERO; HESS_LEN] }
    }

    /// The coordinate function `slot` evaluated at `value`.
    pub fn variable(nvars: usize, slot: usize, value: f64) -> Self {
        let mut j = Self::constant(nvars, Complex64::new(value, 0.0));
        j.grad[slot] = Complex64::new(1.0, 0.0);
        j
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn value(&self) -> Complex64 {
        self.value
    }

    pub fn grad(&self, i: usize) -> Complex64 {
        self.grad[i]
    }

    pub fn gradient(&self) -> &[Complex64] {
        &self.grad[..self.nvars]
    }

    pub fn hess(&self, i: usize, j: usize) -> Complex64 {
        self.hess[tri(i, j)]
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = *self;
        out.value *= c;
        for g in &mut out.grad[..self.nvars] {
            *g *= c;
        }
        for h in &mut out.hess[..tri(0, self.nvars)] {
            *h *= c;
        }
        out
    }

    /// Chain rule for `f(self)` given `f`, `f'` and `f''` at the current value.
    pub fn compose(&self, f: Complex64, df: Complex64, d2f: Complex64) -> Self {
        let n = self.nvars;
        let mut out = Jet2::constant(n, f);
        for i in 0..n {
            out.grad[i] = df * self.grad[i];
        }
        for j in 0..n {
            for i in 0..=j {
                let k = tri(i, j);
                out.hess[k] = df * self.hess[k] + d2f * self.grad[i] * self.grad[j];
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        let mut out = *self;
        out.value = out.value.conj();
        for g in &mut out.grad {
            *g = g.conj();
        }
        for h in &mut out.hess {
            *h = h.conj();
        }
        out
    }

    pub fn recip(&self) -> Option<Self> {
        if self.value == ZERO {
            return None;
        }
        let r = self.value.inv();
        Some(self.compose(r, -r * r, 2.0 * r * r * r))
    }

    pub fn powi(&self, k: i32) -> Option<Self> {
        if k == 0 {
            return Some(Jet2::constant(self.nvars, Complex64::new(1.0, 0.0)));
        }
        if k < 0 && self.value == ZERO {
            return None;
        }
        let kf = k as f64;
        let f = self.value.powi(k);
        let df = if k == 1 { Complex64::new(1.0, 0.0) } else { kf * self.value.powi(k - 1) };
        let d2f = match k {
            1 => ZERO,
            2 => Complex64::new(2.0, 0.0),
            _ => kf * (kf - 1.0) * self.value.powi(k - 2),
        };
        Some(self.compose(f, df, d2f))
    }

    /// `atan2(y, x)` for real-valued `y`, `x`.
    pub fn atan2(y: &Self, x: &Self) -> Option<Self> {
        let (yv, xv) = (y.value.re, x.value.re);
        let r2 = xv * xv + yv * yv;
        if r2 == 0.0 {
            return None;
        }
        let n = y.nvars;
        let (fy, fx) = (xv / r2, -yv / r2);
        let r4 = r2 * r2;
        let (fyy, fxx, fxy) = (-2.0 * xv * yv / r4, 2.0 * xv * yv / r4, (yv * yv - xv * xv) / r4);
        let mut out = Jet2::constant(n, Complex64::new(yv.atan2(xv), 0.0));
        for i in 0..n {
            out.grad[i] = fy * y.grad[i] + fx * x.grad[i];
        }
        for j in 0..n {
            for i in 0..=j {
                let k = tri(i, j);
                out.hess[k] = fy * y.hess[k]
                    + fx * x.hess[k]
                    + fyy * y.grad[i] * y.grad[j]
                    + fxx * x.grad[i] * x.grad[j]
                    + fxy * (y.grad[i] * x.grad[j] + x.grad[i] * y.grad[j]);
            }
        }
        Some(out)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(mut self, o: Jet2) -> Jet2 {
        self.value += o.value;
        for i in 0..self.nvars {
            self.grad[i] += o.grad[i];
        }
        for k in 0..tri(0, self.nvars) {
            self.hess[k] += o.hess[k];
        }
        self
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(mut self, o: Jet2) -> Jet2 {
        self.value -= o.value;
        for i in 0..self.nvars {
            self.grad[i] -= o.grad[i];
        }
        for k in 0..tri(0, self.nvars) {
            self.hess[k] -= o.hess[k];
        }
        self
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let n = self.nvars;
        let mut out = Jet2::constant(n, self.value * o.value);
        for i in 0..n {
            out.grad[i] = self.value * o.grad[i] + o.value * self.grad[i];
        }
        for j in 0..n {
            for i in 0..=j {
                let k = tri(i, j);
                out.hess[k] = self.value * o.hess[k]
                    + o.value * self.hess[k]
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i];
            }
        }
        out
    }
}
