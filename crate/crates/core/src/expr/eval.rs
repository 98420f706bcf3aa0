use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::ast::{Expr, Func};
use super::jet::Jet2;
use super::ExprError;

/// Number type an expression can be evaluated in: plain complex values or jets.
pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn lift(nvars: usize, c: Complex64) -> Self;
    fn coordinate(nvars: usize, slot: usize, value: f64) -> Self;
    fn value(&self) -> Complex64;
    fn recip(&self) -> Option<Self>;
    fn powi(&self, k: i32) -> Option<Self>;
    fn apply(&self, f: Func) -> Option<Self>;
    fn atan2(y: &Self, x: &Self) -> Option<Self>;
}

fn sqrt_ok(z: Complex64) -> bool {
    !(z.im == 0.0 && z.re <= 0.0)
}

impl Scalar for Complex64 {
    fn lift(_: usize, c: Complex64) -> Self {
        c
    }

    fn coordinate(_: usize, _: usize, value: f64) -> Self {
        Complex64::new(value, 0.0)
    }

    fn value(&self) -> Complex64 {
        *self
    }

    fn recip(&self) -> Option<Self> {
        (*self != Complex64::new(0.0, 0.0)).then(|| self.inv())
    }

    fn powi(&self, k: i32) -> Option<Self> {
        if k < 0 && *self == Complex64::new(0.0, 0.0) {
            return None;
        }
        Some(Complex64::powi(self, k))
    }

    fn apply(&self, f: Func) -> Option<Self> {
        Some(match f {
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Exp => self.exp(),
            Func::Sqrt => {
                if !sqrt_ok(*self) {
                    return None;
                }
                self.sqrt()
            }
            Func::Conj => self.conj(),
        })
    }

    fn atan2(y: &Self, x: &Self) -> Option<Self> {
        if y.re == 0.0 && x.re == 0.0 {
            return None;
        }
        Some(Complex64::new(y.re.atan2(x.re), 0.0))
    }
}

impl Scalar for Jet2 {
    fn lift(nvars: usize, c: Complex64) -> Self {
        Jet2::constant(nvars, c)
    }

    fn coordinate(nvars: usize, slot: usize, value: f64) -> Self {
        Jet2::variable(nvars, slot, value)
    }

    fn value(&self) -> Complex64 {
        Jet2::value(self)
    }

    fn recip(&self) -> Option<Self> {
        Jet2::recip(self)
    }

    fn powi(&self, k: i32) -> Option<Self> {
        Jet2::powi(self, k)
    }

    fn apply(&self, f: Func) -> Option<Self> {
        let z = Jet2::value(self);
        Some(match f {
            Func::Sin => {
                let (s, c) = (z.sin(), z.cos());
                self.compose(s, c, -s)
            }
            Func::Cos => {
                let (s, c) = (z.sin(), z.cos());
                self.compose(c, -s, -c)
            }
            Func::Exp => {
                let e = z.exp();
                self.compose(e, e, e)
            }
            Func::Sqrt => {
                if !sqrt_ok(z) {
                    return None;
                }
                let r = z.sqrt();
                let d = 0.5 / r;
                self.compose(r, d, -0.5 * d / z)
            }
            Func::Conj => self.conj(),
        })
    }

    fn atan2(y: &Self, x: &Self) -> Option<Self> {
        Jet2::atan2(y, x)
    }
}

const REAL_TOL: f64 = 1e-14;

/// Evaluate `e` at `point = (x1..xn, p1..pn)` in the number type `T`.
pub fn eval_in<T: Scalar>(e: &Expr, point: &[f64]) -> Result<T, ExprError> {
    if point.len() % 2 != 0 {
        return Err(ExprError::Dimension { expected: point.len() + 1, found: point.len() });
    }
    let n = point.len() / 2;
    let nvars = point.len();
    eval_rec(e, point, n, nvars)
}

fn eval_rec<T: Scalar>(e: &Expr, point: &[f64], n: usize, nvars: usize) -> Result<T, ExprError> {
    let go = |a: &Expr| eval_rec::<T>(a, point, n, nvars);
    Ok(match e {
        Expr::Const(c) => T::lift(nvars, *c),
        Expr::ImagUnit => T::lift(nvars, Complex64::i()),
        Expr::Var(v) => {
            if v.index >= n {
                return Err(ExprError::Dimension { expected: 2 * (v.index + 1), found: nvars });
            }
            let slot = v.slot(n);
            T::coordinate(nvars, slot, point[slot])
        }
        Expr::Neg(a) => -go(a)?,
        Expr::Add(a, b) => go(a)? + go(b)?,
        Expr::Sub(a, b) => go(a)? - go(b)?,
        Expr::Mul(a, b) => go(a)? * go(b)?,
        Expr::Div(a, b) => {
            let d = go(b)?;
            let r = d.recip().ok_or_else(|| ExprError::Domain(format!("division by zero in '{e}'")))?;
            go(a)? * r
        }
        Expr::Pow(a, k) => go(a)?
            .powi(*k)
            .ok_or_else(|| ExprError::Domain(format!("zero raised to negative power in '{e}'")))?,
        Expr::Call(f, a) => go(a)?
            .apply(*f)
            .ok_or_else(|| ExprError::Domain(format!("{} of a nonpositive real in '{e}'", f.name())))?,
        Expr::Atan2(y, x) => {
            let (yv, xv) = (go(y)?, go(x)?);
            for w in [yv.value(), xv.value()] {
                if w.im.abs() > REAL_TOL * (1.0 + w.re.abs()) {
                    return Err(ExprError::Domain(format!("atan2 of a non-real argument in '{e}'")));
                }
            }
            T::atan2(&yv, &xv).ok_or_else(|| ExprError::Domain(format!("atan2(0, 0) in '{e}'")))?
        }
    })
}

/// Value-only evaluation.
pub fn eval(e: &Expr, point: &[f64]) -> Result<Complex64, ExprError> {
    eval_in::<Complex64>(e, point)
}

/// Value, gradient and Hessian with respect to all `2n` coordinates.
pub fn eval_jet2(e: &Expr, point: &[f64]) -> Result<Jet2, ExprError> {
    if point.len() > super::jet::MAX_VARS {
        return Err(ExprError::Dimension { expected: super::jet::MAX_VARS, found: point.len() });
    }
    eval_in::<Jet2>(e, point)
}
