//! Expression construction helpers used when operators are rewritten
//! (conjugation by a unitary, lowering of differential forms).
//!
//! The constructors fold literal zeros and ones so that derived expressions
//! stay small; nothing else is simplified.

use num_complex::Complex64;

use super::ast::{Expr, Func, Var};

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        _ if a.is_zero() => b,
        _ if b.is_zero() => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        _ if b.is_zero() => a,
        _ if a.is_zero() => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        _ if a.is_zero() || b.is_zero() => Expr::zero(),
        _ if a.is_one() => b,
        _ if b.is_one() => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        return Expr::zero();
    }
    if b.is_one() {
        return a;
    }
    Expr::Div(Box::new(a), Box::new(b))
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::ImagUnit => Expr::Const(-Complex64::i()),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn scale(c: Complex64, a: Expr) -> Expr {
    mul(Expr::Const(c), a)
}

pub fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

pub fn powi(a: Expr, k: i32) -> Expr {
    match k {
        0 => Expr::one(),
        1 => a,
        _ => Expr::Pow(Box::new(a), k),
    }
}

/// Complex conjugate, pushed structurally to the leaves (all variables are real).
pub fn conj(e: &Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(c.conj()),
        Expr::ImagUnit => Expr::Const(-Complex64::i()),
        Expr::Var(v) => Expr::Var(*v),
        Expr::Neg(a) => neg(conj(a)),
        Expr::Add(a, b) => add(conj(a), conj(b)),
        Expr::Sub(a, b) => sub(conj(a), conj(b)),
        Expr::Mul(a, b) => mul(conj(a), conj(b)),
        Expr::Div(a, b) => div(conj(a), conj(b)),
        Expr::Pow(a, k) => powi(conj(a), *k),
        Expr::Call(Func::Conj, a) => (**a).clone(),
        Expr::Call(f @ (Func::Sin | Func::Cos | Func::Exp), a) => call(*f, conj(a)),
        // principal sqrt commutes with conjugation off the branch cut only
        Expr::Call(Func::Sqrt, a) => call(Func::Conj, call(Func::Sqrt, (**a).clone())),
        Expr::Atan2(y, x) => Expr::Atan2(y.clone(), x.clone()),
    }
}

/// Symbolic partial derivative with respect to `var`.
pub fn derivative(e: &Expr, var: Var) -> Expr {
    match e {
        Expr::Const(_) | Expr::ImagUnit => Expr::zero(),
        Expr::Var(v) => {
            if *v == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Neg(a) => neg(derivative(a, var)),
        Expr::Add(a, b) => add(derivative(a, var), derivative(b, var)),
        Expr::Sub(a, b) => sub(derivative(a, var), derivative(b, var)),
        Expr::Mul(a, b) => add(
            mul(derivative(a, var), (**b).clone()),
            mul((**a).clone(), derivative(b, var)),
        ),
        Expr::Div(a, b) => {
            let da = derivative(a, var);
            let db = derivative(b, var);
            sub(
                div(da, (**b).clone()),
                div(mul((**a).clone(), db), powi((**b).clone(), 2)),
            )
        }
        Expr::Pow(a, k) => {
            let da = derivative(a, var);
            if da.is_zero() {
                return Expr::zero();
            }
            mul(mul(Expr::real(*k as f64), powi((**a).clone(), k - 1)), da)
        }
        Expr::Call(f, a) => {
            let da = derivative(a, var);
            if da.is_zero() {
                return Expr::zero();
            }
            let a = (**a).clone();
            match f {
                Func::Sin => mul(call(Func::Cos, a), da),
                Func::Cos => neg(mul(call(Func::Sin, a), da)),
                Func::Exp => mul(call(Func::Exp, a), da),
                Func::Sqrt => div(da, mul(Expr::real(2.0), call(Func::Sqrt, a))),
                Func::Conj => call(Func::Conj, da),
            }
        }
        Expr::Atan2(y, x) => {
            let dy = derivative(y, var);
            let dx = derivative(x, var);
            if dy.is_zero() && dx.is_zero() {
                return Expr::zero();
            }
            let (y, x) = ((**y).clone(), (**x).clone());
            let num = sub(mul(x.clone(), dy), mul(y.clone(), dx));
            div(num, add(powi(x, 2), powi(y, 2)))
        }
    }
}
