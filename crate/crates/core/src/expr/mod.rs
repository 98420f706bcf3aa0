//! Scalar complex expressions in `x1..xn`, `p1..pn` with second-order jets.
//!
//! The grammar is ordinary infix with function calls; `i` is the imaginary
//! unit and `pi` is π. Exponents must be integer literals. Differentiation is
//! carried by [`Jet2`] through the tree, so mixed partials such as
//! `∂²/∂x1∂p1` come out exact rather than by finite differences.

mod ast;
pub mod build;
mod eval;
mod jet;
mod parser;
mod tape;

use thiserror::Error;

pub use ast::{Expr, Func, Var, VarKind};
pub use eval::{eval, eval_in, eval_jet2, Scalar};
pub use jet::{Jet2, MAX_VARS};
pub use parser::parse;
pub use tape::Tape;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at line {line}, column {column}: expected {expected}, found {found}")]
    Syntax { line: usize, column: usize, expected: String, found: String },
    #[error("unknown identifier '{name}' at line {line}, column {column}")]
    UnknownIdentifier { name: String, line: usize, column: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("point has {found} coordinates, expression needs {expected}")]
    Dimension { expected: usize, found: usize },
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;
    use proptest::prelude::*;
    use proptest::test_runner::RngSeed;

    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn pythagorean_identity() {
        let e = parse("sin(x1)^2 + cos(x1)^2").unwrap();
        for x in [-3.0, 0.1, 0.7, 2.5, 11.0] {
            let v = eval(&e, &[x, 0.3, 1.0, 2.0]).unwrap();
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn polynomial_jet() {
        let e = parse("p1*p1").unwrap();
        let j = eval_jet2(&e, &[0.0, 0.0, 3.0, 0.0]).unwrap();
        assert_eq!(j.value(), Complex64::new(9.0, 0.0));
        assert_eq!(j.grad(2), Complex64::new(6.0, 0.0));
        assert_eq!(j.hess(2, 2), Complex64::new(2.0, 0.0));
    }

    #[test]
    fn bilinear_mixed_partial() {
        let e = parse("x1*p1").unwrap();
        for pt in [[0.0, 1.0, 2.0, 3.0], [-1.5, 0.2, 7.0, -4.0]] {
            let j = eval_jet2(&e, &pt).unwrap();
            assert_eq!(j.hess(0, 2), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn exp_times_momentum_matches_central_differences() {
        let e = parse("exp(x1)*p2").unwrap();
        let pt = [0.0, 0.0, 0.0, 2.0];
        let j = eval_jet2(&e, &pt).unwrap();
        assert!(close(j.value(), Complex64::new(2.0, 0.0), 1e-15));
        assert!(close(j.grad(0), Complex64::new(2.0, 0.0), 1e-15));
        assert!(close(j.hess(0, 3), Complex64::new(1.0, 0.0), 1e-15));
        // central-difference oracle, h = 1e-5
        let h = 1e-5;
        let f = |d0: f64, d3: f64| eval(&e, &[d0, 0.0, 0.0, 2.0 + d3]).unwrap();
        let fd_x = (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h);
        let fd_xp = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
        assert!((fd_x - j.grad(0)).norm() < 1e-8);
        assert!((fd_xp - j.hess(0, 3)).norm() < 1e-6);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(eval(&parse("1/(x1 - x1)").unwrap(), &[1.0, 0.0, 0.0, 0.0]), Err(ExprError::Domain(_))));
        assert!(matches!(eval(&parse("sqrt(x1)").unwrap(), &[-1.0, 0.0, 0.0, 0.0]), Err(ExprError::Domain(_))));
        assert!(matches!(eval_jet2(&parse("sqrt(p1)").unwrap(), &[0.0, 0.0, 0.0, 1.0]), Err(ExprError::Domain(_))));
        assert!(matches!(eval(&parse("x3").unwrap(), &[0.0; 4]), Err(ExprError::Dimension { .. })));
    }

    #[test]
    fn atan2_jet() {
        let e = parse("atan2(p2, p1)").unwrap();
        let j = eval_jet2(&e, &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!((j.value().re - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((j.grad(2).re + 0.5).abs() < 1e-15);
        assert!((j.grad(3).re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rational_polynomial_evaluation_is_exact() {
        let e = parse("x1^3 - 2*x1*p2 + p2^2/4").unwrap();
        let v = eval(&e, &[0.5, 0.0, 0.0, 0.25]).unwrap();
        assert_eq!(v, Complex64::new(0.125 - 0.25 + 0.015625, 0.0));
    }

    #[test]
    fn symbolic_derivative_agrees_with_jets() {
        let e = parse("exp(i*0.4*sin(x1))*(p1 - i*p2)*cos(x2) / (2 + sin(x1)*x2)").unwrap();
        let pt = [0.3, -0.7, 1.2, 0.4];
        let jet = eval_jet2(&e, &pt).unwrap();
        for (slot, var) in [(0, Var::x(0)), (1, Var::x(1)), (2, Var::p(0)), (3, Var::p(1))] {
            let d = build::derivative(&e, var);
            let v = eval(&d, &pt).unwrap();
            assert!(close(v, jet.grad(slot), 1e-13), "slot {slot}");
        }
    }

    #[test]
    fn structural_conjugate() {
        let e = parse("exp(i*x1)*(p1 - i*p2) + sqrt(2 + i)").unwrap();
        let c = build::conj(&e);
        let pt = [0.9, 0.1, -1.3, 0.6];
        assert!(close(eval(&c, &pt).unwrap(), eval(&e, &pt).unwrap().conj(), 1e-15));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-3.0f64..3.0).prop_map(Expr::real),
            Just(Expr::ImagUnit),
            (0usize..2).prop_map(|k| Expr::Var(Var::x(k))),
            (0usize..2).prop_map(|k| Expr::Var(Var::p(k))),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), 0i32..4).prop_map(|(a, k)| Expr::Pow(Box::new(a), k)),
                inner.clone().prop_map(|a| Expr::Call(Func::Sin, Box::new(a))),
                inner.clone().prop_map(|a| Expr::Call(Func::Cos, Box::new(a))),
                inner.clone().prop_map(|a| Expr::Call(Func::Exp, Box::new(a))),
                inner.prop_map(|a| Expr::Call(Func::Conj, Box::new(a))),
            ]
        })
    }

    fn arb_point() -> impl Strategy<Value = [f64; 4]> {
        [-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5]
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 1000, rng_seed: RngSeed::Fixed(0x5eed), ..ProptestConfig::default() })]

        #[test]
        fn print_parse_round_trip(e in arb_expr(), pt in arb_point()) {
            let text = e.to_string();
            let back = parse(&text).unwrap();
            let (a, b) = (eval(&e, &pt), eval(&back, &pt));
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert!(close(a, b, 1e-12) || !a.is_finite(), "{text}: {a} vs {b}"),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }

        #[test]
        fn jets_match_central_differences(e in arb_expr(), pt in arb_point()) {
            let Ok(jet) = eval_jet2(&e, &pt) else { return Ok(()) };
            let scale = 1.0 + jet.value().norm();
            prop_assume!(scale < 1e3 && jet.value().is_finite());
            let f = |d: &[f64; 4]| {
                let p: Vec<f64> = pt.iter().zip(d).map(|(a, b)| a + b).collect();
                eval(&e, &p).unwrap()
            };
            let shift = |a: usize, sa: f64, b: usize, sb: f64| {
                let mut d = [0.0; 4];
                d[a] += sa;
                d[b] += sb;
                d
            };
            // central differences, one Richardson extrapolation step
            let first = |a: usize, h: f64| (f(&shift(a, h, a, 0.0)) - f(&shift(a, -h, a, 0.0))) / (2.0 * h);
            let second = |a: usize, b: usize, h: f64| {
                (f(&shift(a, h, b, h)) - f(&shift(a, h, b, -h)) - f(&shift(a, -h, b, h)) + f(&shift(a, -h, b, -h)))
                    / (4.0 * h * h)
            };
            // shrink the step where the function oscillates fast
            let gmax = (0..4).map(|a| jet.grad(a).norm()).fold(0.0, f64::max);
            let h = 2e-3 / (1.0 + gmax / scale);
            for a in 0..4 {
                let fd = (4.0 * first(a, h / 2.0) - first(a, h)) / 3.0;
                let g = jet.grad(a);
                prop_assert!((fd - g).norm() <= 1e-6 * (scale + g.norm()), "grad {a}: {fd} vs {g}");
                for b in a..4 {
                    let fd2 = (4.0 * second(a, b, h / 2.0) - second(a, b, h)) / 3.0;
                    let hv = jet.hess(a, b);
                    prop_assert!((fd2 - hv).norm() <= 1e-6 * (scale + hv.norm()), "hess {a}{b}: {fd2} vs {hv}");
                }
            }
        }
    }
}
