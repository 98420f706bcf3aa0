//! Straight-line form of a set of expressions with shared subexpressions
//! merged, so rewritten operators (whose trees repeat the same factors many
//! times) evaluate in time proportional to their distinct nodes.

use std::collections::HashMap;

use num_complex::Complex64;

use super::ast::{Expr, Func, Var};
use super::eval::Scalar;
use super::ExprError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Op {
    Const(u64, u64),
    Var(Var),
    Neg(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Pow(u32, i32),
    Call(Func, u32),
    Atan2(u32, u32),
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<u32>,
}

struct Builder {
    ops: Vec<Op>,
    index: HashMap<Op, u32>,
}

impl Builder {
    fn push(&mut self, op: Op) -> u32 {
        if let Some(&k) = self.index.get(&op) {
            return k;
        }
        let k = self.ops.len() as u32;
        self.ops.push(op);
        self.index.insert(op, k);
        k
    }

    fn constant(&mut self, c: Complex64) -> u32 {
        // fold -0.0 into 0.0 so equal constants share a node
        let (re, im) = (c.re + 0.0, c.im + 0.0);
        self.push(Op::Const(re.to_bits(), im.to_bits()))
    }

    fn visit(&mut self, e: &Expr) -> u32 {
        let op = match e {
            Expr::Const(c) => return self.constant(*c),
            Expr::ImagUnit => return self.constant(Complex64::i()),
            Expr::Var(v) => Op::Var(*v),
            Expr::Neg(a) => Op::Neg(self.visit(a)),
            Expr::Add(a, b) => {
                let (x, y) = (self.visit(a), self.visit(b));
                Op::Add(x.min(y), x.max(y))
            }
            Expr::Sub(a, b) => Op::Sub(self.visit(a), self.visit(b)),
            Expr::Mul(a, b) => {
                let (x, y) = (self.visit(a), self.visit(b));
                Op::Mul(x.min(y), x.max(y))
            }
            Expr::Div(a, b) => Op::Div(self.visit(a), self.visit(b)),
            Expr::Pow(a, k) => Op::Pow(self.visit(a), *k),
            Expr::Call(f, a) => Op::Call(*f, self.visit(a)),
            Expr::Atan2(y, x) => Op::Atan2(self.visit(y), self.visit(x)),
        };
        self.push(op)
    }
}

const REAL_TOL: f64 = 1e-14;

impl Tape {
    pub fn compile(exprs: &[Expr]) -> Self {
        let mut b = Builder { ops: Vec::new(), index: HashMap::new() };
        let outputs = exprs.iter().map(|e| b.visit(e)).collect();
        Tape { ops: b.ops, outputs }
    }

    /// Number of distinct nodes.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Evaluate every output at `point = (x1..xn, p1..pn)`. Domain errors are
    /// reported without locating the offending output; callers that need the
    /// location re-evaluate the trees.
    pub fn eval_in<T: Scalar>(&self, point: &[f64]) -> Result<Vec<T>, ExprError> {
        let nvars = point.len();
        let n = nvars / 2;
        let mut vals: Vec<T> = Vec::with_capacity(self.ops.len());
        let dom = |what: &str| ExprError::Domain(what.to_string());
        for op in &self.ops {
            let v = match *op {
                Op::Const(re, im) => T::lift(nvars, Complex64::new(f64::from_bits(re), f64::from_bits(im))),
                Op::Var(v) => {
                    if v.index >= n {
                        return Err(ExprError::Dimension { expected: 2 * (v.index + 1), found: nvars });
                    }
                    let slot = v.slot(n);
                    T::coordinate(nvars, slot, point[slot])
                }
                Op::Neg(a) => -vals[a as usize],
                Op::Add(a, b) => vals[a as usize] + vals[b as usize],
                Op::Sub(a, b) => vals[a as usize] - vals[b as usize],
                Op::Mul(a, b) => vals[a as usize] * vals[b as usize],
                Op::Div(a, b) => vals[a as usize] * vals[b as usize].recip().ok_or_else(|| dom("division by zero"))?,
                Op::Pow(a, k) => vals[a as usize].powi(k).ok_or_else(|| dom("zero raised to negative power"))?,
                Op::Call(f, a) => vals[a as usize].apply(f).ok_or_else(|| dom("function outside its domain"))?,
                Op::Atan2(y, x) => {
                    let (yv, xv) = (vals[y as usize], vals[x as usize]);
                    for w in [yv.value(), xv.value()] {
                        if w.im.abs() > REAL_TOL * (1.0 + w.re.abs()) {
                            return Err(dom("atan2 of a non-real argument"));
                        }
                    }
                    T::atan2(&yv, &xv).ok_or_else(|| dom("atan2(0, 0)"))?
                }
            };
            vals.push(v);
        }
        Ok(self.outputs.iter().map(|&k| vals[k as usize]).collect())
    }
}
