use std::fmt;

use num_complex::Complex64;

/// Coordinate kind: a position `x` or its dual momentum `p` (the fibre variable).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    X,
    P,
}

/// A coordinate variable. `index` is zero-based; it prints one-based (`x1`, `p2`, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    pub kind: VarKind,
    pub index: usize,
}

impl Var {
    pub fn x(index: usize) -> Self {
        Var { kind: VarKind::X, index }
    }

    pub fn p(index: usize) -> Self {
        Var { kind: VarKind::P, index }
    }

    /// Slot of this variable in a point laid out as `(x1..xn, p1..pn)`.
    pub fn slot(&self, n: usize) -> usize {
        match self.kind {
            VarKind::X => self.index,
            VarKind::P => n + self.index,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::X => write!(f, "x{}", self.index + 1),
            VarKind::P => write!(f, "p{}", self.index + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Conj,
}

impl Func {
    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Conj => "conj",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "conj" => Func::Conj,
            _ => return None,
        })
    }
}

/// Scalar complex-valued expression in the variables `x1..xn`, `p1..pn`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Complex64),
    ImagUnit,
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
    Atan2(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Const(Complex64::new(0.0, 0.0))
    }

    pub fn one() -> Self {
        Expr::Const(Complex64::new(1.0, 0.0))
    }

    pub fn real(value: f64) -> Self {
        Expr::Const(Complex64::new(value, 0.0))
    }

    pub fn constant(value: Complex64) -> Self {
        Expr::Const(value)
    }

    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    /// Literal constant value if the node is `Const` or `ImagUnit`.
    pub fn as_const(&self) -> Option<Complex64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::ImagUnit => Some(Complex64::i()),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|c| c == Complex64::new(0.0, 0.0))
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(|c| c == Complex64::new(1.0, 0.0))
    }

    /// Visit every variable occurring in the expression.
    pub fn for_each_var(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Const(_) | Expr::ImagUnit => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.for_each_var(f),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Atan2(a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }

    /// Largest one-based variable index used, per kind.
    pub fn max_index(&self) -> (usize, usize) {
        let mut out = (0, 0);
        self.for_each_var(&mut |v| match v.kind {
            VarKind::X => out.0 = out.0.max(v.index + 1),
            VarKind::P => out.1 = out.1.max(v.index + 1),
        });
        out
    }

    pub fn depends_on_p(&self) -> bool {
        self.max_index().1 > 0
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if c.im != 0.0 || c.re < 0.0 || c.re.is_sign_negative() => 0,
            _ => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

fn fmt_real(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    // `{:?}` keeps the shortest representation that round-trips.
    write!(f, "{x:?}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.im == 0.0 {
                    fmt_real(f, c.re)
                } else if c.re == 0.0 {
                    fmt_real(f, c.im)?;
                    write!(f, "*i")
                } else {
                    fmt_real(f, c.re)?;
                    write!(f, "+")?;
                    fmt_real(f, c.im)?;
                    write!(f, "*i")
                }
            }
            Expr::ImagUnit => write!(f, "i"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_child(f, 4)
            }
            Expr::Add(a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " + ")?;
                b.fmt_child(f, 2)
            }
            Expr::Sub(a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " - ")?;
                b.fmt_child(f, 2)
            }
            Expr::Mul(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, "*")?;
                b.fmt_child(f, 3)
            }
            Expr::Div(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, "/")?;
                b.fmt_child(f, 3)
            }
            Expr::Pow(a, k) => {
                a.fmt_child(f, 5)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Atan2(y, x) => write!(f, "atan2({y}, {x})"),
        }
    }
}
