//! Operator declarations and pointwise symbol evaluation.
//!
//! An operator is given either by its symbols `A1` (homogeneous of degree 1
//! in `ξ`) and `A0`, or on the torus as `½Σ(C^α D_α + D_α C^α) + V` with
//! `D = -i∂`. Both are lowered to the symbol pair on load.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::expr::{self, build, Expr, Jet2, Tape, Var};

pub type CMat = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square matrix of expressions, row-major. Evaluation goes through a
/// compiled [`Tape`], built on first use.
#[derive(Clone, Debug)]
pub struct ExprMatrix {
    dim: usize,
    entries: Vec<Expr>,
    tape: OnceLock<Tape>,
}

impl PartialEq for ExprMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.entries == other.entries
    }
}

impl ExprMatrix {
    fn new(dim: usize, entries: Vec<Expr>) -> Self {
        ExprMatrix { dim, entries, tape: OnceLock::new() }
    }

    fn tape(&self) -> &Tape {
        self.tape.get_or_init(|| Tape::compile(&self.entries))
    }

    pub fn from_rows(rows: Vec<Vec<Expr>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!("expression matrix with {dim} rows is not square")));
        }
        Ok(Self::new(dim, rows.into_iter().flatten().collect()))
    }

    /// Parse a matrix of expression strings.
    pub fn parse(rows: &[&[&str]]) -> Result<Self> {
        let parsed = rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row.iter()
                    .enumerate()
                    .map(|(c, s)| {
                        expr::parse(s).map_err(|e| Error::Expression { field: format!("[{r}][{c}]"), source: e })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(parsed)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(dim, vec![Expr::zero(); dim * dim])
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |r, c| if r == c { Expr::one() } else { Expr::zero() })
    }

    /// Constant complex matrix.
    pub fn constant(m: &CMat) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        Self::from_fn(m.nrows(), |r, c| Expr::constant(m[(r, c)]))
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Expr) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(f(r, c));
            }
        }
        Self::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> &Expr {
        &self.entries[r * self.dim + c]
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Self {
        Self::new(self.dim, self.entries.iter().map(f).collect())
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::from_fn(self.dim, |r, c| build::add(self.get(r, c).clone(), o.get(r, c).clone()))
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::from_fn(self.dim, |r, c| build::sub(self.get(r, c).clone(), o.get(r, c).clone()))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|e| build::scale(s, e.clone()))
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self::from_fn(self.dim, |r, c| {
            (0..self.dim).fold(Expr::zero(), |acc, k| {
                build::add(acc, build::mul(self.get(r, k).clone(), o.get(k, c).clone()))
            })
        })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| build::conj(self.get(c, r)))
    }

    pub fn derivative(&self, var: Var) -> Self {
        self.map(|e| build::derivative(e, var))
    }

    /// `(max x index, max p index)` over all entries, one-based.
    pub fn max_index(&self) -> (usize, usize) {
        self.entries.iter().fold((0, 0), |(a, b), e| {
            let (x, p) = e.max_index();
            (a.max(x), b.max(p))
        })
    }

    pub fn depends_on_p(&self) -> bool {
        self.entries.iter().any(Expr::depends_on_p)
    }

    pub fn eval(&self, point: &[f64]) -> Result<CMat> {
        match self.tape().eval_in::<Complex64>(point) {
            Ok(v) => Ok(CMat::from_row_slice(self.dim, self.dim, &v)),
            Err(_) => Err(self.locate_error(point)),
        }
    }

    fn jets(&self, point: &[f64]) -> Result<Vec<Jet2>> {
        if point.len() > expr::MAX_VARS {
            return Err(Error::DimensionMismatch(format!("{} coordinates exceed the jet capacity", point.len())));
        }
        self.tape().eval_in::<Jet2>(point).map_err(|_| self.locate_error(point))
    }

    /// Re-evaluate entry by entry to name the field that failed.
    fn locate_error(&self, point: &[f64]) -> Error {
        for (k, e) in self.entries.iter().enumerate() {
            let r = if point.len() <= expr::MAX_VARS { expr::eval_jet2(e, point).map(|_| ()) } else { expr::eval(e, point).map(|_| ()) };
            if let Err(err) = r {
                return Error::Expression { field: format!("[{}][{}]", k / self.dim, k % self.dim), source: err };
            }
        }
        Error::Expression { field: "matrix".into(), source: expr::ExprError::Domain("evaluation failed".into()) }
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.dim).map(|r| (0..self.dim).map(|c| self.get(r, c).to_string()).collect()).collect()
    }
}

/// How the operator was declared.
#[derive(Clone, Debug)]
pub enum OperatorForm {
    Symbol,
    /// Coefficients `C^α(x)` and `V(x)` of `½Σ(C^α D_α + D_α C^α) + V`.
    TorusDifferential { c: Vec<ExprMatrix>, v: ExprMatrix },
}

/// A validated first-order `m×m` operator in `n` dimensions.
#[derive(Clone, Debug)]
pub struct OperatorSpec {
    pub name: String,
    n: usize,
    m: usize,
    form: OperatorForm,
    a1: ExprMatrix,
    a0: ExprMatrix,
}

pub const MIN_DIM: usize = 2;
pub const MAX_N: usize = 3;
pub const MAX_M: usize = 8;

/// Options for validation on load.
#[derive(Clone, Copy, Debug)]
pub struct Validation {
    pub samples: usize,
    pub homogeneity_tol: f64,
    pub hermiticity_tol: f64,
    /// Zero-eigenvalue threshold relative to `‖A1‖`.
    pub ellipticity_tol: f64,
    /// Minimum eigenvalue gap relative to the spectral radius.
    pub gap_tol: f64,
}

impl Default for Validation {
    fn default() -> Self {
        Validation { samples: 50, homogeneity_tol: 1e-10, hermiticity_tol: 1e-12, ellipticity_tol: 1e-10, gap_tol: 1e-6 }
    }
}

impl OperatorSpec {
    /// Symbol-form operator, validated.
    pub fn from_symbol(name: &str, n: usize, a1: ExprMatrix, a0: ExprMatrix) -> Result<Self> {
        let spec = Self::symbol_unchecked(name, n, a1, a0)?;
        spec.validate(&Validation::default())
    }

    /// Torus-form operator, validated.
    pub fn from_torus(name: &str, c: Vec<ExprMatrix>, v: ExprMatrix) -> Result<Self> {
        let spec = Self::torus_unchecked(name, c, v)?;
        spec.validate(&Validation::default())
    }

    /// Symbol-form operator from `A1` and `A_sub`; `A0 = A_sub - (i/2)Σ ∂²A1/∂x^α∂ξ_α`
    /// is formed symbolically. Validated.
    pub fn from_subprincipal(name: &str, n: usize, a1: ExprMatrix, a_sub: ExprMatrix) -> Result<Self> {
        let a0 = a_sub.sub(&mixed_trace(&a1, n).scale(Complex64::new(0.0, 0.5)));
        Self::from_symbol(name, n, a1, a0)
    }

    /// Symbol-form operator with only structural checks (dimensions, variables).
    pub fn symbol_unchecked(name: &str, n: usize, a1: ExprMatrix, a0: ExprMatrix) -> Result<Self> {
        let m = a1.dim();
        check_dims(n, m)?;
        if a0.dim() != m {
            return Err(Error::validation("A0", format!("expected {m}x{m}, got {0}x{0}", a0.dim())));
        }
        check_indices("A1", &a1, n)?;
        check_indices("A0", &a0, n)?;
        Ok(OperatorSpec { name: name.to_string(), n, m, form: OperatorForm::Symbol, a1, a0 })
    }

    /// Torus-form operator with only structural checks.
    pub fn torus_unchecked(name: &str, c: Vec<ExprMatrix>, v: ExprMatrix) -> Result<Self> {
        let n = c.len();
        let m = v.dim();
        check_dims(n, m)?;
        for (a, ca) in c.iter().enumerate() {
            if ca.dim() != m {
                return Err(Error::validation(format!("C[{a}]"), format!("expected {m}x{m}, got {0}x{0}", ca.dim())));
            }
            check_indices(&format!("C[{a}]"), ca, n)?;
            if ca.depends_on_p() {
                return Err(Error::validation(format!("C[{a}]"), "coefficients must depend on x only"));
            }
        }
        check_indices("V", &v, n)?;
        if v.depends_on_p() {
            return Err(Error::validation("V", "coefficients must depend on x only"));
        }
        let (a1, a0) = lower_torus(&c, &v);
        Ok(OperatorSpec { name: name.to_string(), n, m, form: OperatorForm::TorusDifferential { c, v }, a1, a0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn form(&self) -> &OperatorForm {
        &self.form
    }

    pub fn a1(&self) -> &ExprMatrix {
        &self.a1
    }

    pub fn a0(&self) -> &ExprMatrix {
        &self.a0
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.form, OperatorForm::TorusDifferential { .. })
    }

    /// Number of positive eigenvalues of `A1` (constant by ellipticity).
    pub fn m_plus(&self) -> Result<usize> {
        let x = vec![0.0; self.n];
        let mut xi = vec![0.0; self.n];
        xi[0] = 1.0;
        let a1 = self.a1.eval(&concat(&x, &xi))?;
        let (h, _) = crate::eigen::jacobi_eigen(&a1);
        Ok(h.iter().filter(|&&e| e > 0.0).count())
    }

    /// Positive branch indices `1..=m⁺`.
    pub fn positive_branches(&self) -> Result<Vec<i32>> {
        Ok((1..=self.m_plus()? as i32).collect())
    }

    /// All branch indices `-m⁻..=-1, 1..=m⁺`.
    pub fn branches(&self) -> Result<Vec<i32>> {
        let mp = self.m_plus()? as i32;
        let mm = self.m as i32 - mp;
        Ok((-mm..=-1).chain(1..=mp).collect())
    }

    /// Validate Hermiticity, homogeneity, ellipticity and simplicity on a
    /// deterministic Halton sample of `M × cosphere`.
    pub fn validate(mut self, opts: &Validation) -> Result<Self> {
        let pts = sample_points(self.n, opts.samples);
        // Hermiticity of A1; tiny asymmetry is symmetrised away.
        let mut max_asym = 0.0f64;
        for (x, xi) in &pts {
            let a = self.a1.eval(&concat(x, xi))?;
            let scale = 1.0 + a.norm();
            max_asym = max_asym.max((&a - a.adjoint()).norm() / scale);
        }
        if max_asym >= opts.hermiticity_tol {
            return Err(Error::validation("A1", format!("not Hermitian (asymmetry {max_asym:.3e})")));
        }
        if max_asym > 0.0 {
            let adj = self.a1.adjoint();
            self.a1 = self.a1.add(&adj).scale(Complex64::new(0.5, 0.0));
        }
        if let OperatorForm::TorusDifferential { c, v } = &self.form {
            for (name, mat) in c.iter().enumerate().map(|(a, m)| (format!("C[{a}]"), m)).chain([("V".to_string(), v)]) {
                for (x, _) in &pts {
                    let e = mat.eval(&concat(x, &vec![0.0; self.n]))?;
                    let asym = (&e - e.adjoint()).norm() / (1.0 + e.norm());
                    if asym >= opts.hermiticity_tol {
                        return Err(Error::validation(name, format!("not Hermitian (asymmetry {asym:.3e})")));
                    }
                }
            }
        }
        let mut mplus = None;
        for (x, xi) in &pts {
            let a = self.a1.eval(&concat(x, xi))?;
            let norm = a.norm();
            for t in [0.5, 2.0, 7.0] {
                let txi: Vec<f64> = xi.iter().map(|v| v * t).collect();
                let at = self.a1.eval(&concat(x, &txi))?;
                let defect = (&at - &a * Complex64::new(t, 0.0)).norm() / (t * norm.max(1e-300));
                if defect > opts.homogeneity_tol {
                    return Err(Error::validation(
                        "A1",
                        format!("not homogeneous of degree 1 in p (defect {defect:.3e} at scale {t})"),
                    ));
                }
            }
            let (h, _) = crate::eigen::jacobi_eigen(&a);
            let anorm = h.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            if let Some(&z) = h.iter().min_by(|a, b| a.abs().total_cmp(&b.abs())) {
                if z.abs() < opts.ellipticity_tol * anorm.max(1e-300) {
                    return Err(Error::Ellipticity { x: x.clone(), xi: xi.clone(), eigenvalue: z });
                }
            }
            let gap = h.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            let tol = opts.gap_tol * anorm;
            if gap < tol {
                return Err(Error::Multiplicity { x: x.clone(), xi: xi.clone(), gap, tol });
            }
            let mp = h.iter().filter(|&&e| e > 0.0).count();
            match mplus {
                None => mplus = Some(mp),
                Some(prev) if prev != mp => {
                    return Err(Error::Ellipticity { x: x.clone(), xi: xi.clone(), eigenvalue: z_near(&h) });
                }
                _ => {}
            }
        }
        if mplus == Some(0) {
            return Err(Error::validation("A1", "principal symbol has no positive eigenvalues"));
        }
        Ok(self)
    }

    /// Symbol jets at `(x, ξ)`.
    pub fn symbol_at(&self, x: &[f64], xi: &[f64]) -> Result<SymbolJet> {
        if x.len() != self.n || xi.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "point has {} + {} coordinates, operator has n = {}",
                x.len(),
                xi.len(),
                self.n
            )));
        }
        if xi.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroCovector);
        }
        let point = concat(x, xi);
        Ok(SymbolJet {
            n: self.n,
            m: self.m,
            x: x.to_vec(),
            xi: xi.to_vec(),
            a1: self.a1.jets(&point)?,
            a0: self.a0.eval(&point)?,
        })
    }

    /// `A_sub` at a point.
    pub fn subprincipal_at(&self, x: &[f64], xi: &[f64]) -> Result<CMat> {
        subprincipal(&self.symbol_at(x, xi)?)
    }

}

fn z_near(h: &[f64]) -> f64 {
    h.iter().copied().min_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0)
}

fn check_dims(n: usize, m: usize) -> Result<()> {
    if !(MIN_DIM..=MAX_N).contains(&n) {
        return Err(Error::validation("n", format!("must be in {MIN_DIM}..={MAX_N}, got {n}")));
    }
    if !(MIN_DIM..=MAX_M).contains(&m) {
        return Err(Error::validation("m", format!("must be in {MIN_DIM}..={MAX_M}, got {m}")));
    }
    Ok(())
}

fn check_indices(field: &str, mat: &ExprMatrix, n: usize) -> Result<()> {
    let (x, p) = mat.max_index();
    if x > n || p > n {
        return Err(Error::validation(field, format!("uses variable index {} but n = {n}", x.max(p))));
    }
    Ok(())
}

/// `Σ_α ∂²M/∂x^α∂ξ_α`, symbolically.
pub(crate) fn mixed_trace(mat: &ExprMatrix, n: usize) -> ExprMatrix {
    (0..n).fold(ExprMatrix::zeros(mat.dim()), |acc, a| acc.add(&mat.derivative(Var::p(a)).derivative(Var::x(a))))
}

/// `A1 = Σ C^α ξ_α`, `A0 = V - (i/2) Σ ∂C^α/∂x^α`, so that `A_sub = V`.
fn lower_torus(c: &[ExprMatrix], v: &ExprMatrix) -> (ExprMatrix, ExprMatrix) {
    let m = v.dim();
    let mut a1 = ExprMatrix::zeros(m);
    let mut div = ExprMatrix::zeros(m);
    for (a, ca) in c.iter().enumerate() {
        a1 = a1.add(&ca.map(|e| build::mul(e.clone(), Expr::Var(Var::p(a)))));
        div = div.add(&ca.derivative(Var::x(a)));
    }
    let a0 = v.sub(&div.scale(Complex64::new(0.0, 0.5)));
    (a1, a0)
}

pub(crate) fn concat(x: &[f64], xi: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(x.len() + xi.len());
    p.extend_from_slice(x);
    p.extend_from_slice(xi);
    p
}

/// Radical-inverse Halton sequence value.
pub(crate) fn halton(index: usize, base: usize) -> f64 {
    let (mut f, mut r, mut i) = (1.0, 0.0, index);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 6] = [2, 3, 5, 7, 11, 13];

/// `count` deterministic points `(x, ξ)` with `x ∈ [0,2π)^n`, `|ξ| = 1`.
pub fn sample_points(n: usize, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    use std::f64::consts::PI;
    (1..=count)
        .map(|k| {
            let x: Vec<f64> = (0..n).map(|a| 2.0 * PI * halton(k, PRIMES[a])).collect();
            let u = halton(k, PRIMES[n]);
            let xi = if n == 2 {
                let t = 2.0 * PI * u;
                vec![t.cos(), t.sin()]
            } else {
                let z = 2.0 * halton(k, PRIMES[n + 1]) - 1.0;
                let r = (1.0 - z * z).sqrt();
                let t = 2.0 * PI * u;
                vec![r * t.cos(), r * t.sin(), z]
            };
            (x, xi)
        })
        .collect()
}

/// Jets of `A1` and `A0` at one point of the cotangent bundle.
///
/// Derivative slots are `0..n` for `x` and `n..2n` for `ξ`.
#[derive(Clone, Debug)]
pub struct SymbolJet {
    pub n: usize,
    pub m: usize,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    a1: Vec<Jet2>,
    a0: CMat,
}

impl SymbolJet {
    fn collect(&self, src: &[Jet2], f: impl Fn(&Jet2) -> Complex64) -> CMat {
        CMat::from_fn(self.m, self.m, |r, c| f(&src[r * self.m + c]))
    }

    pub fn a1(&self) -> CMat {
        self.collect(&self.a1, Jet2::value)
    }

    pub fn a0(&self) -> CMat {
        self.a0.clone()
    }

    /// `∂A1/∂z^μ`.
    pub fn a1_d(&self, mu: usize) -> CMat {
        self.collect(&self.a1, |j| j.grad(mu))
    }

    pub fn a1_dd(&self, mu: usize, nu: usize) -> CMat {
        self.collect(&self.a1, |j| j.hess(mu, nu))
    }

    /// All `2n` first derivatives of `A1`.
    pub fn a1_grad(&self) -> Vec<CMat> {
        (0..2 * self.n).map(|mu| self.a1_d(mu)).collect()
    }

    /// `Σ_α ∂²A1/∂x^α∂ξ_α`.
    pub fn a1_mixed(&self) -> CMat {
        let mut out = CMat::zeros(self.m, self.m);
        for a in 0..self.n {
            out += self.a1_dd(a, self.n + a);
        }
        out
    }
}

/// `A_sub = A0 + (i/2) Σ_α ∂²A1/∂x^α∂ξ_α`, checked to be Hermitian.
pub fn subprincipal(sj: &SymbolJet) -> Result<CMat> {
    let s = subprincipal_raw(sj);
    let asym = (&s - s.adjoint()).norm();
    if asym > 1e-12 * (1.0 + s.norm()) {
        return Err(Error::HermiticityDrift { asymmetry: asym });
    }
    Ok((&s + s.adjoint()) * Complex64::new(0.5, 0.0))
}

/// `A_sub` without the Hermiticity check.
pub fn subprincipal_raw(sj: &SymbolJet) -> CMat {
    sj.a0() + sj.a1_mixed() * Complex64::new(0.0, 0.5)
}

// ---------------------------------------------------------------- config

/// JSON operator configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorConfig {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub form: String,
    #[serde(default, rename = "A1")]
    pub a1: Option<Value>,
    #[serde(default, rename = "A0")]
    pub a0: Option<Value>,
    #[serde(default, rename = "C")]
    pub c: Option<Vec<Value>>,
    #[serde(default, rename = "V")]
    pub v: Option<Value>,
}

/// Parse and validate a JSON operator configuration.
pub fn load_spec(text: &str) -> Result<OperatorSpec> {
    let cfg: OperatorConfig = serde_json::from_str(text)?;
    spec_from_config(&cfg)
}

pub fn spec_from_config(cfg: &OperatorConfig) -> Result<OperatorSpec> {
    let name = if cfg.name.is_empty() { "operator".to_string() } else { cfg.name.clone() };
    check_dims(cfg.n, cfg.m)?;
    match cfg.form.as_str() {
        "symbol" => {
            let a1 = matrix_field("A1", cfg.a1.as_ref(), cfg.m, false)?;
            let a0 = matrix_field("A0", cfg.a0.as_ref(), cfg.m, true)?;
            OperatorSpec::from_symbol(&name, cfg.n, a1, a0)
        }
        "torus_differential" => {
            let cs = cfg.c.as_ref().ok_or_else(|| Error::validation("C", "missing"))?;
            if cs.len() != cfg.n {
                return Err(Error::validation("C", format!("expected {} matrices, got {}", cfg.n, cs.len())));
            }
            let c = cs
                .iter()
                .enumerate()
                .map(|(a, v)| matrix_field(&format!("C[{a}]"), Some(v), cfg.m, false))
                .collect::<Result<Vec<_>>>()?;
            let v = matrix_field("V", cfg.v.as_ref(), cfg.m, true)?;
            OperatorSpec::from_torus(&name, c, v)
        }
        other => Err(Error::validation("form", format!("expected \"symbol\" or \"torus_differential\", got \"{other}\""))),
    }
}

/// An `m×m` matrix of strings or numbers; `0` (or absence, when allowed) means zero.
fn matrix_field(field: &str, value: Option<&Value>, m: usize, optional: bool) -> Result<ExprMatrix> {
    let value = match value {
        None if optional => return Ok(ExprMatrix::zeros(m)),
        None => return Err(Error::validation(field, "missing")),
        Some(v) => v,
    };
    if value.as_f64() == Some(0.0) {
        return Ok(ExprMatrix::zeros(m));
    }
    let rows = value.as_array().ok_or_else(|| Error::validation(field, "expected a matrix (array of rows) or 0"))?;
    if rows.len() != m {
        return Err(Error::validation(field, format!("expected {m} rows, got {}", rows.len())));
    }
    let mut out = Vec::with_capacity(m);
    for (r, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::validation(format!("{field}[{r}]"), "expected an array"))?;
        if row.len() != m {
            return Err(Error::validation(format!("{field}[{r}]"), format!("expected {m} entries, got {}", row.len())));
        }
        let mut parsed = Vec::with_capacity(m);
        for (c, entry) in row.iter().enumerate() {
            let path = format!("{field}[{r}][{c}]");
            let e = match entry {
                Value::String(s) => expr::parse(s).map_err(|e| Error::Expression { field: path, source: e })?,
                Value::Number(num) => Expr::real(num.as_f64().unwrap_or(0.0)),
                _ => return Err(Error::validation(path, "expected an expression string or a number")),
            };
            parsed.push(e);
        }
        out.push(parsed);
    }
    ExprMatrix::from_rows(out)
}

/// Serialise a spec back to the configuration schema.
pub fn spec_to_config(spec: &OperatorSpec) -> OperatorConfig {
    let mat = |m: &ExprMatrix| serde_json::to_value(m.to_strings()).expect("strings serialise");
    match spec.form() {
        OperatorForm::Symbol => OperatorConfig {
            name: spec.name.clone(),
            n: spec.n,
            m: spec.m,
            form: "symbol".into(),
            a1: Some(mat(&spec.a1)),
            a0: Some(mat(&spec.a0)),
            c: None,
            v: None,
        },
        OperatorForm::TorusDifferential { c, v } => OperatorConfig {
            name: spec.name.clone(),
            n: spec.n,
            m: spec.m,
            form: "torus_differential".into(),
            a1: None,
            a0: None,
            c: Some(c.iter().map(mat).collect()),
            v: Some(mat(v)),
        },
    }
}

/// Constant matrix of zeros, handy for tests.
pub fn zeros(m: usize) -> CMat {
    CMat::from_element(m, m, ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const DIRAC: &str = r#"{"name":"dirac","n":2,"m":2,"form":"symbol",
        "A1":[[0,"p1-i*p2"],["p1+i*p2",0]],"A0":0}"#;

    #[test]
    fn dirac_config_loads() {
        let s = load_spec(DIRAC).unwrap();
        assert_eq!((s.n(), s.m()), (2, 2));
        let sj = s.symbol_at(&[0.3, 0.1], &[1.0, 0.0]).unwrap();
        let a = sj.a1();
        assert_eq!(a[(0, 1)], c(1.0, 0.0));
        assert_eq!(a[(1, 0)], c(1.0, 0.0));
        assert_eq!(a[(0, 0)], c(0.0, 0.0));
    }

    #[test]
    fn diagonal_entry_still_valid() {
        let cfg = DIRAC.replace(r#"[[0,"p1-i*p2"]"#, r#"[["p1","p1-i*p2"]"#);
        assert!(load_spec(&cfg).is_ok());
    }

    #[test]
    fn double_eigenvalue_rejected() {
        let cfg = r#"{"n":2,"m":2,"form":"symbol","A1":[["p1",0],[0,"p1"]],"A0":0}"#;
        assert!(matches!(load_spec(cfg), Err(Error::Multiplicity { .. })));
    }

    #[test]
    fn bad_configs_name_the_field() {
        let cfg = r#"{"n":2,"m":2,"form":"symbol","A1":[[0,"p1-i*p2"]],"A0":0}"#;
        match load_spec(cfg) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "A1"),
            other => panic!("{other:?}"),
        }
        let cfg = r#"{"n":2,"m":2,"form":"symbol","A1":[[0,"p1-i*p2"],["p1+i*q2",0]],"A0":0}"#;
        match load_spec(cfg) {
            Err(Error::Expression { field, .. }) => assert_eq!(field, "A1[1][0]"),
            other => panic!("{other:?}"),
        }
        let cfg = r#"{"n":2,"m":2,"form":"symbol","A1":[[0,"p1-i*p2"],["p1-i*p2",0]],"A0":0}"#;
        assert!(matches!(load_spec(cfg), Err(Error::Validation { .. })));
        let cfg = r#"{"n":2,"m":2,"form":"symbol","A1":[[0,"p1*p1-i*p2"],["p1*p1+i*p2",0]],"A0":0}"#;
        assert!(matches!(load_spec(cfg), Err(Error::Validation { .. })));
        let cfg = r#"{"n":2,"m":2,"form":"symbol","A1":[["p1",0],[0,"p2"]],"A0":0}"#;
        assert!(load_spec(cfg).is_err());
        let cfg = r#"{"n":2,"m":9,"form":"symbol","A1":0}"#;
        assert!(matches!(load_spec(cfg), Err(Error::Validation { .. })));
    }

    #[test]
    fn torus_form_subprincipal_is_v() {
        let cfg = r#"{"n":2,"m":2,"form":"torus_differential",
            "C":[[[0,1],[1,0]],[[0,"-i"],["i",0]]],"V":[[0.3,0],[0,0.3]]}"#;
        let s = load_spec(cfg).unwrap();
        for (x, xi) in sample_points(2, 10) {
            let sub = s.subprincipal_at(&x, &xi).unwrap();
            assert!((sub - CMat::identity(2, 2) * c(0.3, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn torus_form_with_variable_coefficients_has_subprincipal_v() {
        let cx = ExprMatrix::parse(&[&["1 + 0.3*sin(x1)", "0.2*cos(x2)"], &["0.2*cos(x2)", "-1"]]).unwrap();
        let cy = ExprMatrix::parse(&[&["0.1*sin(x2)", "-i*(1+0.2*cos(x1))"], &["i*(1+0.2*cos(x1))", "0"]]).unwrap();
        let v = ExprMatrix::parse(&[&["0.2", "0.1*exp(i*x1)"], &["0.1*exp(-i*x1)", "sin(x2)"]]).unwrap();
        let s = OperatorSpec::torus_unchecked("t", vec![cx, cy], v.clone()).unwrap();
        for (x, xi) in sample_points(2, 20) {
            let sub = s.subprincipal_at(&x, &xi).unwrap();
            let want = v.eval(&concat(&x, &[0.0, 0.0])).unwrap();
            assert!((sub - want).norm() < 1e-14);
        }
    }

    #[test]
    fn torus_form_matches_hand_expanded_symbol() {
        let c1 = ExprMatrix::parse(&[&["sin(x1)", "1"], &["1", "0"]]).unwrap();
        let c2 = ExprMatrix::parse(&[&["0", "-i"], &["i", "cos(x2)"]]).unwrap();
        let v = ExprMatrix::parse(&[&["0.3", "0"], &["0", "0.3"]]).unwrap();
        let t = OperatorSpec::torus_unchecked("t", vec![c1, c2], v).unwrap();
        let a1 = ExprMatrix::parse(&[&["sin(x1)*p1", "p1 - i*p2"], &["p1 + i*p2", "cos(x2)*p2"]]).unwrap();
        let a0 = ExprMatrix::parse(&[&["0.3 - i/2*cos(x1)", "0"], &["0", "0.3 + i/2*sin(x2)"]]).unwrap();
        let s = OperatorSpec::symbol_unchecked("s", 2, a1, a0).unwrap();
        for (x, xi) in sample_points(2, 20) {
            let (a, b) = (t.symbol_at(&x, &xi).unwrap(), s.symbol_at(&x, &xi).unwrap());
            assert!((a.a1() - b.a1()).norm() < 1e-12);
            assert!((a.a0() - b.a0()).norm() < 1e-12);
            for mu in 0..4 {
                assert!((a.a1_d(mu) - b.a1_d(mu)).norm() < 1e-12);
                for nu in 0..4 {
                    assert!((a.a1_dd(mu, nu) - b.a1_dd(mu, nu)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bilinear_entry_shifts_subprincipal() {
        let a1 = ExprMatrix::parse(&[&["x1*p1", "p1 - i*p2"], &["p1 + i*p2", "-x1*p1"]]).unwrap();
        let s = OperatorSpec::symbol_unchecked("b", 2, a1, ExprMatrix::zeros(2)).unwrap();
        let sj = s.symbol_at(&[0.4, 0.0], &[0.3, 0.7]).unwrap();
        let raw = subprincipal_raw(&sj);
        assert!((raw[(0, 0)] - c(0.0, 0.5)).norm() < 1e-15);
        assert!((raw[(1, 1)] - c(0.0, -0.5)).norm() < 1e-15);
        assert!(matches!(subprincipal(&sj), Err(Error::HermiticityDrift { .. })));
    }

    #[test]
    fn constant_symbol_has_zero_subprincipal() {
        let s = load_spec(DIRAC).unwrap();
        let sub = s.subprincipal_at(&[1.0, 2.0], &[0.3, -0.4]).unwrap();
        assert_eq!(sub.norm(), 0.0);
    }

    #[test]
    fn shifted_dirac_subprincipal() {
        let cfg = DIRAC.replace(r#""A0":0"#, r#""A0":[[0.3,0],[0,0.3]]"#);
        let s = load_spec(&cfg).unwrap();
        let sub = s.subprincipal_at(&[1.0, 2.0], &[0.3, -0.4]).unwrap();
        assert!((sub - CMat::identity(2, 2) * c(0.3, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_covector_rejected() {
        let s = load_spec(DIRAC).unwrap();
        assert!(matches!(s.symbol_at(&[0.0, 0.0], &[0.0, 0.0]), Err(Error::ZeroCovector)));
    }

    #[test]
    fn euler_identity() {
        let a1 = ExprMatrix::parse(&[
            &["(1+0.2*sin(x1))*p1", "p1 - i*p2*cos(x2)"],
            &["p1 + i*p2*cos(x2)", "-p2 + 0.1*sqrt(p1^2+p2^2)"],
        ])
        .unwrap();
        let s = OperatorSpec::symbol_unchecked("e", 2, a1, ExprMatrix::zeros(2)).unwrap();
        for (x, xi) in sample_points(2, 50) {
            let xi: Vec<f64> = xi.iter().map(|v| v * 1.7).collect();
            let sj = s.symbol_at(&x, &xi).unwrap();
            let mut e = CMat::zeros(2, 2);
            for a in 0..2 {
                e += sj.a1_d(2 + a) * c(xi[a], 0.0);
            }
            assert!((e - sj.a1()).norm() < 1e-10 * sj.a1().norm());
        }
    }

    #[test]
    fn config_round_trip() {
        let s = load_spec(DIRAC).unwrap();
        let text = serde_json::to_string(&spec_to_config(&s)).unwrap();
        let back = load_spec(&text).unwrap();
        assert_eq!(back.a1(), s.a1());
    }
}
