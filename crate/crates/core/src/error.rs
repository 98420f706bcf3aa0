use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{field}: {source}")]
    Expression {
        field: String,
        #[source]
        source: ExprError,
    },
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("ellipticity violated at x={x:?}, xi={xi:?}: eigenvalue {eigenvalue:e} is (numerically) zero")]
    Ellipticity { x: Vec<f64>, xi: Vec<f64>, eigenvalue: f64 },
    #[error("eigenvalues not simple at x={x:?}, xi={xi:?}: gap {gap:e} below tolerance {tol:e}")]
    Multiplicity { x: Vec<f64>, xi: Vec<f64>, gap: f64, tol: f64 },
    #[error("covector is zero")]
    ZeroCovector,
    #[error("subprincipal symbol is not Hermitian (asymmetry {asymmetry:e})")]
    HermiticityDrift { asymmetry: f64 },
    #[error("degenerate eigenvalues (gap {gap:e})")]
    DegenerateEigenvalue { gap: f64 },
    #[error("zero eigenvalue {eigenvalue:e} of the principal symbol")]
    ZeroEigenvalue { eigenvalue: f64 },
    #[error("{what} has imaginary residue {residue:e}")]
    NonrealResult { what: &'static str, residue: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("branch index {0} does not exist")]
    NoSuchBranch(i32),
    #[error("matrix is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },
    #[error("eigenvalues merge along the trajectory at t={t} (gap {gap:e})")]
    DegenerateEigenvalueOnPath { t: f64, gap: f64 },
    #[error("step size underflow at t={t}")]
    StepUnderflow { t: f64 },
    #[error("t={t} outside trajectory range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("Hamiltonian h={value:e} is not positive on the sphere")]
    NonpositiveHamiltonian { value: f64 },
    #[error("Fourier cutoff K={k} is too small (need at least {needed})")]
    CutoffTooSmall { k: usize, needed: usize },
    #[error("lambda={lambda} exceeds the trusted range {trust}")]
    BeyondTrust { lambda: f64, trust: f64 },
    #[error("mollifier support {t0} is not below the shortest loop length {loop_length}")]
    SupportExceedsT { t0: f64, loop_length: f64 },
    #[error("fit range is insufficient: {0}")]
    InsufficientRange(String),
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("configuration JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification, used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Math,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Expression { .. }
            | Error::Validation { .. }
            | Error::Json(_)
            | Error::DimensionMismatch(_)
            | Error::NoSuchBranch(_)
            | Error::NotUnitary { .. }
            | Error::CutoffTooSmall { .. }
            | Error::BeyondTrust { .. }
            | Error::SupportExceedsT { .. }
            | Error::InsufficientRange(_) => ErrorKind::Config,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Math,
        }
    }

    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), reason: reason.into() }
    }
}
