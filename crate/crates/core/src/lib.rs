//! Two-term spectral asymptotics for first-order elliptic self-adjoint
//! matrix operators.
//!
//! The crate computes the Weyl densities `a(x)`, `b(x)` of an `m×m` system
//! from its principal and subprincipal symbols, checks the pointwise
//! identities behind them, and compares the predictions with spectra of
//! model operators on the flat torus.

pub mod error;
pub mod expr;

pub use error::{Error, ErrorKind, Result};
pub mod eigen;
pub mod symbol;
pub mod brackets;
pub mod numerics;
pub mod wave;
pub mod asymptotics;
pub mod flow;
pub mod torus;
pub mod identities;
pub mod fixtures;
