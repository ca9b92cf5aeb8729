//! Pseudo-spectral toolkit for the two-fluid Euler–Maxwell system on the
//! periodic box, its slow limit and incompressible extended MHD.
//!
//! * [`spectral`]: Fourier representation and multiplier operators.
//! * [`plasma`]: parameters, pressure closures, the 14-component state.
//! * [`modes`]: per-mode penalization matrices, kernel bases, projectors,
//!   the unitary group and brute-force oracles.
//! * [`emtf`]: filtered time integration of the fast-scale two-fluid system.
//! * [`limit`]: slow-limit right-hand side, XMHD, the bridge between them and
//!   physics diagnostics.
//! * [`harness`]: configuration, runs, studies and file formats.

pub mod emtf;
pub mod harness;
pub mod limit;
pub mod modes;
pub mod plasma;
pub mod rk4;
pub mod spectral;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: expected n = {expected}, found n = {found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("sample count mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("vacuum breach: density {density:e} below floor {floor:e}")]
    Vacuum { density: f64, floor: f64 },
    #[error("basis mismatch: expected {expected}, found {found}")]
    BasisMismatch { expected: &'static str, found: &'static str },
    #[error("precondition violated: {what} (residual {residual:e})")]
    Precondition { what: String, residual: f64 },
    #[error("instability at t = {t}: {reason}")]
    Instability { t: f64, reason: String },
    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("snapshot error: {0}")]
    Snapshot(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use plasma::{Basis, PlasmaParams, PressureLaw, State};
pub use spectral::{Field, Grid, Vector};
