//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Wavelength outside a dispersion model's validity range.
    #[error(
        "wavelength {wavelength_um} um outside validity range [{lo_um}, {hi_um}] um of material '{material}'"
    )]
    OutOfValidity {
        material: String,
        wavelength_um: f64,
        lo_um: f64,
        hi_um: f64,
    },

    /// Invalid configuration, geometry or settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// Config file parse error carrying the offending line number.
    #[error("config parse error at line {line}: {msg}")]
    ConfigAt { line: usize, msg: String },

    /// Trace CSV schema violation carrying the offending line number.
    #[error("schema violation at line {line}: {msg}")]
    Schema { line: usize, msg: String },

    /// Input outside an operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method failed to converge.
    #[error("non-convergence in {what} (residual {residual:.3e})")]
    NonConvergence { what: String, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code under the CLI contract: 1 for numeric/convergence
    /// failures, 2 for input and validation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } => 1,
            _ => 2,
        }
    }
}
