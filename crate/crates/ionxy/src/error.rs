//! Error types shared across the crate.

use thiserror::Error;

/// Broad failure classification, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: violated preconditions, dimension mismatches, size caps.
    Validation,
    /// Physically invalid regime: instabilities, resonances, undefined fits.
    Physics,
    /// A numerical procedure failed to converge or lost accuracy.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("state space too large: {0}")]
    TooLarge(String),

    #[error(
        "linear chain unstable: lowest transverse mode frequency squared is \
         {lowest_sq:.6e} (in units of the axial frequency squared) at anisotropy \
         transverse_com/axial = {anisotropy:.4}; increase the transverse confinement"
    )]
    ChainUnstable { lowest_sq: f64, anisotropy: f64 },

    #[error(
        "beatnote too close to mode {mode}: |mu - omega_m| = {gap:.6e} Hz, \
         resonance guard requires > {required:.6e} Hz"
    )]
    DetuningTooClose { mode: usize, gap: f64, required: f64 },

    #[error("power-law fit undefined: couplings do not share a common sign (pattern {pattern})")]
    MixedSignCouplings { pattern: String },

    #[error("target alpha {target} unreachable; achievable range is [{min:.4}, {max:.4}]")]
    AlphaOutOfRange { target: f64, min: f64, max: f64 },

    #[error(
        "equilibrium solver did not converge after {iterations} iterations \
         (gradient max-norm {gradient:.3e})"
    )]
    SolverDidNotConverge { iterations: usize, gradient: f64 },

    #[error("time integration failed to reach tolerance {requested:.1e}; achieved {achieved:.1e}")]
    IntegrationFailure { requested: f64, achieved: f64 },

    #[error("fit failed: {0}")]
    FitFailure(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Invalid(_) | Error::TooLarge(_) => ErrorClass::Validation,
            Error::ChainUnstable { .. }
            | Error::DetuningTooClose { .. }
            | Error::MixedSignCouplings { .. }
            | Error::AlphaOutOfRange { .. } => ErrorClass::Physics,
            Error::SolverDidNotConverge { .. }
            | Error::IntegrationFailure { .. }
            | Error::FitFailure(_) => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
