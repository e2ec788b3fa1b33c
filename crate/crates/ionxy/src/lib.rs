//! Desk-scale simulator of spin-1 XY chains realized with trapped ions.
//!
//! The crate covers the full pipeline of a small ion-trap quantum
//! simulation: crystal mechanics (equilibrium positions, transverse normal
//! modes, Lamb-Dicke factors), synthesis of the long-range XY coupling
//! matrix from laser parameters, exact spin-1 dynamics under effective and
//! full spin-phonon Hamiltonians, adiabatic ground-state preparation with
//! symmetry-sector analysis, and the measurement layer (global rotations,
//! bright/dark detection, parity scans, and a qutrit entanglement witness).
//!
//! All frequencies are ordinary frequencies in Hz; evolution phases carry
//! the 2π explicitly, i.e. U(t) = exp(−i2πHt) with H in Hz.

pub mod couplings;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod ionchain;
pub mod presets;
pub mod protocol;
pub mod quantum;
pub mod spinphonon;

pub use error::{Error, ErrorClass, Result};
