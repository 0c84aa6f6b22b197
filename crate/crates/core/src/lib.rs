//! Gaussian security analysis of modulation leakage in continuous-variable QKD.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! core:
//!
//! - [`gaussian`]: covariance matrices, symplectic operations, heterodyne
//!   conditioning and von Neumann entropies.
//! - [`modulator`]: the three-line IQ-modulator spectrum and the mapping from
//!   RF imbalance to the leakage ratio `k`.
//! - [`security`]: the purification scheme with leakage, trusted noise and
//!   detector imperfections, Holevo bounds and secret key fractions, plus the
//!   derived sweeps (optimal modulation, tolerable loss, trusted-noise verdicts).
//! - [`estimation`]: Monte-Carlo heterodyne sampling and moment-based
//!   re-estimation of the channel and leakage parameters.
//!
//! All quadrature variances are in shot-noise units (vacuum variance = 1).

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod estimation;
pub mod gaussian;
pub mod modulator;
pub mod optimize;
pub mod security;

pub use error::{Error, Result};
pub use gaussian::{CovMatrix, SymplecticEigenvalues};
pub use modulator::{ModulatorConfig, RhoConvention, SidebandSpectrum};
pub use security::{Direction, KeyRateReport, ProtocolParams};


