//! Simulation and metrics toolkit for dispersive qubit readout amplified by a
//! nondegenerate two-mode-squeezing amplifier.
//!
//! The crate models the chain from the dispersive input signal through the
//! amplifier to the digitized output quadratures, and provides both
//! closed-form and Monte Carlo routes to the readout figures of merit:
//!
//! - [`squeeze`] — exact two-mode-squeeze algebra: quadrature means,
//!   covariances, and φ-rotated mode combination.
//! - [`signal`] — the dispersive input encoding and the classical output
//!   chains, including voltage ↔ photon-unit conversions.
//! - [`shots`] — deterministic Gaussian shot sampling, histogram fitting,
//!   empirical SNR/fidelity, and φ sweeps.
//! - [`metrics`] — closed-form SNR and assignment-fidelity formulas and the
//!   gain × added-noise landscape generator.
//! - [`calibration`] — output-chain gain/noise extraction from noise-power
//!   measurements and the SNR-improvement curve.
//! - [`backaction`] — excess-dephasing model: coherence times → thermal
//!   photons → isolation estimate versus amplifier gain.
//! - [`fixtures`] — named parameter sets, including the `paper-defaults`
//!   device values.
//!
//! All quadratures are dimensionless square-root-photon quantities in the
//! convention where each vacuum quadrature has variance 1/4; angles are in
//! radians. Unit conversions (dB, degrees, volts) happen at the boundaries.

pub mod backaction;
pub mod calibration;
pub mod constants;
mod error;
pub mod fixtures;
pub mod metrics;
pub mod shots;
pub mod signal;
pub mod squeeze;

pub use error::{Error, Result};
