//! Physical constants, CODATA values truncated to five significant digits.
//!
//! Every module that needs a constant pulls it from here so unit
//! conversions stay mutually consistent.

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.0546e-34;

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.3806e-23;
