//! Named parameter sets.
//!
//! `paper-defaults` carries the measured device parameters (readout,
//! transmon, amplifier, and calibrated output chains) so figure-level
//! reproductions can be launched without spelling out fifteen numbers.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::signal::{DispersiveInput, OutputChain, QubitState};
use crate::Result;

/// A complete set of device and acquisition parameters.
///
/// Units follow the field-name suffixes; conversions to internal radians
/// and rad/s happen in the accessor methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub theta_deg: f64,
    pub f_a_ghz: f64,
    pub f_b_ghz: f64,
    pub kappa_mhz: f64,
    pub chi_mhz: f64,
    pub t1_us: f64,
    pub t2e_us: f64,
    pub g_sys_a: f64,
    pub n_sys_a: f64,
    pub g_sys_b: f64,
    pub n_sys_b: f64,
    pub nbar_in: f64,
    pub shots: usize,
    pub t_int_us: f64,
}

impl Fixture {
    pub fn theta(&self) -> f64 {
        self.theta_deg.to_radians()
    }

    pub fn omega_a(&self) -> f64 {
        TAU * self.f_a_ghz * 1e9
    }

    pub fn omega_b(&self) -> f64 {
        TAU * self.f_b_ghz * 1e9
    }

    pub fn kappa(&self) -> f64 {
        TAU * self.kappa_mhz * 1e6
    }

    pub fn chi(&self) -> f64 {
        TAU * self.chi_mhz * 1e6
    }

    pub fn t_int(&self) -> f64 {
        self.t_int_us * 1e-6
    }

    pub fn chain_a(&self) -> Result<OutputChain> {
        OutputChain::new(self.g_sys_a, self.n_sys_a, self.omega_a(), self.t_int())
    }

    pub fn chain_b(&self) -> Result<OutputChain> {
        OutputChain::new(self.g_sys_b, self.n_sys_b, self.omega_b(), self.t_int())
    }

    pub fn input(&self, state: QubitState) -> Result<DispersiveInput> {
        DispersiveInput::new(self.nbar_in, self.theta(), state)
    }

    /// Squared information-carrying input quadrature, `sin²(θ/2)·n̄_in`.
    pub fn i2_in(&self) -> f64 {
        (self.theta() / 2.0).sin().powi(2) * self.nbar_in
    }
}

/// The measured device parameter set.
pub fn paper_defaults() -> Fixture {
    Fixture {
        name: "paper-defaults".into(),
        theta_deg: 53.7,
        f_a_ghz: 7.2284,
        f_b_ghz: 9.7056,
        kappa_mhz: 1.91,
        chi_mhz: 0.94,
        t1_us: 75.0,
        t2e_us: 52.0,
        g_sys_a: 3.4e6,
        n_sys_a: 28.2,
        g_sys_b: 1.7e7,
        n_sys_b: 13.4,
        nbar_in: 90.0,
        shots: 10_000,
        t_int_us: 1.0,
    }
}

/// Names of the built-in fixtures.
pub fn names() -> &'static [&'static str] {
    &["paper-defaults"]
}

/// Look up a built-in fixture by name.
pub fn by_name(name: &str) -> Option<Fixture> {
    match name {
        "paper-defaults" => Some(paper_defaults()),
        _ => None,
    }
}
