//! Dispersive input signal model and classical output chains.
//!
//! The input encoding places the two qubit-state pointer means symmetrically
//! around the positive Q axis: `Ī_in = ±sin(θ/2)·√n̄_in` (+ for ground,
//! − for excited) and `Q̄_in = cos(θ/2)·√n̄_in`. Output chains convert
//! between raw integrated voltages, dimensionless room-temperature
//! quadratures, and quadratures referred to the amplifier output plane.

use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_B};
use crate::squeeze::QuadMeans;
use crate::{Error, Result};

/// Prepared qubit state label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitState {
    #[serde(rename = "g")]
    Ground,
    #[serde(rename = "e")]
    Excited,
}

impl QubitState {
    /// Sign of the information-carrying I quadrature: +1 for g, −1 for e.
    pub fn i_sign(&self) -> f64 {
        match self {
            QubitState::Ground => 1.0,
            QubitState::Excited => -1.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            QubitState::Ground => "g",
            QubitState::Excited => "e",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "g" => Ok(QubitState::Ground),
            "e" => Ok(QubitState::Excited),
            other => Err(Error::Parse(format!("unknown qubit state label {other:?}"))),
        }
    }
}

impl std::fmt::Display for QubitState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Dispersive readout signal at the amplifier input.
///
/// `nbar_in` is the average photon number at the amplifier input; it relates
/// to the resonator population `n̄_in′` through the insertion-loss factor
/// `ᾱ ∈ (0,1]` as `n̄_in = ᾱ·n̄_in′`. `theta` is the full dispersive phase
/// shift between the two pointer states, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersiveInput {
    pub nbar_in: f64,
    pub theta: f64,
    pub state: QubitState,
    pub alpha_bar: f64,
}

impl DispersiveInput {
    pub fn new(nbar_in: f64, theta: f64, state: QubitState) -> Result<Self> {
        if !nbar_in.is_finite() || nbar_in < 0.0 {
            return Err(Error::Domain(format!(
                "input photon number must be nonnegative, got {nbar_in}"
            )));
        }
        Ok(Self {
            nbar_in,
            theta,
            state,
            alpha_bar: 1.0,
        })
    }

    /// Construct from the resonator population `n̄_in′` and insertion loss.
    pub fn from_resonator(
        nbar_in_prime: f64,
        alpha_bar: f64,
        theta: f64,
        state: QubitState,
    ) -> Result<Self> {
        if !(alpha_bar > 0.0 && alpha_bar <= 1.0) {
            return Err(Error::Domain(format!(
                "insertion-loss factor must be in (0, 1], got {alpha_bar}"
            )));
        }
        let mut input = Self::new(alpha_bar * nbar_in_prime, theta, state)?;
        input.alpha_bar = alpha_bar;
        Ok(input)
    }

    pub fn with_state(&self, state: QubitState) -> Self {
        Self { state, ..*self }
    }

    /// Mean I quadrature at the amplifier input, `±sin(θ/2)·√n̄_in`.
    pub fn i_in(&self) -> f64 {
        self.state.i_sign() * (self.theta / 2.0).sin() * self.nbar_in.sqrt()
    }

    /// Mean Q quadrature at the amplifier input, `cos(θ/2)·√n̄_in`.
    pub fn q_in(&self) -> f64 {
        (self.theta / 2.0).cos() * self.nbar_in.sqrt()
    }

    /// Squared information-carrying quadrature mean, `Ī²_in = sin²(θ/2)·n̄_in`.
    pub fn i2_in(&self) -> f64 {
        let s = (self.theta / 2.0).sin();
        s * s * self.nbar_in
    }

    /// Input-plane quadrature means with a vacuum idler.
    pub fn encode(&self) -> QuadMeans {
        QuadMeans::input_signal(self.i_in(), self.q_in())
    }
}

/// Encode a dispersive signal into input-plane quadrature means.
pub fn encode_input(nbar_in: f64, theta: f64, state: QubitState) -> Result<QuadMeans> {
    Ok(DispersiveInput::new(nbar_in, theta, state)?.encode())
}

/// One classical output chain: total gain, added noise, mode frequency,
/// integration time, and digitizer load resistance.
///
/// `n_sys` is referred to the amplifier-output reference plane (treated as
/// identical to the following-amplifier input plane; interconnect loss is
/// folded into `n_sys`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputChain {
    /// Total power gain of the chain (dimensionless).
    pub g_sys: f64,
    /// Added noise photons referred to the amplifier output plane.
    pub n_sys: f64,
    /// Mode angular frequency, rad/s.
    pub omega: f64,
    /// Integration time, s.
    pub t_int: f64,
    /// Digitizer load resistance, ohms.
    pub r_load: f64,
}

impl OutputChain {
    /// Standard 50 Ω load.
    pub fn new(g_sys: f64, n_sys: f64, omega: f64, t_int: f64) -> Result<Self> {
        Self::with_load(g_sys, n_sys, omega, t_int, 50.0)
    }

    pub fn with_load(g_sys: f64, n_sys: f64, omega: f64, t_int: f64, r_load: f64) -> Result<Self> {
        if !(g_sys > 0.0) || !(omega > 0.0) || !(t_int > 0.0) || !(r_load > 0.0) || n_sys < 0.0 {
            return Err(Error::Domain(format!(
                "invalid output chain: g_sys={g_sys}, n_sys={n_sys}, omega={omega}, t_int={t_int}, r_load={r_load}"
            )));
        }
        Ok(Self {
            g_sys,
            n_sys,
            omega,
            t_int,
            r_load,
        })
    }

    /// Photon energy `ħω` of this mode, joules.
    pub fn photon_energy(&self) -> f64 {
        HBAR * self.omega
    }

    /// Voltage-to-quadrature conversion factor `γ = T_int/(R·ħω)`, V⁻².
    pub fn conversion_factor(&self) -> f64 {
        self.t_int / (self.r_load * self.photon_energy())
    }

    /// Effective chain noise temperature `T_sys = N_sys·ħω/k_B`, kelvin.
    pub fn t_sys(&self) -> f64 {
        self.n_sys * self.photon_energy() / K_B
    }

    /// Raw integrated voltages → dimensionless room-temperature quadratures.
    pub fn volts_to_photon_units(&self, raw: (f64, f64)) -> (f64, f64) {
        let s = self.conversion_factor().sqrt();
        (s * raw.0, s * raw.1)
    }

    /// Inverse of [`volts_to_photon_units`](Self::volts_to_photon_units).
    pub fn photon_units_to_volts(&self, quad: (f64, f64)) -> (f64, f64) {
        let s = self.conversion_factor().sqrt();
        (quad.0 / s, quad.1 / s)
    }

    /// Refer room-temperature quadratures back to the amplifier output,
    /// dividing out the chain amplitude gain `√G_sys`.
    pub fn refer_to_amplifier_output(&self, quad: (f64, f64)) -> (f64, f64) {
        let s = self.g_sys.sqrt();
        (quad.0 / s, quad.1 / s)
    }

    /// Inverse of [`refer_to_amplifier_output`](Self::refer_to_amplifier_output).
    pub fn refer_to_room_temperature(&self, quad: (f64, f64)) -> (f64, f64) {
        let s = self.g_sys.sqrt();
        (quad.0 * s, quad.1 * s)
    }
}
