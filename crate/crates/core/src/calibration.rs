//! Output-chain calibration from noise-power-versus-gain measurements.
//!
//! The chain's total output noise, in photon units referred to the
//! amplifier output, is `N_ph(G) = G/2 + (G−1)/2 + N_sys = G − ½ + N_sys`:
//! amplified vacuum from the signal port, trans-amplified vacuum from the
//! idler port, and the gain-independent chain contribution. Measured at
//! room temperature the power is `P_N = P_0·N_ph` with
//! `P_0 = G_sys·BW·ħω` and `BW = 1/T_int`. Fitting measured points against
//! gain recovers `(G_sys, N_sys)`.

use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_B};
use crate::{Error, Result};

/// Whether calibration data carry raw noise power or noise-equivalent
/// photon numbers. One file must contain a single kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Noise power in watts at the digitizer.
    Watts,
    /// Noise-equivalent photon number (chain gain already divided out).
    Photons,
}

impl NoiseKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "watts" | "w" => Ok(NoiseKind::Watts),
            "photons" | "ph" => Ok(NoiseKind::Photons),
            other => Err(Error::Parse(format!(
                "unknown noise kind {other:?} (expected \"watts\" or \"photons\")"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NoiseKind::Watts => "watts",
            NoiseKind::Photons => "photons",
        }
    }
}

/// One calibration sample: amplifier gain and the measured chain noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePowerPoint {
    /// Amplifier power gain (linear).
    pub gain: f64,
    pub value: f64,
    pub kind: NoiseKind,
}

impl NoisePowerPoint {
    pub fn new(gain: f64, value: f64, kind: NoiseKind) -> Result<Self> {
        if !(gain >= 1.0) || value < 0.0 {
            return Err(Error::Domain(format!(
                "calibration point needs G >= 1 and value >= 0, got G={gain}, value={value}"
            )));
        }
        Ok(Self { gain, value, kind })
    }
}

/// Total output noise-equivalent photon number at amplifier gain `G`:
/// `N_ph = G − ½ + N_sys`. Slope in `G` is exactly one photon per unit gain.
pub fn model_noise_photons(gain: f64, n_sys: f64) -> f64 {
    debug_assert!(gain >= 1.0);
    gain - 0.5 + n_sys
}

/// Measured chain noise power in watts, `P_N = P_0·N_ph(G)`.
pub fn model_noise_power(gain: f64, n_sys: f64, p_0: f64) -> f64 {
    p_0 * model_noise_photons(gain, n_sys)
}

/// Calibration fit result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Total chain power gain. `None` when the input carried photon
    /// numbers: the chain gain is already divided out of such data.
    pub g_sys: Option<f64>,
    /// Added noise photons (clamped at zero).
    pub n_sys: f64,
    /// Effective noise temperature `N_sys·ħω/k_B`, kelvin.
    pub t_sys: f64,
    /// Watts per photon-number unit (the fitted slope; dimensionless ≈ 1
    /// for photon-kind input).
    pub p_0: f64,
    /// RMS of the fit residuals, in input units.
    pub fit_rms: f64,
    /// Per-point residuals `value − model`, in input order.
    pub residuals: Vec<f64>,
}

/// Fit `P_N = P_0·(G − ½ + N_sys)` over `(P_0, N_sys)` by linear least
/// squares in `(slope, intercept) = (P_0, P_0·(N_sys − ½))`.
///
/// Needs at least three points spanning at least 3 dB of gain. For
/// watt-kind data the chain gain is recovered as `G_sys = P_0/(BW·ħω)`
/// with `BW = 1/T_int`.
pub fn fit_noise_vs_gain(
    points: &[NoisePowerPoint],
    omega: f64,
    t_int: f64,
) -> Result<CalibrationResult> {
    if points.len() < 3 {
        return Err(Error::FitDegenerate(format!(
            "need at least 3 calibration points, got {}",
            points.len()
        )));
    }
    let kind = points[0].kind;
    if points.iter().any(|p| p.kind != kind) {
        return Err(Error::FitDegenerate(
            "calibration file mixes watt-kind and photon-kind points".into(),
        ));
    }
    let (g_min, g_max) = points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
        (lo.min(p.gain), hi.max(p.gain))
    });
    if g_max / g_min < 10f64.powf(0.3) {
        return Err(Error::FitDegenerate(format!(
            "gain span {:.2} dB is below the required 3 dB (rank-deficient design)",
            10.0 * (g_max / g_min).log10()
        )));
    }

    // normal equations for value = slope*G + intercept
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.gain).sum();
    let sy: f64 = points.iter().map(|p| p.value).sum();
    let sxx: f64 = points.iter().map(|p| p.gain * p.gain).sum();
    let sxy: f64 = points.iter().map(|p| p.gain * p.value).sum();
    let det = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy * sxx - sx * sxy) / det;
    if !(slope > 0.0) {
        return Err(Error::FitDegenerate(format!(
            "fitted slope {slope:e} is not positive; data are inconsistent with the noise model"
        )));
    }

    let n_sys = (intercept / slope + 0.5).max(0.0);
    let residuals: Vec<f64> = points
        .iter()
        .map(|p| p.value - (slope * p.gain + intercept))
        .collect();
    let fit_rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    let bw = 1.0 / t_int;
    let g_sys = match kind {
        NoiseKind::Watts => Some(slope / (bw * HBAR * omega)),
        NoiseKind::Photons => None,
    };
    Ok(CalibrationResult {
        g_sys,
        n_sys,
        t_sys: n_sys * HBAR * omega / K_B,
        p_0: slope,
        fit_rms,
        residuals,
    })
}

/// Output noise rise `G_N`: chain output noise with the amplifier at gain
/// `G` relative to the amplifier off, `(N_sys + G − ½)/(N_sys + ½)`.
/// The mode frequency cancels out of this ratio.
pub fn noise_rise(gain: f64, n_sys: f64) -> f64 {
    debug_assert!(gain >= 1.0 && n_sys >= 0.0);
    (n_sys + gain - 0.5) / (n_sys + 0.5)
}

/// Noise rise evaluated in temperature units,
/// `(T_sys + G·T_Q + (G−1)·T_Q)/(T_sys + T_Q)` with `T_Q = ħω/2k_B`.
/// Agrees with [`noise_rise`] to rounding for `T_sys = N_sys·ħω/k_B`.
pub fn noise_rise_temperature(gain: f64, t_sys: f64, omega: f64) -> f64 {
    let t_q = HBAR * omega / (2.0 * K_B);
    (t_sys + gain * t_q + (gain - 1.0) * t_q) / (t_sys + t_q)
}

/// SNR improvement of the chain due to the amplifier, `G/G_N`:
/// `(T_sys + T_Q)/(T_sys/G + T_Q·[1 + (G−1)/G])` in photon units.
/// Saturates at `N_sys + ½` as `G → ∞`.
pub fn snr_improvement(gain: f64, n_sys: f64) -> f64 {
    debug_assert!(gain >= 1.0 && n_sys >= 0.0);
    (n_sys + 0.5) / (n_sys / gain + 0.5 * (1.0 + (gain - 1.0) / gain))
}

/// Bose-Einstein occupancy plus zero-point term, `½·coth(ħω/2k_B·T)`.
/// Approaches ½ in the high-frequency/cold limit.
pub fn thermal_occupancy(omega: f64, temperature: f64) -> f64 {
    let x = HBAR * omega / (2.0 * K_B * temperature);
    0.5 / x.tanh()
}
