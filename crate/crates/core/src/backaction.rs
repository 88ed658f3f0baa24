//! Excess-dephasing model: coherence times → thermal photon number →
//! isolation estimate versus amplifier gain.
//!
//! Residual thermal population of the readout resonator dephases the qubit
//! at `Γ_φ = n̄_th·Γ_c` (valid for `n̄_th ≪ 1`), with the per-photon rate
//! `Γ_c = κχ²/(κ²+χ²)`. Because the amplifier leaks amplified vacuum back
//! toward the resonator through the finite isolation `L`, `n̄_th` grows
//! linearly with amplifier gain; the slope of that line is the isolation.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One coherence measurement at a given amplifier gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceRecord {
    /// Amplifier power gain (linear).
    pub gain: f64,
    /// Relaxation time, seconds.
    pub t1: f64,
    /// Echo coherence time, seconds.
    pub t2e: f64,
}

impl CoherenceRecord {
    pub fn new(gain: f64, t1: f64, t2e: f64) -> Result<Self> {
        if !(gain >= 1.0) || !(t1 > 0.0) || !(t2e > 0.0) {
            return Err(Error::Domain(format!(
                "coherence record needs G >= 1 and positive times, got G={gain}, T1={t1}, T2E={t2e}"
            )));
        }
        if t2e > 2.0 * t1 {
            return Err(Error::Domain(format!(
                "unphysical record: T2E = {t2e} exceeds 2*T1 = {}",
                2.0 * t1
            )));
        }
        Ok(Self { gain, t1, t2e })
    }

    pub fn dephasing_rate(&self) -> Result<f64> {
        dephasing_rate(self.t1, self.t2e)
    }
}

/// Pure dephasing rate `Γ_φ = 1/T_2E − 1/(2T_1)`, 1/s.
pub fn dephasing_rate(t1: f64, t2e: f64) -> Result<f64> {
    if !(t1 > 0.0) || !(t2e > 0.0) {
        return Err(Error::Domain(format!(
            "coherence times must be positive, got T1={t1}, T2E={t2e}"
        )));
    }
    if t2e > 2.0 * t1 {
        return Err(Error::Domain(format!(
            "unphysical record: T2E = {t2e} exceeds 2*T1 = {}",
            2.0 * t1
        )));
    }
    Ok(1.0 / t2e - 1.0 / (2.0 * t1))
}

/// Measurement-induced dephasing rate per thermal photon,
/// `Γ_c = κχ²/(κ²+χ²)`. Both rates are angular (rad/s).
pub fn gamma_c(kappa: f64, chi: f64) -> f64 {
    debug_assert!(kappa > 0.0 && chi > 0.0);
    kappa * chi * chi / (kappa * kappa + chi * chi)
}

/// Thermal photon estimate with a validity flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalPhotonEstimate {
    pub nbar_th: f64,
    /// Set when `n̄_th > 0.1`: the small-population approximation behind
    /// the rate relation is strained.
    pub approximation_strained: bool,
}

/// Average thermal photons in the resonator from the dephasing rate,
/// `n̄_th = Γ_φ/Γ_c` (valid for `n̄_th ≪ 1`).
pub fn nth_from_dephasing(gamma_phi: f64, gamma_c: f64) -> ThermalPhotonEstimate {
    debug_assert!(gamma_c > 0.0);
    let nbar_th = gamma_phi / gamma_c;
    ThermalPhotonEstimate {
        nbar_th,
        approximation_strained: nbar_th > 0.1,
    }
}

/// Forward model of resonator thermal population versus amplifier gain.
///
/// `l` is the linear power ratio of the total isolation and insertion loss
/// between the amplifier and the resonator; `nth_a` (`nth_b`) are the
/// thermal populations at the amplifier signal (idler) port; `alpha_bar`
/// is the insertion-loss factor of the signal path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsolationModel {
    pub l: f64,
    pub nth_a: f64,
    pub nth_b: f64,
    pub alpha_bar: f64,
}

impl IsolationModel {
    pub fn new(l: f64, nth_a: f64, nth_b: f64) -> Result<Self> {
        if !(l > 0.0 && l <= 1.0) || nth_a < 0.0 || nth_b < 0.0 {
            return Err(Error::Domain(format!(
                "isolation model needs 0 < L <= 1 and nonnegative populations, got L={l}, nth_a={nth_a}, nth_b={nth_b}"
            )));
        }
        Ok(Self {
            l,
            nth_a,
            nth_b,
            alpha_bar: 1.0,
        })
    }

    /// Full forward model:
    /// `n̄_th(G) = L[ᾱ·n̄_th,a + n̄_th,b + 1]·G − L[n̄_th,b + 1] + n̄_th,a`.
    /// The unity terms are the amplified vacuum at the two ports.
    pub fn nth(&self, gain: f64) -> f64 {
        self.l * (self.alpha_bar * self.nth_a + self.nth_b + 1.0) * gain
            - self.l * (self.nth_b + 1.0)
            + self.nth_a
    }

    /// Small-population reduction, `n̄_th(G) = L·G + (n̄_th,a − L)`.
    pub fn nth_linearized(&self, gain: f64) -> f64 {
        self.l * gain + (self.nth_a - self.l)
    }

    /// Whether the `L·ᾱ ≪ 1` assumption behind the definition of
    /// `n̄_th,a` holds (threshold 0.1).
    pub fn feedback_negligible(&self) -> bool {
        self.l * self.alpha_bar < 0.1
    }

    pub fn l_db(&self) -> f64 {
        10.0 * self.l.log10()
    }
}

/// Isolation estimate from a linear fit of `n̄_th` versus gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackactionFit {
    /// Isolation/insertion-loss power ratio (= fitted slope).
    pub l: f64,
    /// Zero-excess thermal population, `intercept + L`.
    pub nth_a: f64,
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    /// Per-point residuals `n̄_th − fit`, in input order.
    pub residuals: Vec<f64>,
}

impl BackactionFit {
    pub fn l_db(&self) -> f64 {
        10.0 * self.l.log10()
    }
}

/// Linear regression of `(G, n̄_th)` pairs against the small-population
/// model: slope → `L`, intercept → `n̄_th,a − L`.
pub fn fit_isolation(points: &[(f64, f64)]) -> Result<BackactionFit> {
    let mut gains: Vec<f64> = points.iter().map(|p| p.0).collect();
    gains.sort_by(|a, b| a.total_cmp(b));
    gains.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if gains.len() < 2 {
        return Err(Error::FitDegenerate(format!(
            "need at least 2 distinct gains, got {}",
            gains.len()
        )));
    }

    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy * sxx - sx * sxy) / det;
    if slope <= 0.0 {
        return Err(Error::FitDegenerate(format!(
            "fitted slope {slope:e} is not positive: no gain-dependent excess, isolation undefined"
        )));
    }
    if slope > 1.0 {
        return Err(Error::FitDegenerate(format!(
            "fitted slope {slope} exceeds unity: unphysical isolation"
        )));
    }

    let residuals: Vec<f64> = points
        .iter()
        .map(|p| p.1 - (slope * p.0 + intercept))
        .collect();
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    Ok(BackactionFit {
        l: slope,
        nth_a: intercept + slope,
        slope,
        intercept,
        rms,
        residuals,
    })
}
