//! Closed-form SNR and assignment-fidelity metrics, and the gain ×
//! added-noise landscape generator.
//!
//! Power SNR `R` is the squared ratio of the mean separation to the average
//! standard deviation along the information-carrying quadrature.
//! Assignment fidelity follows from `R` through the equal-σ two-Gaussian
//! overlap, `F = ½[1 + erf(√(R/8))]`.

use serde::{Deserialize, Serialize};

use crate::squeeze::SqueezeParams;
use crate::{Error, Result};

const FRAC_2_SQRT_PI: f64 = 1.1283791670955126; // 2/sqrt(pi)

/// Error function, accurate to better than 1e-13 absolute over the real line.
///
/// Maclaurin series for |x| ≤ 2 (the alternating terms stay small enough
/// that cancellation is harmless there); for larger arguments the classical
/// continued fraction for erfc is evaluated with the modified Lentz scheme.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x <= 2.0 {
        // erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1))
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 1.0f64;
        loop {
            term *= -x2 / n;
            let delta = term / (2.0 * n + 1.0);
            sum += delta;
            if delta.abs() < 1e-18 * sum.abs().max(1e-300) || n > 120.0 {
                break;
            }
            n += 1.0;
        }
        FRAC_2_SQRT_PI * sum
    } else {
        1.0 - erfc_large(x)
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x > 2.0 {
        erfc_large(x)
    } else {
        1.0 - erf(x)
    }
}

// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// for x > 2, via modified Lentz. Partial numerators a_k = k/2.
fn erfc_large(x: f64) -> f64 {
    if x > 26.6 {
        return 0.0; // exp(-x^2) underflows
    }
    const TINY: f64 = 1e-300;
    let mut f = x.max(TINY);
    let mut c = f;
    let mut d = 0.0f64;
    let mut k = 1usize;
    loop {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 || k > 300 {
            break;
        }
        k += 1;
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / f
}

/// Power SNR of the mode-a (phase-preserving) measurement:
/// `R_a = (e^{2r}+e^{−2r}+2) / ((e^{2r}+e^{−2r})/8 + N_sys,a/2) · Ī²_in`,
/// algebraically equal to `4G/((2G−1)/4 + N_sys,a/2)·Ī²_in`.
pub fn r_a(params: &SqueezeParams, n_sys_a: f64, i2_in: f64) -> f64 {
    let e2r = params.antisqueeze_power();
    let em2r = params.squeeze_power();
    (e2r + em2r + 2.0) / ((e2r + em2r) / 8.0 + n_sys_a / 2.0) * i2_in
}

/// Power SNR of the combined mode with the I quadrature antisqueezed
/// (rotation φ=π): `R = 2e^{2r}/(e^{2r}/4 + N_sys,e/4)·Ī²_in` with
/// `N_sys,e = N_sys,a + N_sys,b`.
pub fn r_ab_max(params: &SqueezeParams, n_sys_a: f64, n_sys_b: f64, i2_in: f64) -> f64 {
    let e2r = params.antisqueeze_power();
    let n_sys_e = n_sys_a + n_sys_b;
    2.0 * e2r / (e2r / 4.0 + n_sys_e / 4.0) * i2_in
}

/// Power SNR of the combined mode with the I quadrature squeezed
/// (rotation φ=0): `R = 2e^{−2r}/(e^{−2r}/4 + N_sys,e/4)·Ī²_in`.
pub fn r_ab_min(params: &SqueezeParams, n_sys_a: f64, n_sys_b: f64, i2_in: f64) -> f64 {
    let em2r = params.squeeze_power();
    let n_sys_e = n_sys_a + n_sys_b;
    2.0 * em2r / (em2r / 4.0 + n_sys_e / 4.0) * i2_in
}

/// Assignment fidelity from the power SNR: `F = ½[1 + erf(√(R/8))]`.
pub fn fidelity_from_r(r_snr: f64) -> Result<f64> {
    if !r_snr.is_finite() || r_snr < 0.0 {
        return Err(Error::Domain(format!(
            "power SNR must be nonnegative, got {r_snr}"
        )));
    }
    Ok(0.5 * (1.0 + erf((r_snr / 8.0).sqrt())))
}

/// Analytic metrics at one (gain, noise) working point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    /// Linear power gain.
    pub gain: f64,
    pub n_sys_a: f64,
    pub n_sys_b: f64,
    pub i2_in: f64,
    pub r_a: f64,
    pub r_ab_max: f64,
    pub r_ab_min: f64,
    pub f_a: f64,
    pub f_ab_max: f64,
    pub f_ab_min: f64,
}

impl MetricPoint {
    pub fn evaluate(params: &SqueezeParams, n_sys_a: f64, n_sys_b: f64, i2_in: f64) -> Self {
        let r_a = r_a(params, n_sys_a, i2_in);
        let r_max = r_ab_max(params, n_sys_a, n_sys_b, i2_in);
        let r_min = r_ab_min(params, n_sys_a, n_sys_b, i2_in);
        Self {
            gain: params.gain(),
            n_sys_a,
            n_sys_b,
            i2_in,
            r_a,
            r_ab_max: r_max,
            r_ab_min: r_min,
            // R >= 0 by construction, so these cannot fail
            f_a: fidelity_from_r(r_a).unwrap(),
            f_ab_max: fidelity_from_r(r_max).unwrap(),
            f_ab_min: fidelity_from_r(r_min).unwrap(),
        }
    }

    pub fn gain_db(&self) -> f64 {
        10.0 * self.gain.log10()
    }

    /// Effective combined-chain noise, `N_sys,e = N_sys,a + N_sys,b`.
    pub fn n_sys_e(&self) -> f64 {
        self.n_sys_a + self.n_sys_b
    }

    /// SNR ratio `R_ab,max / R_a`.
    pub fn ratio(&self) -> f64 {
        self.r_ab_max / self.r_a
    }

    /// Fidelity advantage `ΔF = F_ab,max − F_a`.
    pub fn delta_f(&self) -> f64 {
        self.f_ab_max - self.f_a
    }
}

/// Inclusive linear grid from `start` to `stop` in steps of `step`.
pub fn grid_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "grid step must be positive");
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

/// Default landscape gain grid: 0 to 24 dB in 0.25 dB steps.
pub fn default_gain_grid_db() -> Vec<f64> {
    grid_range(0.0, 24.0, 0.25)
}

/// Default landscape noise grid: 0.5 to 50 photons in 0.5 steps.
pub fn default_noise_grid() -> Vec<f64> {
    grid_range(0.5, 50.0, 0.5)
}

/// Evaluate the metric grid over gains (dB) × added noise, with the
/// equal-noise convention `N_sys ≡ N_sys,a = N_sys,b`.
///
/// Rows are emitted in grid order: gain-major, noise-minor.
pub fn landscape(gains_db: &[f64], n_sys: &[f64], i2_in: f64) -> Result<Vec<MetricPoint>> {
    let mut out = Vec::with_capacity(gains_db.len() * n_sys.len());
    for &g_db in gains_db {
        let params = SqueezeParams::from_gain_db(g_db)?;
        for &n in n_sys {
            if n < 0.0 {
                return Err(Error::Domain(format!("negative added noise {n}")));
            }
            out.push(MetricPoint::evaluate(&params, n, n, i2_in));
        }
    }
    Ok(out)
}

/// Fixed-gain cross section of a landscape row set.
pub fn cross_section(points: &[MetricPoint], gain_db: f64, tol_db: f64) -> Vec<MetricPoint> {
    points
        .iter()
        .filter(|p| (p.gain_db() - gain_db).abs() <= tol_db)
        .copied()
        .collect()
}


#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn r_monotone_nonincreasing_in_noise(
            r in 0.0..3.0f64,
            n in 0.0..50.0f64,
            dn in 0.0..10.0f64,
            i2 in 0.1..50.0f64,
        ) {
            let p = SqueezeParams::from_r(r).unwrap();
            prop_assert!(r_a(&p, n + dn, i2) <= r_a(&p, n, i2) + 1e-12);
            prop_assert!(r_ab_max(&p, n + dn, n, i2) <= r_ab_max(&p, n, n, i2) + 1e-12);
        }

        #[test]
        fn antisqueezed_dominates_squeezed(r in 0.0..3.0f64, n in 0.0..50.0f64) {
            let p = SqueezeParams::from_r(r).unwrap();
            let hi = r_ab_max(&p, n, n, 1.0);
            let lo = r_ab_min(&p, n, n, 1.0);
            prop_assert!(hi >= lo - 1e-12);
            if r == 0.0 {
                prop_assert!((hi - lo).abs() < 1e-12);
            }
        }

        #[test]
        fn fidelity_strictly_increasing(r1 in 0.0..100.0f64, dr in 0.001..50.0f64) {
            let f1 = fidelity_from_r(r1).unwrap();
            let f2 = fidelity_from_r(r1 + dr).unwrap();
            prop_assert!(f2 > f1);
            prop_assert!((0.5..=1.0).contains(&f1));
        }
    }
}
