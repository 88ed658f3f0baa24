//! Exact two-mode-squeeze algebra.
//!
//! Quadrature means and covariances are propagated through the amplifier in
//! closed form; nothing here samples. Conventions: vacuum variance is 1/4
//! per quadrature, the pump phase is fixed to zero, and quadrature vectors
//! are ordered (I_a, Q_a, I_b, Q_b).
//!
//! Two frames appear. The *operator frame* is the raw Heisenberg-picture
//! transform, under which I_a−I_b and Q_a+Q_b are squeezed to e^{−2r}/2.
//! The *detection frame* is the operator frame with mode b rotated by π,
//! matching how the trans-gain record is actually logged: the mode-b mean
//! acquires a sign flip on I and the cross covariances flip sign, which is
//! what makes φ=π the antisqueezing point of the combined I quadrature.
//! [`propagate_means`] returns detection-frame means (what the shot engine
//! and the combination protocol consume); [`propagate_means_operator`] and
//! [`output_covariance`] give the operator frame; conjugating a covariance
//! with [`QuadCovariance::rotated_b`] by π moves it between frames.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Squeeze-transform parameters: squeezing parameter `r ≥ 0` and pump phase.
///
/// The device power gain is `G = cosh²r ≥ 1`; `r = 0` is the identity
/// transform. The pump phase is fixed to zero throughout — a nonzero value
/// is subsumed by the relative rotation applied in [`combine`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    r: f64,
    pump_phase: f64,
}

impl SqueezeParams {
    /// Build from the squeezing parameter directly.
    pub fn from_r(r: f64) -> Result<Self> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::Domain(format!(
                "squeezing parameter must satisfy r >= 0, got {r}"
            )));
        }
        Ok(Self { r, pump_phase: 0.0 })
    }

    /// Build from a linear power gain `G ≥ 1`.
    pub fn from_gain(gain: f64) -> Result<Self> {
        Ok(Self {
            r: gain_to_r(gain)?,
            pump_phase: 0.0,
        })
    }

    /// Build from a power gain in dB (10·log10 convention).
    pub fn from_gain_db(gain_db: f64) -> Result<Self> {
        Self::from_gain(10f64.powf(gain_db / 10.0))
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn pump_phase(&self) -> f64 {
        self.pump_phase
    }

    /// Linear power gain `G = cosh²r`.
    pub fn gain(&self) -> f64 {
        self.r.cosh().powi(2)
    }

    pub fn gain_db(&self) -> f64 {
        10.0 * self.gain().log10()
    }

    /// Amplitude gain `√G = cosh r` of the direct (signal) path.
    pub fn amp_gain(&self) -> f64 {
        self.r.cosh()
    }

    /// Amplitude trans-gain `√(G−1) = sinh r` of the idler path.
    pub fn trans_amp_gain(&self) -> f64 {
        self.r.sinh()
    }

    /// Antisqueezed power factor `e^{2r}`.
    pub fn antisqueeze_power(&self) -> f64 {
        (2.0 * self.r).exp()
    }

    /// Squeezed power factor `e^{−2r}`.
    pub fn squeeze_power(&self) -> f64 {
        (-2.0 * self.r).exp()
    }
}

/// Invert `G = cosh²r` for `G ≥ 1`.
///
/// Uses `r = ln(√G + √(G−1))`, which is stable down to `G = 1` (returns 0).
pub fn gain_to_r(gain: f64) -> Result<f64> {
    if !gain.is_finite() || gain < 1.0 {
        return Err(Error::Domain(format!(
            "power gain must satisfy G >= 1, got {gain}"
        )));
    }
    Ok((gain.sqrt() + (gain - 1.0).sqrt()).ln())
}

/// Quadrature means (or one shot record) in square-root-photon units,
/// ordered (I_a, Q_a, I_b, Q_b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadMeans {
    pub i_a: f64,
    pub q_a: f64,
    pub i_b: f64,
    pub q_b: f64,
}

impl QuadMeans {
    pub fn new(i_a: f64, q_a: f64, i_b: f64, q_b: f64) -> Self {
        Self { i_a, q_a, i_b, q_b }
    }

    /// Amplifier-input means with a vacuum idler: `(i_in, q_in, 0, 0)`.
    pub fn input_signal(i_in: f64, q_in: f64) -> Self {
        Self::new(i_in, q_in, 0.0, 0.0)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.i_a, self.q_a, self.i_b, self.q_b]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Rotate the mode-b quadratures by `phi`, leaving mode a untouched.
    pub fn rotate_b(&self, phi: f64) -> Self {
        let (sin, cos) = phi.sin_cos();
        Self {
            i_a: self.i_a,
            q_a: self.q_a,
            i_b: cos * self.i_b - sin * self.q_b,
            q_b: sin * self.i_b + cos * self.q_b,
        }
    }
}

/// Which output mode of the amplifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    A,
    B,
}

/// Propagate input means to the amplifier output in the detection frame.
///
/// With a vacuum idler this is `Ī_a = √G·Ī_in`, `Q̄_a = √G·Q̄_in`,
/// `Ī_b = −√(G−1)·Ī_in`, `Q̄_b = +√(G−1)·Q̄_in`; the general form below
/// also carries nonzero idler input means through. Excited-state inputs
/// (I-sign flipped) come out with both I means flipped and Q means intact.
pub fn propagate_means(input: &QuadMeans, params: &SqueezeParams) -> QuadMeans {
    propagate_means_operator(input, params).rotate_b(std::f64::consts::PI)
}

/// Propagate input means in the raw operator (Heisenberg) frame.
///
/// `I_a = cosh r·I_a,in + sinh r·I_b,in` and so on; here the nonlocal
/// squeezing identity reads `I_a − I_b = e^{−r}(I_a,in − I_b,in)`.
pub fn propagate_means_operator(input: &QuadMeans, params: &SqueezeParams) -> QuadMeans {
    let c = params.amp_gain();
    let s = params.trans_amp_gain();
    QuadMeans {
        i_a: c * input.i_a + s * input.i_b,
        q_a: c * input.q_a - s * input.q_b,
        i_b: c * input.i_b + s * input.i_a,
        q_b: c * input.q_b - s * input.q_a,
    }
}

/// 4×4 symmetric covariance over (I_a, Q_a, I_b, Q_b), photon units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadCovariance {
    m: [[f64; 4]; 4],
}

impl QuadCovariance {
    /// Wrap an explicit matrix. Symmetry is the caller's responsibility;
    /// positive semi-definiteness is checked at factorization time.
    pub fn from_matrix(m: [[f64; 4]; 4]) -> Self {
        Self { m }
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    /// Variance of the linear combination `v·x`, i.e. `vᵀ Σ v`.
    pub fn quadratic_form(&self, v: &[f64; 4]) -> f64 {
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                acc += v[i] * self.m[i][j] * v[j];
            }
        }
        acc
    }

    /// Conjugate by the mode-b rotation used in [`combine`]: `T Σ Tᵀ` with
    /// `T = diag(1, 1, R(phi))`. Rotating by π converts between the
    /// operator and detection frames.
    pub fn rotated_b(&self, phi: f64) -> Self {
        let (sin, cos) = phi.sin_cos();
        // row transform t[i][k]
        let t = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, cos, -sin],
            [0.0, 0.0, sin, cos],
        ];
        let mut tm = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                tm[i][j] = (0..4).map(|k| t[i][k] * self.m[k][j]).sum();
            }
        }
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4).map(|k| tm[i][k] * t[j][k]).sum();
            }
        }
        Self { m: out }
    }

    /// Lower-triangular factor `L` with `L Lᵀ = Σ`.
    ///
    /// Pivots in `[−1e-12, 0)` are clamped to zero so that exactly
    /// degenerate covariances still factor; anything more negative is a
    /// genuine non-PSD input and errors with the offending pivot.
    pub fn factor(&self) -> Result<[[f64; 4]; 4]> {
        const CLAMP: f64 = -1e-12;
        let mut l = [[0.0; 4]; 4];
        for j in 0..4 {
            let mut d = self.m[j][j];
            for k in 0..j {
                d -= l[j][k] * l[j][k];
            }
            if d < 0.0 {
                if d < CLAMP {
                    return Err(Error::Covariance(format!(
                        "pivot {j} is {d:e}; matrix is not positive semi-definite"
                    )));
                }
                d = 0.0;
            }
            l[j][j] = d.sqrt();
            for i in (j + 1)..4 {
                let mut s = self.m[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if l[j][j] > 0.0 {
                    l[i][j] = s / l[j][j];
                } else if s.abs() > 1e-9 {
                    return Err(Error::Covariance(format!(
                        "zero pivot {j} with nonzero coupling {s:e}; matrix is not PSD"
                    )));
                }
            }
        }
        Ok(l)
    }
}

/// Operator-frame covariance of the amplifier output for vacuum-limited
/// inputs plus per-mode chain noise.
///
/// Diagonals are `cosh(2r)/4 + N_sys,k/2`; the only off-diagonal entries
/// are `Cov(I_a, I_b) = +sinh(2r)/4` and `Cov(Q_a, Q_b) = −sinh(2r)/4`.
/// Chain noise is uncorrelated between modes and quadratures.
pub fn output_covariance(
    params: &SqueezeParams,
    n_sys_a: f64,
    n_sys_b: f64,
) -> Result<QuadCovariance> {
    if n_sys_a < 0.0 || n_sys_b < 0.0 {
        return Err(Error::Domain(format!(
            "added noise photon numbers must be nonnegative, got N_sys_a={n_sys_a}, N_sys_b={n_sys_b}"
        )));
    }
    let c2 = (2.0 * params.r()).cosh() / 4.0;
    let s2 = (2.0 * params.r()).sinh() / 4.0;
    let da = c2 + n_sys_a / 2.0;
    let db = c2 + n_sys_b / 2.0;
    Ok(QuadCovariance {
        m: [
            [da, 0.0, s2, 0.0],
            [0.0, da, 0.0, -s2],
            [s2, 0.0, db, 0.0],
            [0.0, -s2, 0.0, db],
        ],
    })
}

/// Combined-mode quadratures after rotating mode b by `phi` and summing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedQuad {
    pub i_ab: f64,
    pub q_ab: f64,
    pub phi: f64,
}

/// Rotate the mode-b quadratures by `phi` and add them to mode a:
/// `I_ab = I_a + cos φ·I_b − sin φ·Q_b`, `Q_ab = Q_a + sin φ·I_b + cos φ·Q_b`.
///
/// At `phi = π` this is the difference combination (antisqueezed I in the
/// detection frame); at `phi = 0` it is the plain sum.
pub fn combine(point: &QuadMeans, phi: f64) -> CombinedQuad {
    let rotated = point.rotate_b(phi);
    CombinedQuad {
        i_ab: rotated.i_a + rotated.i_b,
        q_ab: rotated.q_a + rotated.q_b,
        phi,
    }
}

/// Average photon number of one output mode, `n̄ = Ī² + Q̄²`.
///
/// For detection-frame propagated means this evaluates to `G·n̄_in` for
/// mode a and `(G−1)·n̄_in` for mode b.
pub fn nbar_mode(means: &QuadMeans, mode: Mode) -> f64 {
    match mode {
        Mode::A => means.i_a * means.i_a + means.q_a * means.q_a,
        Mode::B => means.i_b * means.i_b + means.q_b * means.q_b,
    }
}

/// Fictitious average photon number of the combined mode at rotation `phi`,
/// `n̄_ab(φ) = Ī²_ab(φ) + Q̄²_ab(φ)`.
pub fn nbar_combined(means: &QuadMeans, phi: f64) -> f64 {
    let c = combine(means, phi);
    c.i_ab * c.i_ab + c.q_ab * c.q_ab
}

/// Compact form of the combined photon number at `phi = π`:
/// `e^{2r}·Ī²_in + e^{−2r}·Q̄²_in`.
pub fn nbar_combined_antisqueezed(params: &SqueezeParams, i2_in: f64, q2_in: f64) -> f64 {
    params.antisqueeze_power() * i2_in + params.squeeze_power() * q2_in
}

/// Compact form of the combined photon number at `phi = 0`:
/// `e^{−2r}·Ī²_in + e^{2r}·Q̄²_in`.
pub fn nbar_combined_squeezed(params: &SqueezeParams, i2_in: f64, q2_in: f64) -> f64 {
    params.squeeze_power() * i2_in + params.antisqueeze_power() * q2_in
}
