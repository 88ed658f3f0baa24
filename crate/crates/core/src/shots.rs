//! Deterministic Monte Carlo shot generation and empirical readout metrics.
//!
//! Shots are drawn from the 4-D Gaussian whose mean comes from
//! [`propagate_means`] and whose covariance is the detection-frame output
//! covariance ([`output_covariance`] conjugated by the mode-b π rotation),
//! so the sampled clouds reproduce the analytic SNR formulas and the φ=π
//! antisqueezing structure of the combination protocol.
//!
//! # Determinism
//!
//! The generator is ChaCha12 seeded with the set's 64-bit seed. Stream
//! splitting: the prepared state and the sweep cell select the ChaCha
//! stream as `stream = 2·cell + state_index` (g = 0, e = 1), so shot
//! generation for distinct (state, cell) pairs can run concurrently and
//! still reproduce bit-for-bit regardless of scheduling.

use std::io::{BufRead, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::signal::{DispersiveInput, OutputChain, QubitState};
use crate::squeeze::{
    combine, output_covariance, propagate_means, CombinedQuad, QuadMeans, SqueezeParams,
};
use crate::{Error, Result};

/// Generation parameters echoed into serialized shot sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotParams {
    pub r: f64,
    pub pump_phase: f64,
    pub nbar_in: f64,
    pub theta: f64,
    pub n_sys_a: f64,
    pub n_sys_b: f64,
    pub shots_per_state: usize,
}

/// A labeled set of IQ shot records at the amplifier-output plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSet {
    params: ShotParams,
    seed: u64,
    labels: Vec<QubitState>,
    records: Vec<QuadMeans>,
}

const BINARY_MAGIC: &[u8; 8] = b"TMSQSH01";

impl ShotSet {
    pub fn params(&self) -> &ShotParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> &[QubitState] {
        &self.labels
    }

    pub fn records(&self) -> &[QuadMeans] {
        &self.records
    }

    pub fn iter(&self) -> impl Iterator<Item = (QubitState, &QuadMeans)> {
        self.labels.iter().copied().zip(self.records.iter())
    }

    /// I quadrature of mode a for every shot.
    pub fn projection_i_a(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.i_a).collect()
    }

    /// Combined-mode quadratures of every shot at rotation `phi`.
    pub fn combined(&self, phi: f64) -> Vec<CombinedQuad> {
        self.records.iter().map(|r| combine(r, phi)).collect()
    }

    /// Combined-mode I quadrature of every shot at rotation `phi`.
    pub fn projection_i_combined(&self, phi: f64) -> Vec<f64> {
        self.records.iter().map(|r| combine(r, phi).i_ab).collect()
    }

    /// Sample mean vector of one prepared state.
    pub fn per_state_mean(&self, state: QubitState) -> Option<QuadMeans> {
        let mut acc = [0.0f64; 4];
        let mut n = 0usize;
        for (label, rec) in self.iter() {
            if label == state {
                let v = rec.as_array();
                for k in 0..4 {
                    acc[k] += v[k];
                }
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        for a in &mut acc {
            *a /= n as f64;
        }
        Some(QuadMeans::from_array(acc))
    }

    /// Sample covariance (maximum-likelihood, 1/n) of one prepared state.
    pub fn per_state_covariance(&self, state: QubitState) -> Option<[[f64; 4]; 4]> {
        let mean = self.per_state_mean(state)?.as_array();
        let mut acc = [[0.0f64; 4]; 4];
        let mut n = 0usize;
        for (label, rec) in self.iter() {
            if label == state {
                let v = rec.as_array();
                for i in 0..4 {
                    for j in 0..4 {
                        acc[i][j] += (v[i] - mean[i]) * (v[j] - mean[j]);
                    }
                }
                n += 1;
            }
        }
        for row in &mut acc {
            for x in row.iter_mut() {
                *x /= n as f64;
            }
        }
        Some(acc)
    }

    /// Serialize as CSV: a `# key = value` parameter header followed by
    /// `label,I_a,Q_a,I_b,Q_b` rows. Floats are written in shortest
    /// round-trip form, so read-back is lossless.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# tmsq shots v1")?;
        writeln!(w, "# seed = {}", self.seed)?;
        writeln!(w, "# shots_per_state = {}", self.params.shots_per_state)?;
        writeln!(w, "# r = {}", self.params.r)?;
        writeln!(w, "# pump_phase = {}", self.params.pump_phase)?;
        writeln!(w, "# nbar_in = {}", self.params.nbar_in)?;
        writeln!(w, "# theta_rad = {}", self.params.theta)?;
        writeln!(w, "# n_sys_a = {}", self.params.n_sys_a)?;
        writeln!(w, "# n_sys_b = {}", self.params.n_sys_b)?;
        writeln!(w, "label,I_a,Q_a,I_b,Q_b")?;
        for (label, rec) in self.iter() {
            writeln!(
                w,
                "{},{},{},{},{}",
                label, rec.i_a, rec.q_a, rec.i_b, rec.q_b
            )?;
        }
        Ok(())
    }

    /// Parse the CSV form. Unrecognized `#` lines are ignored so callers
    /// may prepend their own commentary.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut seed: Option<u64> = None;
        let mut fields = std::collections::HashMap::new();
        let mut labels = Vec::new();
        let mut records = Vec::new();
        let mut saw_columns = false;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((key, value)) = rest.split_once('=') {
                    let key = key.trim();
                    let value = value.trim();
                    if key == "seed" {
                        seed = Some(value.parse().map_err(|_| {
                            Error::Parse(format!("line {}: bad seed {value:?}", lineno + 1))
                        })?);
                    } else {
                        fields.insert(key.to_string(), value.to_string());
                    }
                }
                continue;
            }
            if line.starts_with("label,") {
                saw_columns = true;
                continue;
            }
            let mut parts = line.split(',');
            let label = QubitState::parse(parts.next().unwrap_or_default())?;
            let mut quad = [0.0f64; 4];
            for q in &mut quad {
                let tok = parts.next().ok_or_else(|| {
                    Error::Parse(format!("line {}: expected 5 columns", lineno + 1))
                })?;
                *q = tok.parse().map_err(|_| {
                    Error::Parse(format!("line {}: bad float {tok:?}", lineno + 1))
                })?;
            }
            labels.push(label);
            records.push(QuadMeans::from_array(quad));
        }
        if !saw_columns {
            return Err(Error::Parse("missing label,I_a,Q_a,I_b,Q_b header".into()));
        }
        let get = |k: &str| -> Result<f64> {
            fields
                .get(k)
                .ok_or_else(|| Error::Parse(format!("missing header field {k:?}")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad header field {k:?}")))
        };
        Ok(Self {
            params: ShotParams {
                r: get("r")?,
                pump_phase: get("pump_phase")?,
                nbar_in: get("nbar_in")?,
                theta: get("theta_rad")?,
                n_sys_a: get("n_sys_a")?,
                n_sys_b: get("n_sys_b")?,
                shots_per_state: get("shots_per_state")? as usize,
            },
            seed: seed.ok_or_else(|| Error::Parse("missing header field \"seed\"".into()))?,
            labels,
            records,
        })
    }

    /// Serialize to the compact binary form: an eight-byte magic, the
    /// generation header, then one `(label, 4×f64)` record per shot,
    /// everything little-endian and bit-exact.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.params.shots_per_state as u64).to_le_bytes())?;
        for v in [
            self.params.r,
            self.params.pump_phase,
            self.params.nbar_in,
            self.params.theta,
            self.params.n_sys_a,
            self.params.n_sys_b,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.records.len() as u64).to_le_bytes())?;
        for (label, rec) in self.iter() {
            w.write_all(&[match label {
                QubitState::Ground => b'g',
                QubitState::Excited => b'e',
            }])?;
            for v in rec.as_array() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Parse(format!(
                "bad magic {magic:?}; not a tmsq shot file"
            )));
        }
        let mut u64buf = [0u8; 8];
        let mut read_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut u64buf)?;
            Ok(u64::from_le_bytes(u64buf))
        };
        let seed = read_u64(&mut r)?;
        let shots_per_state = read_u64(&mut r)? as usize;
        let mut f64buf = [0u8; 8];
        let mut read_f64 = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut f64buf)?;
            Ok(f64::from_le_bytes(f64buf))
        };
        let r_param = read_f64(&mut r)?;
        let pump_phase = read_f64(&mut r)?;
        let nbar_in = read_f64(&mut r)?;
        let theta = read_f64(&mut r)?;
        let n_sys_a = read_f64(&mut r)?;
        let n_sys_b = read_f64(&mut r)?;
        let mut count_buf = [0u8; 8];
        r.read_exact(&mut count_buf)?;
        let n_records = u64::from_le_bytes(count_buf) as usize;
        let mut labels = Vec::with_capacity(n_records);
        let mut records = Vec::with_capacity(n_records);
        for _ in 0..n_records {
            let mut lab = [0u8; 1];
            r.read_exact(&mut lab)?;
            labels.push(match lab[0] {
                b'g' => QubitState::Ground,
                b'e' => QubitState::Excited,
                other => {
                    return Err(Error::Parse(format!("bad label byte {other:#x}")));
                }
            });
            let mut quad = [0.0f64; 4];
            for q in &mut quad {
                let mut buf = [0u8; 8];
                r.read_exact(&mut buf)?;
                *q = f64::from_le_bytes(buf);
            }
            records.push(QuadMeans::from_array(quad));
        }
        Ok(Self {
            params: ShotParams {
                r: r_param,
                pump_phase,
                nbar_in,
                theta,
                n_sys_a,
                n_sys_b,
                shots_per_state,
            },
            seed,
            labels,
            records,
        })
    }
}

/// Sample a labeled shot set: `shots_per_state` records for each prepared
/// state, drawn at sweep cell 0. See the module docs for the stream rule.
pub fn sample_shots(
    squeeze: &SqueezeParams,
    input: &DispersiveInput,
    chain_a: &OutputChain,
    chain_b: &OutputChain,
    shots_per_state: usize,
    seed: u64,
) -> Result<ShotSet> {
    sample_shots_cell(squeeze, input, chain_a, chain_b, shots_per_state, seed, 0)
}

/// Sample a labeled shot set for sweep cell `cell`.
pub fn sample_shots_cell(
    squeeze: &SqueezeParams,
    input: &DispersiveInput,
    chain_a: &OutputChain,
    chain_b: &OutputChain,
    shots_per_state: usize,
    seed: u64,
    cell: u32,
) -> Result<ShotSet> {
    if shots_per_state == 0 {
        return Err(Error::Domain("shot count must be at least 1".into()));
    }
    let cov = output_covariance(squeeze, chain_a.n_sys, chain_b.n_sys)?
        .rotated_b(std::f64::consts::PI);
    let factor = cov.factor()?;

    let n_total = 2 * shots_per_state;
    let mut labels = Vec::with_capacity(n_total);
    let mut records = Vec::with_capacity(n_total);
    for (idx, state) in [QubitState::Ground, QubitState::Excited].iter().enumerate() {
        let mean = propagate_means(&input.with_state(*state).encode(), squeeze).as_array();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(2 * cell as u64 + idx as u64);
        for _ in 0..shots_per_state {
            let z: [f64; 4] = [
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ];
            let mut v = mean;
            for i in 0..4 {
                for (j, zj) in z.iter().enumerate().take(i + 1) {
                    v[i] += factor[i][j] * zj;
                }
            }
            labels.push(*state);
            records.push(QuadMeans::from_array(v));
        }
    }
    Ok(ShotSet {
        params: ShotParams {
            r: squeeze.r(),
            pump_phase: squeeze.pump_phase(),
            nbar_in: input.nbar_in,
            theta: input.theta,
            n_sys_a: chain_a.n_sys,
            n_sys_b: chain_b.n_sys,
            shots_per_state,
        },
        seed,
        labels,
        records,
    })
}

/// Two-component Gaussian description of a 1-D projection.
///
/// By convention `mu_g >= mu_e` when the fit is label-free; with labels the
/// components belong to their actual labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleGaussianFit {
    pub mu_g: f64,
    pub mu_e: f64,
    pub sigma_g: f64,
    pub sigma_e: f64,
    pub w_g: f64,
    pub w_e: f64,
    /// RMS histogram residual per bin (0 for the labeled path).
    pub residual: f64,
    /// Cleared when the components overlap too much to separate:
    /// `|mu_g − mu_e| < (sigma_g + sigma_e)/4`.
    pub resolved: bool,
}

impl DoubleGaussianFit {
    fn flag_resolution(mut self) -> Self {
        self.resolved = (self.mu_g - self.mu_e).abs() >= (self.sigma_g + self.sigma_e) / 4.0;
        self
    }
}

const HISTOGRAM_BINS: usize = 200;
const LM_MAX_ITER: usize = 300;

/// Fit a two-component Gaussian to a 1-D projection.
///
/// With labels, per-label maximum-likelihood single Gaussians are returned.
/// Without labels, a 200-bin histogram is fitted by damped least squares
/// with moment-based initialization (or `init` when provided).
pub fn fit_double_gaussian(
    values: &[f64],
    labels: Option<&[QubitState]>,
    init: Option<&DoubleGaussianFit>,
) -> Result<DoubleGaussianFit> {
    if values.len() < 100 {
        return Err(Error::Domain(format!(
            "need at least 100 points to fit, got {}",
            values.len()
        )));
    }
    match labels {
        Some(labels) => {
            if labels.len() != values.len() {
                return Err(Error::Domain(format!(
                    "labels ({}) and values ({}) disagree in length",
                    labels.len(),
                    values.len()
                )));
            }
            fit_labeled(values, labels)
        }
        None => fit_histogram(values, init),
    }
}

fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt(), n)
}

fn fit_labeled(values: &[f64], labels: &[QubitState]) -> Result<DoubleGaussianFit> {
    let pick = |state: QubitState| {
        values
            .iter()
            .zip(labels)
            .filter(move |(_, l)| **l == state)
            .map(|(v, _)| *v)
    };
    let (mu_g, sigma_g, n_g) = moments(pick(QubitState::Ground));
    let (mu_e, sigma_e, n_e) = moments(pick(QubitState::Excited));
    if n_g < 2 || n_e < 2 {
        return Err(Error::Domain(format!(
            "labeled fit needs both states populated (g: {n_g}, e: {n_e})"
        )));
    }
    let total = (n_g + n_e) as f64;
    Ok(DoubleGaussianFit {
        mu_g,
        mu_e,
        sigma_g,
        sigma_e,
        w_g: n_g as f64 / total,
        w_e: n_e as f64 / total,
        residual: 0.0,
        resolved: false,
    }
    .flag_resolution())
}

fn fit_histogram(values: &[f64], init: Option<&DoubleGaussianFit>) -> Result<DoubleGaussianFit> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::FitDegenerate(
            "projection has zero spread; nothing to fit".into(),
        ));
    }
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut counts = vec![0.0f64; HISTOGRAM_BINS];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[k] += 1.0;
    }
    let centers: Vec<f64> = (0..HISTOGRAM_BINS)
        .map(|k| lo + (k as f64 + 0.5) * width)
        .collect();
    let n_total = values.len() as f64;
    let sigma_floor = width / 2.0;

    // parameter vector [a1, mu1, s1, a2, mu2, s2]
    let mut p = match init {
        Some(f) => {
            let amp = |w: f64, s: f64| w * n_total * width / (s * (2.0 * std::f64::consts::PI).sqrt());
            [
                amp(f.w_g, f.sigma_g),
                f.mu_g,
                f.sigma_g.max(sigma_floor),
                amp(f.w_e, f.sigma_e),
                f.mu_e,
                f.sigma_e.max(sigma_floor),
            ]
        }
        None => {
            // moment-based: split the sample at its mean, take per-side moments
            let (mean, _, _) = moments(values.iter().cloned());
            let (m1, s1, n1) = moments(values.iter().cloned().filter(|v| *v >= mean));
            let (m2, s2, n2) = moments(values.iter().cloned().filter(|v| *v < mean));
            let s1 = s1.max(sigma_floor);
            let s2 = s2.max(sigma_floor);
            let amp = |n: usize, s: f64| {
                n as f64 * width / (s * (2.0 * std::f64::consts::PI).sqrt())
            };
            [amp(n1, s1), m1, s1, amp(n2, s2), m2, s2]
        }
    };

    let model = |p: &[f64; 6], x: f64| -> f64 {
        let g = |a: f64, mu: f64, s: f64| {
            let t = (x - mu) / s;
            a * (-0.5 * t * t).exp()
        };
        g(p[0], p[1], p[2]) + g(p[3], p[4], p[5])
    };
    let cost_of = |p: &[f64; 6]| -> f64 {
        centers
            .iter()
            .zip(&counts)
            .map(|(&x, &c)| {
                let r = model(p, x) - c;
                r * r
            })
            .sum()
    };

    let mut cost = cost_of(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < LM_MAX_ITER {
        iterations += 1;
        // assemble J^T J and J^T r with the analytic Jacobian
        let mut h = [[0.0f64; 6]; 6];
        let mut g = [0.0f64; 6];
        for (&x, &c) in centers.iter().zip(&counts) {
            let mut row = [0.0f64; 6];
            for comp in 0..2 {
                let (a, mu, s) = (p[3 * comp], p[3 * comp + 1], p[3 * comp + 2]);
                let t = (x - mu) / s;
                let e = (-0.5 * t * t).exp();
                row[3 * comp] = e;
                row[3 * comp + 1] = a * e * t / s;
                row[3 * comp + 2] = a * e * t * t / s;
            }
            let r = model(&p, x) - c;
            for i in 0..6 {
                g[i] += row[i] * r;
                for j in 0..6 {
                    h[i][j] += row[i] * row[j];
                }
            }
        }
        // damped normal equations
        let mut a = h;
        for i in 0..6 {
            a[i][i] += lambda * h[i][i].max(1e-12);
        }
        let rhs = g.map(|v| -v);
        let Some(step) = solve6(a, rhs) else {
            lambda *= 10.0;
            continue;
        };
        let mut trial = p;
        for i in 0..6 {
            trial[i] += step[i];
        }
        trial[0] = trial[0].max(0.0);
        trial[3] = trial[3].max(0.0);
        trial[2] = trial[2].max(sigma_floor);
        trial[5] = trial[5].max(sigma_floor);
        let trial_cost = cost_of(&trial);
        if trial_cost <= cost {
            let improvement = cost - trial_cost;
            p = trial;
            cost = trial_cost;
            lambda = (lambda / 3.0).max(1e-12);
            if improvement <= 1e-12 * (cost + 1e-12) {
                converged = true;
                break;
            }
        } else {
            lambda *= 8.0;
            if lambda > 1e14 {
                // no descent direction left: gradient is numerically zero
                converged = true;
                break;
            }
        }
    }

    // order components so mu_g >= mu_e and convert amplitudes to weights
    let (first, second) = if p[1] >= p[4] { (0, 3) } else { (3, 0) };
    let mass_g = p[first] * p[first + 2];
    let mass_e = p[second] * p[second + 2];
    let mass = (mass_g + mass_e).max(1e-300);
    let fit = DoubleGaussianFit {
        mu_g: p[first + 1],
        mu_e: p[second + 1],
        sigma_g: p[first + 2],
        sigma_e: p[second + 2],
        w_g: mass_g / mass,
        w_e: mass_e / mass,
        residual: (cost / HISTOGRAM_BINS as f64).sqrt(),
        resolved: false,
    }
    .flag_resolution();
    if !converged {
        return Err(Error::FitNonConvergence {
            iterations,
            residual: fit.residual,
            best: Box::new(fit),
        });
    }
    Ok(fit)
}

fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> Option<[f64; 6]> {
    for col in 0..6 {
        let pivot = (col..6).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..6 {
            let f = a[row][col] / a[col][col];
            for k in col..6 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 6];
    for row in (0..6).rev() {
        let mut acc = b[row];
        for k in (row + 1)..6 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Power SNR from a fit: `R = ((μ_g−μ_e)/((σ_g+σ_e)/2))²`.
pub fn empirical_r(fit: &DoubleGaussianFit) -> Result<f64> {
    let sigma = (fit.sigma_g + fit.sigma_e) / 2.0;
    if sigma <= 0.0 {
        return Err(Error::Domain(
            "fit standard deviations sum to zero; SNR undefined".into(),
        ));
    }
    Ok(((fit.mu_g - fit.mu_e) / sigma).powi(2))
}

/// Classification threshold policy for [`empirical_fidelity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Midpoint of the per-label fitted means (matches the equal-σ
    /// fidelity relation). The default.
    MeanMidpoint,
    /// Intersection of the two weighted Gaussian likelihoods.
    LikelihoodRatio,
    /// Caller-supplied threshold.
    Fixed(f64),
}

/// Assignment fidelity `F = 1 − [P(g|e) + P(e|g)]/2` of a labeled 1-D
/// projection under the given threshold policy.
pub fn empirical_fidelity(
    values: &[f64],
    labels: &[QubitState],
    threshold: Threshold,
) -> Result<f64> {
    if values.len() != labels.len() {
        return Err(Error::Domain(format!(
            "labels ({}) and values ({}) disagree in length",
            labels.len(),
            values.len()
        )));
    }
    let pick = |state: QubitState| {
        values
            .iter()
            .zip(labels)
            .filter(move |(_, l)| **l == state)
            .map(|(v, _)| *v)
    };
    let (mu_g, sigma_g, n_g) = moments(pick(QubitState::Ground));
    let (mu_e, sigma_e, n_e) = moments(pick(QubitState::Excited));
    if n_g == 0 || n_e == 0 {
        return Err(Error::Domain(format!(
            "fidelity needs both states populated (g: {n_g}, e: {n_e})"
        )));
    }
    let t = match threshold {
        Threshold::MeanMidpoint => (mu_g + mu_e) / 2.0,
        Threshold::Fixed(t) => t,
        Threshold::LikelihoodRatio => {
            let w_g = n_g as f64 / (n_g + n_e) as f64;
            likelihood_threshold(mu_g, sigma_g, w_g, mu_e, sigma_e, 1.0 - w_g)
        }
    };
    // orientation: which side of the threshold is called "g"
    let g_is_high = mu_g >= mu_e;
    let misclassified = |v: f64, actual: QubitState| -> bool {
        let called_g = if g_is_high { v >= t } else { v < t };
        called_g != (actual == QubitState::Ground)
    };
    let err_g = pick(QubitState::Ground)
        .filter(|&v| misclassified(v, QubitState::Ground))
        .count() as f64
        / n_g as f64;
    let err_e = pick(QubitState::Excited)
        .filter(|&v| misclassified(v, QubitState::Excited))
        .count() as f64
        / n_e as f64;
    Ok(1.0 - (err_g + err_e) / 2.0)
}

// Intersection of w_g N(mu_g, s_g) and w_e N(mu_e, s_e): solve the
// quadratic in x, keep the root between the means, midpoint fallback.
fn likelihood_threshold(mu_g: f64, s_g: f64, w_g: f64, mu_e: f64, s_e: f64, w_e: f64) -> f64 {
    let midpoint = (mu_g + mu_e) / 2.0;
    let (v_g, v_e) = (s_g * s_g, s_e * s_e);
    if v_g <= 0.0 || v_e <= 0.0 {
        return midpoint;
    }
    if (v_g - v_e).abs() < 1e-12 * v_g.max(v_e) {
        // equal variances: linear equation
        if (mu_e - mu_g).abs() < 1e-300 {
            return midpoint;
        }
        return midpoint + v_g / (mu_g - mu_e) * (w_g / w_e).ln();
    }
    let a = v_e - v_g;
    let b = 2.0 * (mu_e * v_g - mu_g * v_e);
    let c = mu_g * mu_g * v_e - mu_e * mu_e * v_g
        - 2.0 * v_g * v_e * ((w_g * s_e) / (w_e * s_g)).ln();
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return midpoint;
    }
    let sq = disc.sqrt();
    let r1 = (-b + sq) / (2.0 * a);
    let r2 = (-b - sq) / (2.0 * a);
    let (lo, hi) = (mu_g.min(mu_e), mu_g.max(mu_e));
    let in_range = |x: f64| x >= lo && x <= hi;
    match (in_range(r1), in_range(r2)) {
        (true, true) => {
            if (r1 - midpoint).abs() <= (r2 - midpoint).abs() {
                r1
            } else {
                r2
            }
        }
        (true, false) => r1,
        (false, true) => r2,
        (false, false) => midpoint,
    }
}

/// One φ grid point of a sweep: combined-mode fidelity and per-state
/// combined photon numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiSweepPoint {
    pub phi: f64,
    pub fidelity: f64,
    pub nbar_g: f64,
    pub nbar_e: f64,
}

/// Result of sweeping the relative rotation φ over a shot set.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSweep {
    pub points: Vec<PhiSweepPoint>,
}

impl PhiSweep {
    pub fn max_fidelity(&self) -> &PhiSweepPoint {
        self.points
            .iter()
            .max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
            .expect("sweep is nonempty")
    }

    pub fn min_fidelity(&self) -> &PhiSweepPoint {
        self.points
            .iter()
            .min_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
            .expect("sweep is nonempty")
    }

    /// Grid point minimizing the joint (summed) combined photon number.
    pub fn min_joint_nbar(&self) -> &PhiSweepPoint {
        self.points
            .iter()
            .min_by(|a, b| (a.nbar_g + a.nbar_e).total_cmp(&(b.nbar_g + b.nbar_e)))
            .expect("sweep is nonempty")
    }
}

/// Sweep the relative rotation over `phi_grid`: combine every shot, project
/// on the combined I, and record fidelity and per-state photon numbers
/// (computed from the per-state centroids of the combined quadratures).
pub fn phi_sweep(shots: &ShotSet, phi_grid: &[f64]) -> Result<PhiSweep> {
    if phi_grid.is_empty() {
        return Err(Error::Domain("phi grid must be nonempty".into()));
    }
    let mut points = Vec::with_capacity(phi_grid.len());
    for &phi in phi_grid {
        let combined = shots.combined(phi);
        let i_vals: Vec<f64> = combined.iter().map(|c| c.i_ab).collect();
        let fidelity = empirical_fidelity(&i_vals, shots.labels(), Threshold::MeanMidpoint)?;
        let mut acc = [(0.0f64, 0.0f64, 0usize); 2];
        for (label, c) in shots.labels().iter().zip(&combined) {
            let slot = match label {
                QubitState::Ground => &mut acc[0],
                QubitState::Excited => &mut acc[1],
            };
            slot.0 += c.i_ab;
            slot.1 += c.q_ab;
            slot.2 += 1;
        }
        let nbar = |(si, sq, n): (f64, f64, usize)| {
            let inv = 1.0 / n as f64;
            (si * inv).powi(2) + (sq * inv).powi(2)
        };
        points.push(PhiSweepPoint {
            phi,
            fidelity,
            nbar_g: nbar(acc[0]),
            nbar_e: nbar(acc[1]),
        });
    }
    Ok(PhiSweep { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn test_chains() -> (OutputChain, OutputChain) {
        (
            OutputChain::new(3.4e6, 28.2, TAU * 7.2284e9, 1e-6).unwrap(),
            OutputChain::new(1.7e7, 13.4, TAU * 9.7056e9, 1e-6).unwrap(),
        )
    }

    fn quiet_chains() -> (OutputChain, OutputChain) {
        (
            OutputChain::new(1.0, 0.0, TAU * 7.2284e9, 1e-6).unwrap(),
            OutputChain::new(1.0, 0.0, TAU * 9.7056e9, 1e-6).unwrap(),
        )
    }

    #[test]
    fn vacuum_statistics() {
        let squeeze = SqueezeParams::from_r(0.0).unwrap();
        let input = DispersiveInput::new(0.0, 0.0, QubitState::Ground).unwrap();
        let (ca, cb) = quiet_chains();
        let n = 100_000;
        let set = sample_shots(&squeeze, &input, &ca, &cb, n, 7).unwrap();
        let mean = set.per_state_mean(QubitState::Ground).unwrap();
        let bound = 5.0 * 0.5 / (n as f64).sqrt();
        for v in mean.as_array() {
            assert!(v.abs() < bound, "mean component {v} exceeds {bound}");
        }
        let cov = set.per_state_covariance(QubitState::Ground).unwrap();
        for (i, row) in cov.iter().enumerate() {
            assert!((row[i] - 0.25).abs() < 0.03 * 0.25, "var {} = {}", i, row[i]);
        }
    }

    #[test]
    fn sample_mean_matches_propagated_mean() {
        let squeeze = SqueezeParams::from_gain_db(2.3).unwrap();
        let input = DispersiveInput::new(90.0, 53.7f64.to_radians(), QubitState::Ground).unwrap();
        let (ca, cb) = test_chains();
        let n = 10_000;
        let set = sample_shots(&squeeze, &input, &ca, &cb, n, 42).unwrap();
        let analytic = propagate_means(&input.encode(), &squeeze);
        let sample = set.per_state_mean(QubitState::Ground).unwrap();
        let sigma_i_a = (squeeze.gain() * 2.0 - 1.0) / 4.0 + 28.2 / 2.0;
        let bound = 5.0 * sigma_i_a.sqrt() / (n as f64).sqrt();
        assert!(
            (sample.i_a - analytic.i_a).abs() < bound,
            "sample {} analytic {}",
            sample.i_a,
            analytic.i_a
        );
    }

    #[test]
    fn sample_covariance_converges_to_detection_frame() {
        let squeeze = SqueezeParams::from_gain_db(4.0).unwrap();
        let input = DispersiveInput::new(90.0, 53.7f64.to_radians(), QubitState::Ground).unwrap();
        let (ca, cb) = quiet_chains();
        let n = 200_000;
        let set = sample_shots(&squeeze, &input, &ca, &cb, n, 11).unwrap();
        let cov = set.per_state_covariance(QubitState::Ground).unwrap();
        let expected = output_covariance(&squeeze, 0.0, 0.0).unwrap().rotated_b(PI);
        for i in 0..4 {
            for j in 0..4 {
                // standard error of a covariance entry ~ sqrt((s_ii s_jj + s_ij^2)/n)
                let se = ((expected.entry(i, i) * expected.entry(j, j)
                    + expected.entry(i, j).powi(2))
                    / n as f64)
                    .sqrt();
                assert!(
                    (cov[i][j] - expected.entry(i, j)).abs() < 3.5 * se,
                    "entry ({i},{j}): {} vs {}",
                    cov[i][j],
                    expected.entry(i, j)
                );
            }
        }
        // magnitudes also match the operator-frame covariance
        let operator = output_covariance(&squeeze, 0.0, 0.0).unwrap();
        assert!((cov[0][2].abs() - operator.entry(0, 2).abs()).abs() < 0.05);
    }

    #[test]
    fn same_seed_reproduces_bit_for_bit() {
        let squeeze = SqueezeParams::from_gain_db(3.3).unwrap();
        let input = DispersiveInput::new(90.0, 53.7f64.to_radians(), QubitState::Ground).unwrap();
        let (ca, cb) = test_chains();
        let a = sample_shots(&squeeze, &input, &ca, &cb, 500, 13).unwrap();
        let b = sample_shots(&squeeze, &input, &ca, &cb, 500, 13).unwrap();
        assert_eq!(a, b);
        let c = sample_shots(&squeeze, &input, &ca, &cb, 500, 14).unwrap();
        assert_ne!(a, c);
        let d = sample_shots_cell(&squeeze, &input, &ca, &cb, 500, 13, 1).unwrap();
        assert_ne!(a.records()[0], d.records()[0]);
    }

    #[test]
    fn zero_shots_rejected() {
        let squeeze = SqueezeParams::from_r(0.1).unwrap();
        let input = DispersiveInput::new(1.0, 0.5, QubitState::Ground).unwrap();
        let (ca, cb) = test_chains();
        assert!(sample_shots(&squeeze, &input, &ca, &cb, 0, 1).is_err());
    }

    #[test]
    fn csv_roundtrip_is_lossless() {
        let squeeze = SqueezeParams::from_gain_db(2.3).unwrap();
        let input = DispersiveInput::new(90.0, 53.7f64.to_radians(), QubitState::Ground).unwrap();
        let (ca, cb) = test_chains();
        let set = sample_shots(&squeeze, &input, &ca, &cb, 50, 99).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let back = ShotSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn binary_roundtrip_is_lossless() {
        let squeeze = SqueezeParams::from_gain_db(1.3).unwrap();
        let input = DispersiveInput::new(90.0, 53.7f64.to_radians(), QubitState::Ground).unwrap();
        let (ca, cb) = test_chains();
        let set = sample_shots(&squeeze, &input, &ca, &cb, 50, 5).unwrap();
        let mut buf = Vec::new();
        set.write_binary(&mut buf).unwrap();
        let back = ShotSet::read_binary(buf.as_slice()).unwrap();
        assert_eq!(set, back);
        assert!(ShotSet::read_binary(&b"NOTMAGIC"[..]).is_err());
    }

    #[test]
    fn labeled_fit_recovers_cluster_moments() {
        let squeeze = SqueezeParams::from_gain_db(1.3).unwrap();
        let input = DispersiveInput::new(90.0, 53.7f64.to_radians(), QubitState::Ground).unwrap();
        let (ca, cb) = test_chains();
        let set = sample_shots(&squeeze, &input, &ca, &cb, 20_000, 21).unwrap();
        let fit = fit_double_gaussian(&set.projection_i_a(), Some(set.labels()), None).unwrap();
        let analytic = propagate_means(&input.encode(), &squeeze);
        let sigma = ((squeeze.gain() * 2.0 - 1.0) / 4.0 + 28.2 / 2.0).sqrt();
        let tol = 5.0 * sigma / (20_000f64).sqrt();
        assert!((fit.mu_g - analytic.i_a).abs() < tol);
        assert!((fit.mu_e + analytic.i_a).abs() < tol);
        assert!((fit.w_g - 0.5).abs() < 1e-12);
    }

    #[test]
    fn histogram_fit_recovers_synthetic_mixture() {
        // mu = -3 and +3, sigma = 1, 1e5 points
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        let mut values = Vec::with_capacity(100_000);
        for k in 0..100_000 {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(if k % 2 == 0 { z + 3.0 } else { z - 3.0 });
        }
        let fit = fit_double_gaussian(&values, None, None).unwrap();
        assert!((fit.mu_g - 3.0).abs() < 0.05, "mu_g = {}", fit.mu_g);
        assert!((fit.mu_e + 3.0).abs() < 0.05, "mu_e = {}", fit.mu_e);
        assert!((fit.sigma_g - 1.0).abs() < 0.05);
        assert!((fit.sigma_e - 1.0).abs() < 0.05);
        assert!((fit.w_g - 0.5).abs() < 0.02);
        assert!(fit.resolved);
    }

    #[test]
    fn histogram_fit_flags_unresolved_single_gaussian() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..50_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * 2.0 + 1.0
            })
            .collect();
        let fit = fit_double_gaussian(&values, None, None).unwrap();
        assert!(
            !fit.resolved || fit.w_g.min(fit.w_e) < 0.05,
            "single Gaussian must come out unresolved or single-weight: {fit:?}"
        );
    }

    #[test]
    fn fit_requires_enough_points() {
        assert!(fit_double_gaussian(&[1.0; 50], None, None).is_err());
    }

    #[test]
    fn empirical_r_reference_values() {
        let fit = DoubleGaussianFit {
            mu_g: 1.0,
            mu_e: -1.0,
            sigma_g: 1.0,
            sigma_e: 1.0,
            w_g: 0.5,
            w_e: 0.5,
            residual: 0.0,
            resolved: true,
        };
        assert_eq!(empirical_r(&fit).unwrap(), 4.0);
        let flat = DoubleGaussianFit { mu_e: 1.0, ..fit };
        assert_eq!(empirical_r(&flat).unwrap(), 0.0);
        let degenerate = DoubleGaussianFit {
            sigma_g: 0.0,
            sigma_e: 0.0,
            ..fit
        };
        assert!(empirical_r(&degenerate).is_err());
    }

    #[test]
    fn fidelity_perfectly_separated() {
        let values: Vec<f64> = (0..200).map(|k| if k < 100 { 10.0 + (k as f64) * 1e-3 } else { -10.0 - (k as f64) * 1e-3 }).collect();
        let labels: Vec<QubitState> = (0..200)
            .map(|k| if k < 100 { QubitState::Ground } else { QubitState::Excited })
            .collect();
        let f = empirical_fidelity(&values, &labels, Threshold::MeanMidpoint).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn fidelity_identical_distributions() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let n = 40_000;
        let values: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let labels: Vec<QubitState> = (0..n)
            .map(|k| if k % 2 == 0 { QubitState::Ground } else { QubitState::Excited })
            .collect();
        let f = empirical_fidelity(&values, &labels, Threshold::MeanMidpoint).unwrap();
        assert!((f - 0.5).abs() < 0.02, "F = {f}");
    }

    #[test]
    fn fidelity_single_label_rejected() {
        let values = vec![0.0; 10];
        let labels = vec![QubitState::Ground; 10];
        assert!(empirical_fidelity(&values, &labels, Threshold::MeanMidpoint).is_err());
    }

    #[test]
    fn fidelity_r8_clusters_match_overlap() {
        // R = 8 -> F = (1 + erf(1))/2 ~ 0.92135 as N grows
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let n = 100_000;
        let mut values = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(2 * n);
        let half = 8f64.sqrt() / 2.0;
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(z + half);
            labels.push(QubitState::Ground);
        }
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(z - half);
            labels.push(QubitState::Excited);
        }
        let f = empirical_fidelity(&values, &labels, Threshold::MeanMidpoint).unwrap();
        assert!((f - 0.9213503964748574).abs() < 0.005, "F = {f}");
    }

    #[test]
    fn likelihood_threshold_reduces_to_midpoint_when_symmetric() {
        let t = likelihood_threshold(2.0, 1.0, 0.5, -2.0, 1.0, 0.5);
        assert!((t - 0.0).abs() < 1e-12);
    }

    #[test]
    fn phi_sweep_flat_at_unity_gain() {
        // no idler signal and no cross correlation at r = 0
        let squeeze = SqueezeParams::from_r(0.0).unwrap();
        let input = DispersiveInput::new(90.0, 53.7f64.to_radians(), QubitState::Ground).unwrap();
        let (ca, cb) = test_chains();
        let set = sample_shots(&squeeze, &input, &ca, &cb, 50_000, 3).unwrap();
        let grid: Vec<f64> = (0..24).map(|k| k as f64 * TAU / 24.0).collect();
        let sweep = phi_sweep(&set, &grid).unwrap();
        let fmax = sweep.max_fidelity().fidelity;
        let fmin = sweep.min_fidelity().fidelity;
        assert!(fmax - fmin < 0.01, "spread {} too large for r=0", fmax - fmin);
    }

    #[test]
    fn phi_sweep_empty_grid_rejected() {
        let squeeze = SqueezeParams::from_r(0.0).unwrap();
        let input = DispersiveInput::new(1.0, 0.5, QubitState::Ground).unwrap();
        let (ca, cb) = quiet_chains();
        let set = sample_shots(&squeeze, &input, &ca, &cb, 200, 3).unwrap();
        assert!(phi_sweep(&set, &[]).is_err());
    }

    #[test]
    fn phi_sweep_nbar_matches_compact_forms() {
        let squeeze = SqueezeParams::from_gain_db(4.0).unwrap();
        let input = DispersiveInput::new(90.0, 53.7f64.to_radians(), QubitState::Ground).unwrap();
        let (ca, cb) = test_chains();
        let set = sample_shots(&squeeze, &input, &ca, &cb, 100_000, 29).unwrap();
        let sweep = phi_sweep(&set, &[0.0, PI]).unwrap();
        let i2 = input.i2_in();
        let q2 = input.nbar_in - i2;
        let want_pi = crate::squeeze::nbar_combined_antisqueezed(&squeeze, i2, q2);
        let want_zero = crate::squeeze::nbar_combined_squeezed(&squeeze, i2, q2);
        // centroid-based nbar carries sampling error ~ sqrt(var * nbar / n)
        assert!(
            (sweep.points[1].nbar_g - want_pi).abs() / want_pi < 0.05,
            "{} vs {want_pi}",
            sweep.points[1].nbar_g
        );
        assert!(
            (sweep.points[0].nbar_g - want_zero).abs() / want_zero.max(1.0) < 0.2,
            "{} vs {want_zero}",
            sweep.points[0].nbar_g
        );
    }
}
