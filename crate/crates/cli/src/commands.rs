//! The six subcommand implementations. Each returns the complete artifact
//! as a string; the caller decides where it lands.

use std::f64::consts::TAU;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use tmsq_core::backaction::{dephasing_rate, fit_isolation, gamma_c, nth_from_dephasing};
use tmsq_core::calibration::{fit_noise_vs_gain, NoiseKind, NoisePowerPoint};
use tmsq_core::metrics::{landscape, MetricPoint};
use tmsq_core::shots::{phi_sweep, sample_shots, PhiSweepPoint, ShotSet};
use tmsq_core::signal::{DispersiveInput, OutputChain, QubitState};
use tmsq_core::squeeze::SqueezeParams;

use crate::config::{require, GridSpec, ResolvedConfig};
use crate::{CliError, Command, Format, TOOL};

pub fn dispatch(command: Command, resolved: &ResolvedConfig) -> Result<String, CliError> {
    match command {
        Command::Analytic => analytic(resolved),
        Command::Simulate => simulate(resolved),
        Command::PhiSweep => phi_sweep_cmd(resolved),
        Command::Landscape => landscape_cmd(resolved),
        Command::Calibrate => calibrate(resolved),
        Command::Backaction => backaction(resolved),
    }
}

// ---- shared parameter assembly -------------------------------------------

fn squeeze_of(resolved: &ResolvedConfig) -> Result<SqueezeParams, CliError> {
    let gain_db = require(&resolved.params.gain_db, "gain_db")?;
    SqueezeParams::from_gain_db(gain_db).map_err(|e| CliError::from_core("squeeze", e))
}

fn input_of(resolved: &ResolvedConfig) -> Result<DispersiveInput, CliError> {
    let nbar_in = require(&resolved.params.nbar_in, "nbar_in")?;
    let theta = require(&resolved.params.theta_deg, "theta_deg")?.to_radians();
    DispersiveInput::new(nbar_in, theta, QubitState::Ground)
        .map_err(|e| CliError::from_core("signal", e))
}

fn chain_of(resolved: &ResolvedConfig, which: char) -> Result<OutputChain, CliError> {
    let p = &resolved.params;
    let (g_sys, n_sys, f_ghz) = match which {
        'a' => (
            require(&p.g_sys_a, "g_sys_a")?,
            require(&p.n_sys_a, "n_sys_a")?,
            require(&p.f_a_ghz, "f_a_ghz")?,
        ),
        _ => (
            require(&p.g_sys_b, "g_sys_b")?,
            require(&p.n_sys_b, "n_sys_b")?,
            require(&p.f_b_ghz, "f_b_ghz")?,
        ),
    };
    let t_int = require(&p.t_int_us, "t_int_us")? * 1e-6;
    let r_load = p.r_load_ohm.unwrap_or(50.0);
    OutputChain::with_load(g_sys, n_sys, TAU * f_ghz * 1e9, t_int, r_load)
        .map_err(|e| CliError::from_core("signal", e))
}

/// `i2_in` when set, otherwise derived from `nbar_in` and `theta_deg`;
/// `fallback` (used by `landscape`) wins over derivation when neither the
/// config nor the fixture pinned the input explicitly.
fn i2_in_of(resolved: &ResolvedConfig, fallback: Option<f64>) -> Result<f64, CliError> {
    if let Some(i2) = resolved.params.i2_in {
        return Ok(i2);
    }
    if let Some(i2) = fallback {
        return Ok(i2);
    }
    let nbar_in = require(&resolved.params.nbar_in, "nbar_in")?;
    let theta = require(&resolved.params.theta_deg, "theta_deg")?.to_radians();
    Ok((theta / 2.0).sin().powi(2) * nbar_in)
}

// ---- artifact assembly ----------------------------------------------------

fn csv_artifact(
    resolved: &ResolvedConfig,
    extra_header: &[String],
    columns: &str,
    rows: Vec<String>,
) -> String {
    let mut out = String::new();
    for line in resolved.header_lines(TOOL) {
        out.push_str(&line);
        out.push('\n');
    }
    for line in extra_header {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(columns);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn json_artifact(resolved: &ResolvedConfig, payload: serde_json::Value) -> String {
    let mut doc = json!({
        "tool": TOOL,
        "config": resolved,
    });
    doc.as_object_mut()
        .unwrap()
        .extend(payload.as_object().cloned().unwrap_or_default());
    let mut text = serde_json::to_string_pretty(&doc).expect("artifact serializes");
    text.push('\n');
    text
}

// ---- analytic --------------------------------------------------------------

const ANALYTIC_COLUMNS: &str =
    "G_dB,N_sys_a,N_sys_b,I2_in,R_a,R_ab_max,R_ab_min,F_a,F_ab_max,F_ab_min,ratio,deltaF";

fn metric_row(g_db: f64, n_label: Option<f64>, p: &MetricPoint) -> String {
    match n_label {
        // landscape form: single equal-noise column
        Some(n) => format!(
            "{},{},{},{},{},{},{},{},{},{}",
            g_db,
            n,
            p.r_a,
            p.r_ab_max,
            p.r_ab_min,
            p.f_a,
            p.f_ab_max,
            p.f_ab_min,
            p.ratio(),
            p.delta_f()
        ),
        None => format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            g_db,
            p.n_sys_a,
            p.n_sys_b,
            p.i2_in,
            p.r_a,
            p.r_ab_max,
            p.r_ab_min,
            p.f_a,
            p.f_ab_max,
            p.f_ab_min,
            p.ratio(),
            p.delta_f()
        ),
    }
}

fn metric_json(g_db: f64, p: &MetricPoint) -> serde_json::Value {
    json!({
        "g_db": g_db,
        "n_sys_a": p.n_sys_a,
        "n_sys_b": p.n_sys_b,
        "i2_in": p.i2_in,
        "r_a": p.r_a,
        "r_ab_max": p.r_ab_max,
        "r_ab_min": p.r_ab_min,
        "f_a": p.f_a,
        "f_ab_max": p.f_ab_max,
        "f_ab_min": p.f_ab_min,
        "ratio": p.ratio(),
        "delta_f": p.delta_f(),
    })
}

fn analytic(resolved: &ResolvedConfig) -> Result<String, CliError> {
    let squeeze = squeeze_of(resolved)?;
    let n_sys_a = require(&resolved.params.n_sys_a, "n_sys_a")?;
    let n_sys_b = require(&resolved.params.n_sys_b, "n_sys_b")?;
    let i2_in = i2_in_of(resolved, None)?;
    let g_db = resolved.params.gain_db.unwrap();
    let point = MetricPoint::evaluate(&squeeze, n_sys_a, n_sys_b, i2_in);
    Ok(match resolved.format {
        Format::Csv => csv_artifact(
            resolved,
            &[],
            ANALYTIC_COLUMNS,
            vec![metric_row(g_db, None, &point)],
        ),
        Format::Json => json_artifact(resolved, json!({ "rows": [metric_json(g_db, &point)] })),
    })
}

// ---- simulate ----------------------------------------------------------------

fn sample_set(resolved: &ResolvedConfig) -> Result<ShotSet, CliError> {
    let squeeze = squeeze_of(resolved)?;
    let input = input_of(resolved)?;
    let chain_a = chain_of(resolved, 'a')?;
    let chain_b = chain_of(resolved, 'b')?;
    let shots = require(&resolved.params.shots, "shots")?;
    sample_shots(&squeeze, &input, &chain_a, &chain_b, shots, resolved.seed)
        .map_err(|e| CliError::from_core("shots", e))
}

fn simulate(resolved: &ResolvedConfig) -> Result<String, CliError> {
    let set = sample_set(resolved)?;
    Ok(match resolved.format {
        Format::Csv => {
            let mut out = String::new();
            for line in resolved.header_lines(TOOL) {
                out.push_str(&line);
                out.push('\n');
            }
            let mut buf = Vec::new();
            set.write_csv(&mut buf)
                .map_err(|e| CliError::Config(format!("cannot serialize shots: {e}")))?;
            out.push_str(&String::from_utf8(buf).expect("shot CSV is UTF-8"));
            out
        }
        Format::Json => {
            let shots: Vec<serde_json::Value> = set
                .iter()
                .map(|(label, q)| {
                    json!({
                        "label": label.label(),
                        "i_a": q.i_a,
                        "q_a": q.q_a,
                        "i_b": q.i_b,
                        "q_b": q.q_b,
                    })
                })
                .collect();
            json_artifact(
                resolved,
                json!({ "seed": set.seed(), "shot_params": set.params(), "shots": shots }),
            )
        }
    })
}

// ---- phi-sweep -----------------------------------------------------------------

const PHI_COLUMNS: &str = "phi_deg,F_ab,nbar_ab_g,nbar_ab_e";

fn phi_sweep_cmd(resolved: &ResolvedConfig) -> Result<String, CliError> {
    let set = sample_set(resolved)?;
    let grid_deg = resolved
        .params
        .phi_grid_deg
        .unwrap_or(GridSpec {
            start: 0.0,
            stop: 355.0,
            step: 5.0,
        })
        .values()?;
    // one sweep cell per phi value; order restored by collect
    let points: Vec<PhiSweepPoint> = grid_deg
        .par_iter()
        .map(|&deg| {
            phi_sweep(&set, &[deg.to_radians()])
                .map(|s| s.points[0])
                .map_err(|e| CliError::from_core("shots", e))
        })
        .collect::<Result<_, _>>()?;
    let max = points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.fidelity.total_cmp(&b.1.fidelity))
        .unwrap();
    let min = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.fidelity.total_cmp(&b.1.fidelity))
        .unwrap();
    let joint = points
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.nbar_g + a.1.nbar_e).total_cmp(&(b.1.nbar_g + b.1.nbar_e)))
        .unwrap();
    let summary = [
        format!("# phi_max_fidelity_deg = {}", grid_deg[max.0]),
        format!("# phi_min_fidelity_deg = {}", grid_deg[min.0]),
        format!("# phi_min_joint_nbar_deg = {}", grid_deg[joint.0]),
    ];
    Ok(match resolved.format {
        Format::Csv => {
            let rows = grid_deg
                .iter()
                .zip(&points)
                .map(|(deg, p)| format!("{},{},{},{}", deg, p.fidelity, p.nbar_g, p.nbar_e))
                .collect();
            csv_artifact(resolved, &summary, PHI_COLUMNS, rows)
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = grid_deg
                .iter()
                .zip(&points)
                .map(|(deg, p)| {
                    json!({
                        "phi_deg": deg,
                        "f_ab": p.fidelity,
                        "nbar_ab_g": p.nbar_g,
                        "nbar_ab_e": p.nbar_e,
                    })
                })
                .collect();
            json_artifact(
                resolved,
                json!({
                    "phi_max_fidelity_deg": grid_deg[max.0],
                    "phi_min_fidelity_deg": grid_deg[min.0],
                    "phi_min_joint_nbar_deg": grid_deg[joint.0],
                    "rows": rows,
                }),
            )
        }
    })
}

// ---- landscape -----------------------------------------------------------------

const LANDSCAPE_COLUMNS: &str =
    "G_dB,N_sys,R_a,R_ab_max,R_ab_min,F_a,F_ab_max,F_ab_min,ratio,deltaF";

fn landscape_cmd(resolved: &ResolvedConfig) -> Result<String, CliError> {
    let gain_grid = resolved
        .params
        .gain_grid_db
        .unwrap_or(GridSpec {
            start: 0.0,
            stop: 24.0,
            step: 0.25,
        })
        .values()?;
    let noise_grid = resolved
        .params
        .n_sys_grid
        .unwrap_or(GridSpec {
            start: 0.5,
            stop: 50.0,
            step: 0.5,
        })
        .values()?;
    let i2_in = i2_in_of(resolved, Some(5.0))?;
    // rows evaluated concurrently, emitted in grid order
    let rows: Vec<Vec<MetricPoint>> = gain_grid
        .par_iter()
        .map(|&g_db| {
            landscape(&[g_db], &noise_grid, i2_in)
                .map_err(|e| CliError::from_core("metrics", e))
        })
        .collect::<Result<_, _>>()?;
    Ok(match resolved.format {
        Format::Csv => {
            let mut lines = Vec::with_capacity(gain_grid.len() * noise_grid.len());
            for (g_db, row) in gain_grid.iter().zip(&rows) {
                for (n, p) in noise_grid.iter().zip(row) {
                    lines.push(metric_row(*g_db, Some(*n), p));
                }
            }
            csv_artifact(resolved, &[], LANDSCAPE_COLUMNS, lines)
        }
        Format::Json => {
            let mut out = Vec::with_capacity(gain_grid.len() * noise_grid.len());
            for (g_db, row) in gain_grid.iter().zip(&rows) {
                for p in row {
                    out.push(metric_json(*g_db, p));
                }
            }
            json_artifact(resolved, json!({ "rows": out }))
        }
    })
}

// ---- data-file parsing -------------------------------------------------------

/// Split a data CSV into a lowercase header row and data rows, skipping
/// comments and blank lines.
fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        match &header {
            None => header = Some(cells.iter().map(|c| c.to_ascii_lowercase()).collect()),
            Some(h) => {
                if cells.len() != h.len() {
                    return Err(CliError::Config(format!(
                        "{}: row {:?} has {} cells, header has {}",
                        path.display(),
                        line,
                        cells.len(),
                        h.len()
                    )));
                }
                rows.push(cells);
            }
        }
    }
    let header = header
        .ok_or_else(|| CliError::Config(format!("{}: no header row", path.display())))?;
    Ok((header, rows))
}

fn parse_f64(path: &Path, cell: &str) -> Result<f64, CliError> {
    cell.parse()
        .map_err(|_| CliError::Config(format!("{}: bad number {cell:?}", path.display())))
}

// ---- calibrate -----------------------------------------------------------------

const CALIBRATE_COLUMNS: &str = "G_sys,N_sys,T_sys_K,P_0,fit_rms";

fn calibrate(resolved: &ResolvedConfig) -> Result<String, CliError> {
    let path = require(&resolved.params.input, "input")?;
    let (header, rows) = read_table(&path)?;
    if header != ["g_db", "value", "kind"] {
        return Err(CliError::Config(format!(
            "{}: expected columns G_dB,value,kind, got {}",
            path.display(),
            header.join(",")
        )));
    }
    let mut points = Vec::with_capacity(rows.len());
    for row in &rows {
        let g_db = parse_f64(&path, &row[0])?;
        let value = parse_f64(&path, &row[1])?;
        let kind = NoiseKind::parse(&row[2]).map_err(|e| CliError::from_core("calibration", e))?;
        points.push(
            NoisePowerPoint::new(10f64.powf(g_db / 10.0), value, kind)
                .map_err(|e| CliError::from_core("calibration", e))?,
        );
    }
    let mode = resolved.params.mode.clone().unwrap_or_else(|| "a".into());
    let f_ghz = match mode.as_str() {
        "a" => require(&resolved.params.f_a_ghz, "f_a_ghz")?,
        "b" => require(&resolved.params.f_b_ghz, "f_b_ghz")?,
        other => {
            return Err(CliError::Config(format!(
                "mode must be \"a\" or \"b\", got {other:?}"
            )))
        }
    };
    let t_int = require(&resolved.params.t_int_us, "t_int_us")? * 1e-6;
    let fit = fit_noise_vs_gain(&points, TAU * f_ghz * 1e9, t_int)
        .map_err(|e| CliError::from_core("calibration", e))?;
    Ok(match resolved.format {
        Format::Csv => {
            let g_sys = fit.g_sys.map(|v| v.to_string()).unwrap_or_default();
            csv_artifact(
                resolved,
                &[],
                CALIBRATE_COLUMNS,
                vec![format!(
                    "{},{},{},{},{}",
                    g_sys, fit.n_sys, fit.t_sys, fit.p_0, fit.fit_rms
                )],
            )
        }
        Format::Json => json_artifact(resolved, json!({ "result": fit })),
    })
}

// ---- backaction -----------------------------------------------------------------

const BACKACTION_COLUMNS: &str = "L,L_dB,nth_a,slope,intercept,rms";

fn backaction(resolved: &ResolvedConfig) -> Result<String, CliError> {
    let path = require(&resolved.params.input, "input")?;
    let (header, rows) = read_table(&path)?;
    let mut strained = 0usize;
    let points: Vec<(f64, f64)> = if header == ["g_db", "t1_us", "t2e_us"] {
        let kappa = TAU * require(&resolved.params.kappa_mhz, "kappa_mhz")? * 1e6;
        let chi = TAU * require(&resolved.params.chi_mhz, "chi_mhz")? * 1e6;
        let rate_per_photon = gamma_c(kappa, chi);
        let mut out = Vec::with_capacity(rows.len());
        for row in &rows {
            let g = 10f64.powf(parse_f64(&path, &row[0])? / 10.0);
            let t1 = parse_f64(&path, &row[1])? * 1e-6;
            let t2e = parse_f64(&path, &row[2])? * 1e-6;
            let gamma_phi =
                dephasing_rate(t1, t2e).map_err(|e| CliError::from_core("backaction", e))?;
            let est = nth_from_dephasing(gamma_phi, rate_per_photon);
            if est.approximation_strained {
                strained += 1;
            }
            out.push((g, est.nbar_th));
        }
        out
    } else if header == ["g_db", "nbar_th"] {
        rows.iter()
            .map(|row| {
                Ok((
                    10f64.powf(parse_f64(&path, &row[0])? / 10.0),
                    parse_f64(&path, &row[1])?,
                ))
            })
            .collect::<Result<_, CliError>>()?
    } else {
        return Err(CliError::Config(format!(
            "{}: expected columns G_dB,T1_us,T2E_us or G_dB,nbar_th, got {}",
            path.display(),
            header.join(",")
        )));
    };
    let fit = fit_isolation(&points).map_err(|e| CliError::from_core("backaction", e))?;
    let strained_note = (strained > 0).then(|| {
        format!("# warning: {strained} points have nbar_th > 0.1; the small-population model is strained")
    });
    Ok(match resolved.format {
        Format::Csv => {
            let extra: Vec<String> = strained_note.into_iter().collect();
            csv_artifact(
                resolved,
                &extra,
                BACKACTION_COLUMNS,
                vec![format!(
                    "{},{},{},{},{},{}",
                    fit.l,
                    fit.l_db(),
                    fit.nth_a,
                    fit.slope,
                    fit.intercept,
                    fit.rms
                )],
            )
        }
        Format::Json => json_artifact(
            resolved,
            json!({
                "result": {
                    "l": fit.l,
                    "l_db": fit.l_db(),
                    "nth_a": fit.nth_a,
                    "slope": fit.slope,
                    "intercept": fit.intercept,
                    "rms": fit.rms,
                    "residuals": fit.residuals,
                    "strained_points": strained,
                },
                "points": points.iter().map(|(g, n)| json!({"gain": g, "nbar_th": n})).collect::<Vec<_>>(),
            }),
        ),
    })
}
