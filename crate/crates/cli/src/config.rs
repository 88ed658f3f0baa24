//! Configuration: strict-schema TOML files, named fixtures, and the
//! three-tier merge (explicit config > fixture > built-in default).
//!
//! Every physical quantity carries its unit in the key name (`gain_db`,
//! `theta_deg`, `t_int_us`, ...). Unknown keys are rejected with the TOML
//! parser's line/column diagnostics. The fully resolved configuration is
//! embedded in every output file as `# cfg:` lines, and re-running with
//! the extracted block reproduces the output byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tmsq_core::fixtures::{self, Fixture};

use crate::{CliError, Format};

/// Environment variable naming a directory of custom fixture files
/// (`<dir>/<name>.toml`, each a `[params]`-style fragment). Names found
/// there shadow the built-in fixtures.
pub const FIXTURE_DIR_ENV: &str = "TMSQ_FIXTURE_DIR";

pub const DEFAULT_SEED: u64 = 1234;

/// Inclusive arithmetic grid specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if !(self.step > 0.0) || self.stop < self.start {
            return Err(CliError::Config(format!(
                "bad grid: start={}, stop={}, step={}",
                self.start, self.stop, self.step
            )));
        }
        Ok(tmsq_core::metrics::grid_range(self.start, self.stop, self.step))
    }
}

macro_rules! params_struct {
    ($($(#[$doc:meta])* $field:ident : $ty:ty),* $(,)?) => {
        /// The parameter tree. All keys optional; commands demand what they
        /// need after merging.
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct Params {
            $(
                $(#[$doc])*
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl Params {
            /// Overwrite fields of `self` with the set fields of `other`.
            pub fn overlay(&mut self, other: &Params) {
                $(
                    if other.$field.is_some() {
                        self.$field = other.$field.clone();
                    }
                )*
            }
        }
    };
}

params_struct! {
    /// Amplifier power gain, dB.
    gain_db: f64,
    /// Average photons at the amplifier input.
    nbar_in: f64,
    /// Resonator population; converted via `alpha_bar` when given.
    nbar_in_prime: f64,
    /// Insertion-loss factor between resonator and amplifier, (0, 1].
    alpha_bar: f64,
    /// Dispersive phase shift, degrees.
    theta_deg: f64,
    /// Added noise photons of output chain a.
    n_sys_a: f64,
    /// Added noise photons of output chain b.
    n_sys_b: f64,
    /// Total power gain of output chain a.
    g_sys_a: f64,
    /// Total power gain of output chain b.
    g_sys_b: f64,
    /// Mode-a frequency, GHz.
    f_a_ghz: f64,
    /// Mode-b frequency, GHz.
    f_b_ghz: f64,
    /// Integration time, microseconds.
    t_int_us: f64,
    /// Digitizer load resistance, ohms.
    r_load_ohm: f64,
    /// Resonator linewidth kappa/2pi, MHz.
    kappa_mhz: f64,
    /// Dispersive shift chi/2pi, MHz.
    chi_mhz: f64,
    /// Relaxation time, microseconds.
    t1_us: f64,
    /// Echo coherence time, microseconds.
    t2e_us: f64,
    /// Shots per prepared state.
    shots: usize,
    /// Squared information quadrature mean at the input (photons).
    i2_in: f64,
    /// Which chain a calibration targets: "a" or "b".
    mode: String,
    /// Input data file for calibrate/backaction.
    input: PathBuf,
    /// Gain grid for landscape, dB.
    gain_grid_db: GridSpec,
    /// Added-noise grid for landscape, photons.
    n_sys_grid: GridSpec,
    /// Rotation grid for phi sweeps, degrees.
    phi_grid_deg: GridSpec,
}

/// On-disk configuration file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<String>,
    pub fixture: Option<String>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub params: Option<Params>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn builtin_defaults() -> Params {
    Params {
        gain_db: Some(0.0),
        nbar_in: Some(1.0),
        alpha_bar: Some(1.0),
        theta_deg: Some(90.0),
        n_sys_a: Some(0.0),
        n_sys_b: Some(0.0),
        g_sys_a: Some(1.0),
        g_sys_b: Some(1.0),
        f_a_ghz: Some(7.2284),
        f_b_ghz: Some(9.7056),
        t_int_us: Some(1.0),
        r_load_ohm: Some(50.0),
        shots: Some(10_000),
        mode: Some("a".into()),
        gain_grid_db: Some(GridSpec {
            start: 0.0,
            stop: 24.0,
            step: 0.25,
        }),
        n_sys_grid: Some(GridSpec {
            start: 0.5,
            stop: 50.0,
            step: 0.5,
        }),
        phi_grid_deg: Some(GridSpec {
            start: 0.0,
            stop: 355.0,
            step: 5.0,
        }),
        ..Params::default()
    }
}

fn fixture_params(f: &Fixture) -> Params {
    Params {
        theta_deg: Some(f.theta_deg),
        f_a_ghz: Some(f.f_a_ghz),
        f_b_ghz: Some(f.f_b_ghz),
        kappa_mhz: Some(f.kappa_mhz),
        chi_mhz: Some(f.chi_mhz),
        t1_us: Some(f.t1_us),
        t2e_us: Some(f.t2e_us),
        g_sys_a: Some(f.g_sys_a),
        n_sys_a: Some(f.n_sys_a),
        g_sys_b: Some(f.g_sys_b),
        n_sys_b: Some(f.n_sys_b),
        nbar_in: Some(f.nbar_in),
        shots: Some(f.shots),
        t_int_us: Some(f.t_int_us),
        ..Params::default()
    }
}

fn custom_fixture_names() -> Vec<String> {
    let Ok(dir) = std::env::var(FIXTURE_DIR_ENV) else {
        return Vec::new();
    };
    let Ok(entries) = std::fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let p = e.path();
            (p.extension().is_some_and(|x| x == "toml"))
                .then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}

/// Resolve a fixture name: the fixture directory (when set) shadows the
/// built-ins; unknown names list everything available.
pub fn load_fixture(name: &str) -> Result<Params, CliError> {
    if let Ok(dir) = std::env::var(FIXTURE_DIR_ENV) {
        let path = Path::new(&dir).join(format!("{name}.toml"));
        if path.is_file() {
            let text = std::fs::read_to_string(&path).map_err(|e| {
                CliError::Config(format!("cannot read fixture {}: {e}", path.display()))
            })?;
            return toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())));
        }
    }
    if let Some(f) = fixtures::by_name(name) {
        return Ok(fixture_params(&f));
    }
    let mut available: Vec<String> = fixtures::names().iter().map(|s| s.to_string()).collect();
    available.extend(custom_fixture_names());
    available.sort();
    available.dedup();
    Err(CliError::Config(format!(
        "unknown fixture {name:?}; available fixtures: {}",
        available.join(", ")
    )))
}

/// The fully merged configuration a command runs with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub command: String,
    pub seed: u64,
    pub format: Format,
    pub params: Params,
}

impl ResolvedConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config serializes")
    }

    /// The `# cfg:` comment block embedded at the top of file outputs.
    pub fn header_lines(&self, tool: &str) -> Vec<String> {
        let mut lines = vec![format!("# tool: {tool}")];
        for line in self.to_toml().lines() {
            if line.is_empty() {
                lines.push("# cfg:".to_string());
            } else {
                lines.push(format!("# cfg: {line}"));
            }
        }
        lines
    }
}

/// Recover the embedded TOML config from an emitted file, if present.
pub fn extract_embedded_config(text: &str) -> Option<String> {
    let mut out = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# cfg: ") {
            out.push_str(rest);
            out.push('\n');
        } else if let Some(rest) = line.strip_prefix("# cfg:") {
            out.push_str(rest);
            out.push('\n');
        }
    }
    (!out.is_empty()).then_some(out)
}

/// Merge the three configuration tiers for one invocation.
pub fn resolve(
    command_name: &str,
    file: &FileConfig,
    fixture_flag: Option<&str>,
    seed_flag: Option<u64>,
    format_flag: Option<Format>,
) -> Result<ResolvedConfig, CliError> {
    if let Some(cmd) = &file.command {
        if cmd != command_name {
            return Err(CliError::Config(format!(
                "config file is for command {cmd:?} but {command_name:?} was invoked"
            )));
        }
    }
    let mut params = builtin_defaults();
    let fixture_name = fixture_flag.map(str::to_owned).or_else(|| file.fixture.clone());
    if let Some(name) = &fixture_name {
        params.overlay(&load_fixture(name)?);
    }
    if let Some(fp) = &file.params {
        if fp.nbar_in.is_some() && fp.nbar_in_prime.is_some() {
            return Err(CliError::Config(
                "config sets both nbar_in and nbar_in_prime; pick one".into(),
            ));
        }
        params.overlay(fp);
    }
    if let Some(prime) = params.nbar_in_prime {
        let alpha = params.alpha_bar.unwrap_or(1.0);
        params.nbar_in = Some(alpha * prime);
    }
    Ok(ResolvedConfig {
        command: command_name.to_string(),
        seed: seed_flag.or(file.seed).unwrap_or(DEFAULT_SEED),
        format: format_flag.or(file.format).unwrap_or(Format::Csv),
        params,
    })
}

/// Fetch a required parameter with a diagnosable message.
pub fn require<T: Clone>(value: &Option<T>, key: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Config(format!("missing required parameter {key:?}")))
}
