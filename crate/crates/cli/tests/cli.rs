//! End-to-end tests driving the `tmsq` binary: determinism, golden column
//! headers, exit codes, fixture handling, and the resolved-config
//! round-trip contract.

use std::path::Path;
use std::process::{Command, Output};

use tmsq_cli::config::extract_embedded_config;

fn tmsq(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmsq"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn column_line<'t>(text: &'t str, prefix: &str) -> &'t str {
    text.lines()
        .find(|l| l.starts_with(prefix))
        .unwrap_or_else(|| panic!("no column line starting with {prefix:?}"))
}

#[test]
fn analytic_defaults_are_vacuum_limited() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&tmsq(&["analytic"], dir.path()));
    assert_eq!(
        column_line(&text, "G_dB"),
        "G_dB,N_sys_a,N_sys_b,I2_in,R_a,R_ab_max,R_ab_min,F_a,F_ab_max,F_ab_min,ratio,deltaF"
    );
    let row = text.lines().last().unwrap();
    let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
    // R_a = 16 * I2_in at 0 dB and zero added noise
    assert!((cells[4] - 16.0 * cells[3]).abs() < 1e-9);
}

#[test]
fn simulate_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.toml", "[params]\ngain_db = 2.3\nshots = 200\n");
    let args = [
        "simulate",
        "--fixture",
        "paper-defaults",
        "--config",
        &cfg,
        "--seed",
        "42",
    ];
    let a = stdout(&tmsq(&args, dir.path()));
    let b = stdout(&tmsq(&args, dir.path()));
    assert_eq!(a, b);
    assert_eq!(
        column_line(&a, "label"),
        "label,I_a,Q_a,I_b,Q_b"
    );
    // a different seed changes the records
    let c = stdout(&tmsq(
        &[
            "simulate",
            "--fixture",
            "paper-defaults",
            "--config",
            &cfg,
            "--seed",
            "43",
        ],
        dir.path(),
    ));
    assert_ne!(a, c);
}

#[test]
fn landscape_headline_ratio_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ls.toml",
        "[params]\ngain_grid_db = { start = 8.0, stop = 8.0, step = 1.0 }\nn_sys_grid = { start = 50.0, stop = 50.0, step = 1.0 }\n",
    );
    let text = stdout(&tmsq(
        &["landscape", "--fixture", "paper-defaults", "--config", &cfg],
        dir.path(),
    ));
    assert_eq!(
        column_line(&text, "G_dB"),
        "G_dB,N_sys,R_a,R_ab_max,R_ab_min,F_a,F_ab_max,F_ab_min,ratio,deltaF"
    );
    let row = text.lines().last().unwrap();
    let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cells[0], 8.0);
    assert_eq!(cells[1], 50.0);
    assert!((cells[8] - 1.66).abs() <= 0.02, "ratio = {}", cells[8]);
}

#[test]
fn config_roundtrip_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ls.toml",
        "[params]\ni2_in = 5.0\ngain_grid_db = { start = 0.0, stop = 4.0, step = 1.0 }\nn_sys_grid = { start = 1.0, stop = 5.0, step = 1.0 }\n",
    );
    let first = stdout(&tmsq(
        &["landscape", "--fixture", "paper-defaults", "--config", &cfg],
        dir.path(),
    ));
    let embedded = extract_embedded_config(&first).expect("embedded config present");
    let cfg2 = write(dir.path(), "extracted.toml", &embedded);
    let second = stdout(&tmsq(&["landscape", "--config", &cfg2], dir.path()));
    assert_eq!(first, second);
}

#[test]
fn unknown_config_key_exits_2_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[params]\ngian_db = 2.0\n");
    let out = tmsq(&["analytic", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gian_db"), "stderr: {err}");
}

#[test]
fn unknown_fixture_exits_2_and_lists_available() {
    let dir = tempfile::tempdir().unwrap();
    let out = tmsq(&["analytic", "--fixture", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("paper-defaults"), "stderr: {err}");
}

#[test]
fn missing_required_parameter_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // calibrate without an input file
    let out = tmsq(&["calibrate", "--fixture", "paper-defaults"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("input"));
}

#[test]
fn degenerate_calibration_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(
        dir.path(),
        "flat.csv",
        "G_dB,value,kind\n3.0,1.0e-12,watts\n3.0,1.1e-12,watts\n3.0,0.9e-12,watts\n",
    );
    let cfg = write(dir.path(), "cal.toml", &format!("[params]\ninput = \"{data}\"\n"));
    let out = tmsq(
        &["calibrate", "--fixture", "paper-defaults", "--config", &cfg],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("calibration"));
}

#[test]
fn calibrate_recovers_synthetic_chain() {
    let dir = tempfile::tempdir().unwrap();
    // noiseless synthetic points from the linear noise model for OUT_b
    let hbar = 1.0546e-34;
    let omega = std::f64::consts::TAU * 9.7056e9;
    let p0 = 1.7e7 * 1e6 * hbar * omega;
    let mut data = String::from("G_dB,value,kind\n");
    for k in 0..=16 {
        let g_db = k as f64 * 0.75;
        let g = 10f64.powf(g_db / 10.0);
        data.push_str(&format!("{g_db},{:e},watts\n", p0 * (g - 0.5 + 13.4)));
    }
    let data = write(dir.path(), "out_b.csv", &data);
    let cfg = write(
        dir.path(),
        "cal.toml",
        &format!("[params]\ninput = \"{data}\"\nmode = \"b\"\n"),
    );
    let text = stdout(&tmsq(
        &["calibrate", "--fixture", "paper-defaults", "--config", &cfg],
        dir.path(),
    ));
    assert_eq!(column_line(&text, "G_sys"), "G_sys,N_sys,T_sys_K,P_0,fit_rms");
    let cells: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert!((cells[0] - 1.7e7).abs() / 1.7e7 < 1e-3);
    assert!((cells[1] - 13.4).abs() / 13.4 < 1e-3);
    assert!((cells[2] - 6.2).abs() / 6.2 < 0.01);
}

#[test]
fn backaction_recovers_isolation_from_direct_nth() {
    let dir = tempfile::tempdir().unwrap();
    let l = 10f64.powf(-1.8);
    let mut data = String::from("G_dB,nbar_th\n");
    for k in 0..=10 {
        let g_db = k as f64;
        let g = 10f64.powf(g_db / 10.0);
        data.push_str(&format!("{g_db},{}\n", l * g + (0.005 - l)));
    }
    let data = write(dir.path(), "nth.csv", &data);
    let cfg = write(dir.path(), "ba.toml", &format!("[params]\ninput = \"{data}\"\n"));
    let text = stdout(&tmsq(&["backaction", "--config", &cfg], dir.path()));
    assert_eq!(
        column_line(&text, "L,"),
        "L,L_dB,nth_a,slope,intercept,rms"
    );
    let cells: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert!((cells[1] + 18.0).abs() < 0.05, "L_dB = {}", cells[1]);
    assert!((cells[2] - 0.005).abs() < 1e-6);
}

#[test]
fn phi_sweep_emits_summary_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        "[params]\ngain_db = 4.0\nshots = 2000\nphi_grid_deg = { start = 0.0, stop = 350.0, step = 10.0 }\n",
    );
    let text = stdout(&tmsq(
        &[
            "phi-sweep",
            "--fixture",
            "paper-defaults",
            "--config",
            &cfg,
            "--seed",
            "3",
            "--jobs",
            "2",
        ],
        dir.path(),
    ));
    assert_eq!(column_line(&text, "phi_deg"), "phi_deg,F_ab,nbar_ab_g,nbar_ab_e");
    assert!(text.contains("# phi_max_fidelity_deg = "));
    assert!(text.contains("# phi_min_joint_nbar_deg = "));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("phi_deg")).count(), 36);
}

#[test]
fn json_output_carries_config_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&tmsq(
        &["analytic", "--fixture", "paper-defaults", "--format", "json"],
        dir.path(),
    ));
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["config"]["command"], "analytic");
    assert_eq!(doc["config"]["params"]["n_sys_a"], 28.2);
    assert!(doc["rows"][0]["r_a"].is_f64());
}

#[test]
fn custom_fixture_directory_shadows_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let fixdir = dir.path().join("fixtures");
    std::fs::create_dir(&fixdir).unwrap();
    std::fs::write(fixdir.join("mylab.toml"), "nbar_in = 30.0\ntheta_deg = 45.0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tmsq"))
        .args(["analytic", "--fixture", "mylab"])
        .env("TMSQ_FIXTURE_DIR", &fixdir)
        .current_dir(dir.path())
        .output()
        .unwrap();
    let text = stdout(&out);
    // I2_in = sin^2(22.5 deg) * 30
    let row = text.lines().last().unwrap();
    let i2: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((i2 - (22.5f64.to_radians().sin().powi(2) * 30.0)).abs() < 1e-9);
    // unknown names mention the custom fixture too
    let err = Command::new(env!("CARGO_BIN_EXE_tmsq"))
        .args(["analytic", "--fixture", "zzz"])
        .env("TMSQ_FIXTURE_DIR", &fixdir)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(err.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&err.stderr);
    assert!(msg.contains("mylab") && msg.contains("paper-defaults"), "{msg}");
}

#[test]
fn out_flag_writes_file_identical_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let via_stdout = stdout(&tmsq(&["analytic"], dir.path()));
    let path = dir.path().join("a.csv");
    let out = tmsq(&["analytic", "--out", path.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let via_file = std::fs::read_to_string(&path).unwrap();
    assert_eq!(via_stdout, via_file);
}
