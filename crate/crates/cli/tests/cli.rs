//! End-to-end tests of the `bbsim` binary: pipeline behavior, file
//! outputs, determinism and the exit-code contract
//! (1 threshold, 2 parse/config, 3 validation, 4 numerical).

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const HARNESS_CONFIG: &str = r#"
[network]
z_ref_ohm = 50.0
load_ohm = 30.0

[[network.sections]]
z0_ohm = 65.0
delay_s = 1.0e-9

[[network.sections]]
z0_ohm = 40.0
delay_s = 3.5e-9

[band]
f_start_hz = 9.5e9
f_stop_hz = 10.5e9
points = 201
carrier_hz = 10.0e9

[fit]
tol = 1e-3
n_max = 64

[multisine]
tone_offsets_hz = [-200e6, -66.66666666666667e6, 66.66666666666667e6, 200e6]
amplitudes_v = [1.0, 1.0, 1.0, 1.0]
phases_rad = [0.0, 0.0, 0.0, 0.0]

[source]
r_s_ohm = 50.0

[sim]
n_steps = 109

[compare]
threshold = 1e-2
warmup_steps = 19
"#;

fn bbsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbsim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, contents: &str) {
    std::fs::write(dir.join("run.toml"), contents).unwrap();
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process exited")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn full_pipeline_passes_the_oracle_comparison() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), HARNESS_CONFIG);

    let synth = bbsim(dir.path(), &["synth", "--config", "run.toml"]);
    assert_eq!(exit_code(&synth), 0, "{}", stderr(&synth));
    let s1p = std::fs::read_to_string(dir.path().join("out/network.s1p")).unwrap();
    let data_lines = s1p
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with(['!', '#']))
        .count();
    assert_eq!(data_lines, 201);

    let fit = bbsim(dir.path(), &["fit", "--config", "run.toml"]);
    assert_eq!(exit_code(&fit), 0, "{}", stderr(&fit));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/fit_report.json")).unwrap())
            .unwrap();
    assert!(report["max_abs_error"].as_f64().unwrap() < 1e-3);
    assert!(report["order_n"].as_u64().unwrap() <= 64);
    assert!(dir.path().join("out/taps.csv").exists());
    assert!(dir.path().join("out/fit_comparison.csv").exists());

    let sim = bbsim(dir.path(), &["sim", "--config", "run.toml"]);
    assert_eq!(exit_code(&sim), 0, "{}", stderr(&sim));

    let compare = bbsim(dir.path(), &["compare", "--config", "run.toml"]);
    assert_eq!(exit_code(&compare), 0, "{}", stderr(&compare));
    assert!(stdout(&compare).contains("status = PASS"));
    let report = std::fs::read_to_string(dir.path().join("out/compare_report.txt")).unwrap();
    assert!(report.contains("max_rel_err"));
    assert!(report.contains("rms_rel_err"));
}

#[test]
fn commands_are_deterministic() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), HARNESS_CONFIG);
    assert_eq!(exit_code(&bbsim(dir.path(), &["synth", "--config", "run.toml"])), 0);
    assert_eq!(exit_code(&bbsim(dir.path(), &["fit", "--config", "run.toml"])), 0);
    let first = std::fs::read_to_string(dir.path().join("out/taps.csv")).unwrap();
    assert_eq!(exit_code(&bbsim(dir.path(), &["fit", "--config", "run.toml"])), 0);
    let second = std::fs::read_to_string(dir.path().join("out/taps.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn synth_of_matched_network_writes_zero_s() {
    let dir = TempDir::new().unwrap();
    let config = r#"
[network]
z_ref_ohm = 50.0
load_ohm = 50.0

[[network.sections]]
z0_ohm = 50.0
delay_s = 1.0e-9

[band]
f_start_hz = 1.0e9
f_stop_hz = 2.0e9
points = 11
"#;
    write_config(dir.path(), config);
    let synth = bbsim(dir.path(), &["synth", "--config", "run.toml"]);
    assert_eq!(exit_code(&synth), 0, "{}", stderr(&synth));
    let s1p = std::fs::read_to_string(dir.path().join("out/network.s1p")).unwrap();
    for line in s1p.lines().filter(|l| !l.starts_with(['!', '#'])) {
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(fields.len(), 3);
        assert!(fields[1].abs() < 1e-15 && fields[2].abs() < 1e-15, "{line}");
    }
}

#[test]
fn descending_band_exits_with_code_2() {
    let dir = TempDir::new().unwrap();
    let config = HARNESS_CONFIG.replace("f_stop_hz = 10.5e9", "f_stop_hz = 9.0e9");
    write_config(dir.path(), &config);
    let synth = bbsim(dir.path(), &["synth", "--config", "run.toml"]);
    assert_eq!(exit_code(&synth), 2, "{}", stderr(&synth));
    assert!(stderr(&synth).contains("band"), "{}", stderr(&synth));
}

#[test]
fn fit_of_constant_data_selects_order_zero() {
    let dir = TempDir::new().unwrap();
    let config = r#"
[fit]
tol = 1e-6

[paths]
touchstone = "constant.s1p"
"#;
    write_config(dir.path(), config);
    let mut s1p = String::from("# HZ S RI R 50\n");
    for i in 0..11 {
        s1p.push_str(&format!("{} 0.25 -0.125\n", 9.5e9 + 1e8 * i as f64));
    }
    std::fs::write(dir.path().join("constant.s1p"), s1p).unwrap();
    let fit = bbsim(dir.path(), &["fit", "--config", "run.toml"]);
    assert_eq!(exit_code(&fit), 0, "{}", stderr(&fit));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/fit_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["order_n"].as_u64().unwrap(), 0);
    assert!(report["max_abs_error"].as_f64().unwrap() < 1e-12);
}

#[test]
fn underdetermined_fit_exits_with_code_3() {
    let dir = TempDir::new().unwrap();
    let config = r#"
[fit]
order_n = 10

[paths]
touchstone = "three.s1p"
"#;
    write_config(dir.path(), config);
    let s1p = "# HZ S RI R 50\n9.5e9 0.1 0.0\n1.0e10 0.2 0.0\n1.05e10 0.3 0.0\n";
    std::fs::write(dir.path().join("three.s1p"), s1p).unwrap();
    let fit = bbsim(dir.path(), &["fit", "--config", "run.toml"]);
    assert_eq!(exit_code(&fit), 3, "{}", stderr(&fit));
    assert!(stderr(&fit).contains("underdetermined"), "{}", stderr(&fit));
}

#[test]
fn unparseable_input_exits_with_code_2() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), "[fit]\ntol = 1e-3\n");
    std::fs::write(dir.path().join("bad.s1p"), "# HZ Y RI R 50\n1.0e9 0.1 0.0\n").unwrap();
    let fit = bbsim(
        dir.path(),
        &["fit", "--config", "run.toml", "--input", "bad.s1p"],
    );
    assert_eq!(exit_code(&fit), 2, "{}", stderr(&fit));
}

#[test]
fn impulse_drive_replays_the_taps() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), HARNESS_CONFIG);
    assert_eq!(exit_code(&bbsim(dir.path(), &["synth", "--config", "run.toml"])), 0);
    assert_eq!(exit_code(&bbsim(dir.path(), &["fit", "--config", "run.toml"])), 0);

    // matched impulse of height 2√z0 makes ã the unit impulse, so the
    // recorded b̃ sequence equals the taps
    let amplitude = 2.0 * 50.0_f64.sqrt();
    let impulse_config = HARNESS_CONFIG.replace(
        "r_s_ohm = 50.0",
        &format!("r_s_ohm = 50.0\ndrive = \"impulse\"\nimpulse_amplitude_v = {amplitude}"),
    );
    std::fs::write(dir.path().join("impulse.toml"), impulse_config).unwrap();
    let sim = bbsim(dir.path(), &["sim", "--config", "impulse.toml"]);
    assert_eq!(exit_code(&sim), 0, "{}", stderr(&sim));

    let taps = std::fs::read_to_string(dir.path().join("out/taps.csv")).unwrap();
    let waveform = std::fs::read_to_string(dir.path().join("out/waveform.csv")).unwrap();
    let tap_rows: Vec<Vec<f64>> = taps
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|t| t.parse().unwrap()).collect())
        .collect();
    let wave_rows: Vec<Vec<f64>> = waveform
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|t| t.parse().unwrap()).collect())
        .collect();
    for (k, tap_row) in tap_rows.iter().enumerate() {
        // waveform columns: n,t_s,re_a1,im_a1,re_b1,im_b1,...
        let (re_b, im_b) = (wave_rows[k][4], wave_rows[k][5]);
        assert!(
            (re_b - tap_row[2]).abs() < 1e-12 && (im_b - tap_row[3]).abs() < 1e-12,
            "tap {k}: waveform b = ({re_b}, {im_b}), tap = ({}, {})",
            tap_row[2],
            tap_row[3]
        );
    }
}

#[test]
fn compare_with_zero_threshold_exits_with_code_1() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), HARNESS_CONFIG);
    assert_eq!(exit_code(&bbsim(dir.path(), &["synth", "--config", "run.toml"])), 0);
    assert_eq!(exit_code(&bbsim(dir.path(), &["fit", "--config", "run.toml"])), 0);
    assert_eq!(exit_code(&bbsim(dir.path(), &["sim", "--config", "run.toml"])), 0);

    let strict = HARNESS_CONFIG.replace("threshold = 1e-2", "threshold = 0.0");
    std::fs::write(dir.path().join("strict.toml"), strict).unwrap();
    let compare = bbsim(dir.path(), &["compare", "--config", "strict.toml"]);
    assert_eq!(exit_code(&compare), 1, "{}", stderr(&compare));
    assert!(stdout(&compare).contains("status = FAIL"));
}

#[test]
fn compare_warmup_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), HARNESS_CONFIG);
    assert_eq!(exit_code(&bbsim(dir.path(), &["synth", "--config", "run.toml"])), 0);
    assert_eq!(exit_code(&bbsim(dir.path(), &["fit", "--config", "run.toml"])), 0);
    assert_eq!(exit_code(&bbsim(dir.path(), &["sim", "--config", "run.toml"])), 0);
    let compare = bbsim(
        dir.path(),
        &["compare", "--config", "run.toml", "--warmup", "1000"],
    );
    // warm-up longer than the waveform discards every sample
    assert_eq!(exit_code(&compare), 3, "{}", stderr(&compare));
}

#[test]
fn missing_input_file_exits_with_code_2() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), HARNESS_CONFIG);
    let sim = bbsim(dir.path(), &["sim", "--config", "run.toml"]);
    assert_eq!(exit_code(&sim), 2, "{}", stderr(&sim));
}

#[test]
fn csv_input_is_accepted_for_fit() {
    let dir = TempDir::new().unwrap();
    let config = r#"
[fit]
order_n = 1

[paths]
touchstone = "data.csv"
"#;
    write_config(dir.path(), config);
    let mut csv = String::from("freq_hz,re_s11,im_s11\n");
    for i in 0..5 {
        csv.push_str(&format!("{},0.5,0.1\n", 1.0e9 + 1e8 * i as f64));
    }
    std::fs::write(dir.path().join("data.csv"), csv).unwrap();
    let fit = bbsim(dir.path(), &["fit", "--config", "run.toml"]);
    assert_eq!(exit_code(&fit), 0, "{}", stderr(&fit));
}
