//! The four pipeline commands. Stdout carries the human summary; files
//! carry the machine-readable data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use bbsim_core::baseband::to_baseband;
use bbsim_core::fourier_fit::{
    choose_order, evaluate, fit, read_taps_csv, write_taps_csv, FitReport, ImpulseResponse,
};
use bbsim_core::oracle::{sample_network, steady_state_multisine};
use bbsim_core::touchstone::{
    parse_touchstone, ports_from_extension, read_csv, write_touchstone, FreqUnit, NetworkData,
    ValueFormat,
};
use bbsim_core::transient::{read_sim_csv, run, write_sim_csv, TheveninSource};

use crate::config::RunConfig;
use crate::AppError;

fn write_output(path: &Path, contents: &str) -> Result<(), AppError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| AppError::Core(bbsim_core::Error::Io(e)))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| AppError::Core(bbsim_core::Error::Io(e)))
}

fn read_input(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|e| {
        AppError::config(format!("cannot read {}: {e}", path.display()))
    })
}

/// `synth`: sample the configured line cascade onto the configured grid
/// and write a Touchstone file.
pub fn cmd_synth(config: &RunConfig) -> Result<(), AppError> {
    let network = config.network()?.build()?;
    let band = config.band()?;
    let grid = band.grid_hz()?;
    let net = sample_network(&network, &grid)?;
    let text = write_touchstone(&net, ValueFormat::Ri, FreqUnit::GHz);
    write_output(&config.paths.touchstone, &text)?;
    println!(
        "synth: {} points over {:.6}–{:.6} GHz ({} port, z_ref {} Ω) -> {}",
        net.len(),
        band.f_start_hz / 1e9,
        band.f_stop_hz / 1e9,
        net.port_count(),
        net.z_ref_ohm(),
        config.paths.touchstone.display()
    );
    Ok(())
}

fn load_network_data(path: &Path, ports_flag: Option<usize>) -> Result<NetworkData, AppError> {
    let text = read_input(path)?;
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        Ok(read_csv(&text, 50.0)?)
    } else {
        let ports = ports_flag.or_else(|| ports_from_extension(path));
        Ok(parse_touchstone(&text, ports)?)
    }
}

#[derive(Serialize)]
struct FitReportJson {
    order_n: usize,
    max_abs_error: f64,
    rms_error: f64,
    condition_estimate: f64,
    carrier_hz: f64,
    omega_m_rad: f64,
    dt_s: f64,
    points: usize,
    ports: usize,
}

fn fit_comparison_csv(
    bb: &bbsim_core::baseband::BasebandData,
    ir: &ImpulseResponse,
) -> String {
    let ports = bb.port_count();
    let mut out = String::from("offset_rad");
    for i in 1..=ports {
        for j in 1..=ports {
            let _ = write!(
                out,
                ",re_data_s{i}{j},im_data_s{i}{j},re_model_s{i}{j},im_model_s{i}{j}"
            );
        }
    }
    out.push('\n');
    for (offset, data) in bb.offsets_rad().iter().zip(bb.s_matrices()) {
        let model = evaluate(ir, *offset);
        let _ = write!(out, "{offset}");
        for i in 0..ports {
            for j in 0..ports {
                let d = data[(i, j)];
                let m = model[(i, j)];
                let _ = write!(out, ",{},{},{},{}", d.re, d.im, m.re, m.im);
            }
        }
        out.push('\n');
    }
    out
}

/// `fit`: read tabulated data, extract the impulse response, emit the
/// tap file, the report (text + JSON) and the data-vs-model table.
pub fn cmd_fit(
    config: &RunConfig,
    input: Option<&PathBuf>,
    ports_flag: Option<usize>,
) -> Result<(), AppError> {
    let input_path = input.unwrap_or(&config.paths.touchstone);
    let net = load_network_data(input_path, ports_flag)?;
    let carrier = config.band.as_ref().and_then(|b| b.carrier_hz);
    let bb = to_baseband(&net, carrier)?;

    let fit_config = config.fit.as_ref();
    let tol = fit_config.and_then(|f| f.tol);
    let fixed_order = fit_config.and_then(|f| f.order_n);
    if tol.is_some() && fixed_order.is_some() {
        return Err(AppError::config(
            "fit.tol and fit.order_n are mutually exclusive",
        ));
    }
    let (ir, report): (ImpulseResponse, FitReport) = match fixed_order {
        Some(order) => fit(&bb, order)?,
        None => {
            let tol = tol.unwrap_or(1e-3);
            let n_max = fit_config.map_or(64, |f| f.n_max());
            let order = choose_order(&bb, tol, n_max)?;
            fit(&bb, order)?
        }
    };

    write_output(&config.paths.taps, &write_taps_csv(&ir))?;
    let json = FitReportJson {
        order_n: ir.order(),
        max_abs_error: report.max_abs_error(),
        rms_error: report.rms_error(),
        condition_estimate: report.condition_estimate(),
        carrier_hz: ir.carrier_hz(),
        omega_m_rad: ir.half_bandwidth_rad(),
        dt_s: ir.dt_s(),
        points: bb.len(),
        ports: bb.port_count(),
    };
    let json_text = serde_json::to_string_pretty(&json)
        .expect("fit report serializes") + "\n";
    write_output(&config.paths.fit_report, &json_text)?;
    write_output(&config.paths.fit_comparison, &fit_comparison_csv(&bb, &ir))?;

    println!(
        "fit: N = {}, max_abs_error = {:.6e}, rms_error = {:.6e}, condition = {:.3e}",
        ir.order(),
        report.max_abs_error(),
        report.rms_error(),
        report.condition_estimate()
    );
    println!(
        "fit: carrier {} Hz, dt {} s, taps -> {}, report -> {}, comparison -> {}",
        ir.carrier_hz(),
        ir.dt_s(),
        config.paths.taps.display(),
        config.paths.fit_report.display(),
        config.paths.fit_comparison.display()
    );
    Ok(())
}

/// `sim`: run the transient solver from a tap file and write the
/// waveform CSV. The multisine drives port 1; any further ports are
/// quiet Thevenin terminations.
pub fn cmd_sim(config: &RunConfig, taps: Option<&PathBuf>) -> Result<(), AppError> {
    let taps_path = taps.unwrap_or(&config.paths.taps);
    let ir = std::sync::Arc::new(read_taps_csv(&read_input(taps_path)?)?);
    let source_config = config.source()?;
    let r_s = source_config.r_s_ohm.per_port(ir.port_count())?;
    let n_steps = config.sim()?.n_steps;

    let mut sources = Vec::with_capacity(ir.port_count());
    match source_config.drive {
        crate::config::DriveKind::Multisine => {
            let spec = config.multisine()?.build()?;
            sources.push(TheveninSource::multisine(r_s[0], &spec, ir.dt_s())?);
        }
        crate::config::DriveKind::Impulse => {
            let amplitude = source_config.impulse_amplitude_v.unwrap_or(1.0);
            sources.push(TheveninSource::new(r_s[0], move |n| {
                if n == 0 {
                    Complex64::new(amplitude, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })?);
        }
    }
    for r in r_s.iter().skip(1) {
        sources.push(TheveninSource::termination(*r)?);
    }
    let result = run(&ir, &sources, n_steps)?;
    write_output(&config.paths.waveform, &write_sim_csv(&result))?;
    println!(
        "sim: {} steps at dt = {} s ({} port) -> {}",
        result.len(),
        result.dt_s(),
        result.port_count(),
        config.paths.waveform.display()
    );
    Ok(())
}

/// Peak-normalized envelope error between a recorded series and a
/// reference function of time. Normalizing by the peak reference
/// magnitude keeps the metric finite where the envelope passes through
/// zero.
fn envelope_errors(
    recorded: &[Complex64],
    reference: impl Fn(usize) -> Complex64,
    warmup: usize,
) -> Result<(f64, f64), AppError> {
    if warmup >= recorded.len() {
        return Err(AppError::Core(bbsim_core::Error::validation(format!(
            "warm-up of {warmup} steps discards the entire {}-sample waveform",
            recorded.len()
        ))));
    }
    let mut peak = 0.0f64;
    let mut max_dev = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut count = 0usize;
    for (n, &value) in recorded.iter().enumerate().skip(warmup) {
        let expected = reference(n);
        peak = peak.max(expected.norm());
        let dev = (value - expected).norm();
        max_dev = max_dev.max(dev);
        sum_sq += dev * dev;
        count += 1;
    }
    if peak == 0.0 {
        return Err(AppError::Core(bbsim_core::Error::numerical(
            "reference envelope is identically zero over the compared window",
        )));
    }
    let rms = (sum_sq / count as f64).sqrt();
    Ok((max_dev / peak, rms / peak))
}

/// `compare`: current envelope of a waveform CSV against the analytic
/// per-tone steady-state oracle. Exit code 0 iff the max relative
/// error stays below the configured threshold.
pub fn cmd_compare(
    config: &RunConfig,
    waveform: Option<&PathBuf>,
    warmup_flag: Option<usize>,
) -> Result<bool, AppError> {
    let waveform_path = waveform.unwrap_or(&config.paths.waveform);
    let result = read_sim_csv(&read_input(waveform_path)?)?;
    let network = config.network()?.build()?;
    let spec = config.multisine()?.build()?;
    let band = config.band()?;
    let carrier = band
        .carrier_hz
        .unwrap_or(0.5 * (band.f_start_hz + band.f_stop_hz));
    let r_s = config.source()?.r_s_ohm.per_port(result.port_count())?;
    let compare = config.compare()?;
    let warmup = warmup_flag.or(compare.warmup_steps).unwrap_or(0);

    let reference = steady_state_multisine(&network, &spec, carrier, r_s[0])?;
    let recorded: Vec<Complex64> = result.current().iter().map(|i| i[0]).collect();
    let dt = result.dt_s();
    let (max_rel, rms_rel) =
        envelope_errors(&recorded, |n| reference.current_envelope(n as f64 * dt), warmup)?;

    let passed = max_rel < compare.threshold;
    let mut report = String::new();
    let _ = writeln!(report, "samples = {}", recorded.len());
    let _ = writeln!(report, "warmup_steps = {warmup}");
    let _ = writeln!(report, "max_rel_err = {max_rel:.6e}");
    let _ = writeln!(report, "rms_rel_err = {rms_rel:.6e}");
    let _ = writeln!(report, "threshold = {:.6e}", compare.threshold);
    let _ = writeln!(report, "status = {}", if passed { "PASS" } else { "FAIL" });
    write_output(&config.paths.compare_report, &report)?;
    print!("{report}");
    Ok(passed)
}
