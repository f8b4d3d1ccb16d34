//! Least-squares extraction of a one-sided complex Fourier series from
//! baseband S-data, packaged as a discrete-time impulse response.
//!
//! The model is `S̃(ω) = Σ_{k=0..N} s_k·e^{-jkΩω}` with `Ω = π/ω_m`;
//! the coefficients double as complex taps at times `k·π/ω_m`. Only
//! non-negative indices exist, which keeps the response causal. The
//! solve uses one singular value decomposition of the design matrix,
//! shared across all P² port pairs; rank deficiency is an error, never
//! silently damped.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::baseband::BasebandData;
use crate::error::{Error, Result};

/// Condition-estimate threshold above which a fit is rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Complex discrete-time impulse response of a P-port network.
///
/// Tap `k` is a P×P matrix acting at time `k·dt_s` with
/// `dt_s = π/ω_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    taps: Vec<DMatrix<Complex64>>,
    dt_s: f64,
    carrier_hz: f64,
    half_bandwidth_rad: f64,
    z_ref_ohm: f64,
}

impl ImpulseResponse {
    pub fn new(
        taps: Vec<DMatrix<Complex64>>,
        carrier_hz: f64,
        half_bandwidth_rad: f64,
        z_ref_ohm: f64,
    ) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::validation("impulse response needs at least one tap"));
        }
        let ports = taps[0].nrows();
        if ports == 0 {
            return Err(Error::validation("port count must be positive"));
        }
        for (k, t) in taps.iter().enumerate() {
            if t.nrows() != ports || t.ncols() != ports {
                return Err(Error::validation(format!(
                    "tap {k} is {}x{}, expected {ports}x{ports}",
                    t.nrows(),
                    t.ncols()
                )));
            }
            if t.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::validation(format!("non-finite value in tap {k}")));
            }
        }
        if !half_bandwidth_rad.is_finite() || half_bandwidth_rad <= 0.0 {
            return Err(Error::validation(format!(
                "half-bandwidth {half_bandwidth_rad} rad/s must be positive"
            )));
        }
        if !carrier_hz.is_finite() || carrier_hz <= 0.0 {
            return Err(Error::validation(format!(
                "carrier {carrier_hz} Hz must be positive"
            )));
        }
        if !z_ref_ohm.is_finite() || z_ref_ohm <= 0.0 {
            return Err(Error::validation(format!(
                "reference impedance {z_ref_ohm} must be positive"
            )));
        }
        Ok(ImpulseResponse {
            taps,
            dt_s: std::f64::consts::PI / half_bandwidth_rad,
            carrier_hz,
            half_bandwidth_rad,
            z_ref_ohm,
        })
    }

    /// Convenience constructor for one-port responses.
    pub fn from_scalar_taps(
        taps: Vec<Complex64>,
        carrier_hz: f64,
        half_bandwidth_rad: f64,
        z_ref_ohm: f64,
    ) -> Result<Self> {
        let taps = taps
            .into_iter()
            .map(|c| DMatrix::from_element(1, 1, c))
            .collect();
        ImpulseResponse::new(taps, carrier_hz, half_bandwidth_rad, z_ref_ohm)
    }

    /// Highest tap index N; the response holds N+1 taps.
    pub fn order(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn taps(&self) -> &[DMatrix<Complex64>] {
        &self.taps
    }

    pub fn tap(&self, k: usize) -> &DMatrix<Complex64> {
        &self.taps[k]
    }

    pub fn port_count(&self) -> usize {
        self.taps[0].nrows()
    }

    /// Uniform tap spacing `π/ω_m` in seconds.
    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn half_bandwidth_rad(&self) -> f64 {
        self.half_bandwidth_rad
    }

    pub fn z_ref_ohm(&self) -> f64 {
        self.z_ref_ohm
    }
}

/// Quality summary of a least-squares fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    max_abs_error: f64,
    rms_error: f64,
    residuals: Vec<DMatrix<Complex64>>,
    condition_estimate: f64,
}

impl FitReport {
    pub fn max_abs_error(&self) -> f64 {
        self.max_abs_error
    }

    pub fn rms_error(&self) -> f64 {
        self.rms_error
    }

    /// Residual `M·s − F` per frequency point (P×P per point).
    pub fn residuals(&self) -> &[DMatrix<Complex64>] {
        &self.residuals
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }
}

/// Coefficient matrix of the fit: entry `(i, k) = exp(-j·Ω·k·ω_i)` with
/// `Ω = π/max|ω|`; column 0 is all ones.
pub fn build_design_matrix(offsets_rad: &[f64], order_n: usize) -> DMatrix<Complex64> {
    assert!(!offsets_rad.is_empty(), "offsets must be non-empty");
    let omega_m = offsets_rad.iter().fold(0.0f64, |m, o| m.max(o.abs()));
    assert!(
        order_n == 0 || omega_m > 0.0,
        "a degenerate all-zero offset grid only supports order 0"
    );
    let big_omega = if omega_m > 0.0 {
        std::f64::consts::PI / omega_m
    } else {
        0.0
    };
    DMatrix::from_fn(offsets_rad.len(), order_n + 1, |i, k| {
        Complex64::from_polar(1.0, -big_omega * k as f64 * offsets_rad[i])
    })
}

/// Least-squares fit of order N against the shared design matrix, one
/// right-hand side per port pair.
///
/// Errors when the system is underdetermined (`points < N+1`) or the
/// design matrix is numerically rank-deficient (condition estimate
/// above [`CONDITION_LIMIT`]).
pub fn fit(bb: &BasebandData, order_n: usize) -> Result<(ImpulseResponse, FitReport)> {
    let points = bb.len();
    if points < order_n + 1 {
        return Err(Error::validation(format!(
            "underdetermined fit: {points} frequency points for order {order_n} \
             (need at least N+1 = {})",
            order_n + 1
        )));
    }
    let ports = bb.port_count();
    let m = build_design_matrix(bb.offsets_rad(), order_n);

    // all P² right-hand sides as columns, row-major pair order
    let mut rhs = DMatrix::zeros(points, ports * ports);
    for (row, s) in bb.s_matrices().iter().enumerate() {
        for i in 0..ports {
            for j in 0..ports {
                rhs[(row, i * ports + j)] = s[(i, j)];
            }
        }
    }

    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let condition = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    if condition > CONDITION_LIMIT {
        return Err(Error::numerical(format!(
            "design matrix is numerically rank-deficient: condition estimate {condition:.3e} \
             exceeds {CONDITION_LIMIT:.0e}"
        )));
    }
    let solution = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::numerical(format!("least-squares solve failed: {e}")))?;

    let residual = &m * &solution - &rhs;
    let mut max_abs = 0.0f64;
    let mut residuals = Vec::with_capacity(points);
    for row in 0..points {
        let r = DMatrix::from_fn(ports, ports, |i, j| residual[(row, i * ports + j)]);
        max_abs = r.iter().fold(max_abs, |acc, c| acc.max(c.norm()));
        residuals.push(r);
    }
    let rms = (residual.norm_squared() / (points * ports * ports) as f64).sqrt();

    let taps = (0..=order_n)
        .map(|k| DMatrix::from_fn(ports, ports, |i, j| solution[(k, i * ports + j)]))
        .collect();
    let ir = ImpulseResponse::new(taps, bb.carrier_hz(), bb.half_bandwidth_rad(), bb.z_ref_ohm())?;
    let report = FitReport {
        max_abs_error: max_abs,
        rms_error: rms,
        residuals,
        condition_estimate: condition,
    };
    Ok((ir, report))
}

/// Evaluate the fitted series `Σ_k s_k·e^{-jkΩω}` at an offset.
///
/// Valid at any offset; outside `[-ω_m, ω_m]` the series repeats with
/// period `2ω_m`.
pub fn evaluate(ir: &ImpulseResponse, offset_rad: f64) -> DMatrix<Complex64> {
    let ports = ir.port_count();
    let mut acc: DMatrix<Complex64> = DMatrix::zeros(ports, ports);
    // Ω = π/ω_m equals the tap spacing in seconds
    for (k, tap) in ir.taps().iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -(k as f64) * ir.dt_s() * offset_rad);
        acc += tap * phase;
    }
    acc
}

/// Smallest order N ≤ `n_max` whose fit reaches `tol` max abs error.
///
/// Re-fits with increasing N; the search is also bounded by the
/// underdetermined limit `points - 1`.
pub fn choose_order(bb: &BasebandData, tol: f64, n_max: usize) -> Result<usize> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::validation(format!(
            "fit tolerance {tol} must be positive"
        )));
    }
    let n_limit = n_max.min(bb.len() - 1);
    let mut best = f64::INFINITY;
    for n in 0..=n_limit {
        let (_, report) = fit(bb, n)?;
        if report.max_abs_error() <= tol {
            return Ok(n);
        }
        best = best.min(report.max_abs_error());
    }
    Err(Error::validation(format!(
        "fit tolerance {tol:.3e} is unreachable: best max abs error {best:.3e} over N ≤ {n_limit} \
         ({} points)",
        bb.len()
    )))
}

/// Cumulative tap-energy fraction per index (Frobenius for matrices).
///
/// Nondecreasing and ends at exactly 1.0; an all-zero response is an
/// error.
pub fn tap_energy_profile(ir: &ImpulseResponse) -> Result<Vec<f64>> {
    let energies: Vec<f64> = ir.taps().iter().map(|t| t.norm_squared()).collect();
    let total: f64 = energies.iter().sum();
    if total == 0.0 {
        return Err(Error::validation(
            "all-zero impulse response has no energy profile",
        ));
    }
    let mut cum = 0.0;
    Ok(energies
        .iter()
        .map(|e| {
            cum += e;
            cum / total
        })
        .collect())
}

/// Serialize taps to CSV with a `#`-prefixed metadata header block.
pub fn write_taps_csv(ir: &ImpulseResponse) -> String {
    let ports = ir.port_count();
    let mut out = String::new();
    let _ = writeln!(out, "# carrier_hz = {}", ir.carrier_hz());
    let _ = writeln!(out, "# omega_m_rad = {}", ir.half_bandwidth_rad());
    let _ = writeln!(out, "# z_ref = {}", ir.z_ref_ohm());
    let _ = writeln!(out, "# N = {}", ir.order());
    out.push_str("k,t_s");
    for i in 1..=ports {
        for j in 1..=ports {
            let _ = write!(out, ",re_s{i}{j},im_s{i}{j}");
        }
    }
    out.push('\n');
    for (k, tap) in ir.taps().iter().enumerate() {
        let _ = write!(out, "{k},{}", k as f64 * ir.dt_s());
        for i in 0..ports {
            for j in 0..ports {
                let c = tap[(i, j)];
                let _ = write!(out, ",{},{}", c.re, c.im);
            }
        }
        out.push('\n');
    }
    out
}

/// Parse a tap file produced by [`write_taps_csv`].
pub fn read_taps_csv(text: &str) -> Result<ImpulseResponse> {
    let mut carrier_hz = None;
    let mut omega_m_rad = None;
    let mut z_ref = None;
    let mut order_n: Option<usize> = None;
    let mut body = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if let Some(meta) = trimmed.strip_prefix('#') {
            let (key, value) = meta.split_once('=').ok_or_else(|| {
                Error::parse(line_no, format!("metadata line `{trimmed}` is not `# key = value`"))
            })?;
            let value = value.trim();
            match key.trim() {
                "carrier_hz" => carrier_hz = Some(parse_meta_f64(value, line_no)?),
                "omega_m_rad" => omega_m_rad = Some(parse_meta_f64(value, line_no)?),
                "z_ref" => z_ref = Some(parse_meta_f64(value, line_no)?),
                "N" => {
                    order_n = Some(value.parse().map_err(|_| {
                        Error::parse(line_no, format!("invalid order `{value}`"))
                    })?)
                }
                other => {
                    return Err(Error::parse(
                        line_no,
                        format!("unknown metadata key `{other}`"),
                    ));
                }
            }
        } else if !trimmed.is_empty() {
            body.push_str(raw);
            body.push('\n');
        }
    }
    let carrier_hz =
        carrier_hz.ok_or_else(|| Error::validation("tap file is missing `# carrier_hz`"))?;
    let omega_m_rad =
        omega_m_rad.ok_or_else(|| Error::validation("tap file is missing `# omega_m_rad`"))?;
    let z_ref = z_ref.ok_or_else(|| Error::validation("tap file is missing `# z_ref`"))?;
    let order_n = order_n.ok_or_else(|| Error::validation("tap file is missing `# N`"))?;

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(0, e.to_string()))?
        .clone();
    if headers.len() < 4 || &headers[0] != "k" || &headers[1] != "t_s" {
        return Err(Error::validation(
            "tap file header must start with `k,t_s` followed by re/im tap columns",
        ));
    }
    let pairs = (headers.len() - 2) / 2;
    let ports = (pairs as f64).sqrt().round() as usize;
    if ports == 0 || 2 + 2 * ports * ports != headers.len() {
        return Err(Error::validation(format!(
            "tap columns do not form a square port matrix ({} value columns)",
            headers.len() - 2
        )));
    }

    let mut taps = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(0, e.to_string()))?;
        if record.len() != headers.len() {
            return Err(Error::validation(format!(
                "ragged tap row {row_idx}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        let parse_field = |idx: usize| -> Result<f64> {
            record[idx]
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("invalid number `{}` in tap row", &record[idx])))
        };
        let k = parse_field(0)? as usize;
        if k != row_idx {
            return Err(Error::validation(format!(
                "tap indices must be consecutive from 0: found {k} at row {row_idx}"
            )));
        }
        // the time column is redundant with k·π/ω_m; a mismatch means
        // the file was edited with inconsistent units
        let t_s = parse_field(1)?;
        let expected_t = k as f64 * std::f64::consts::PI / omega_m_rad;
        if (t_s - expected_t).abs() > 1e-6 * expected_t.abs().max(1.0 / omega_m_rad) {
            return Err(Error::validation(format!(
                "tap row {k} has t_s = {t_s} but k·π/ω_m = {expected_t}"
            )));
        }
        let mut tap = DMatrix::zeros(ports, ports);
        for i in 0..ports {
            for j in 0..ports {
                let base = 2 + 2 * (i * ports + j);
                tap[(i, j)] = Complex64::new(parse_field(base)?, parse_field(base + 1)?);
            }
        }
        taps.push(tap);
    }
    if taps.len() != order_n + 1 {
        return Err(Error::validation(format!(
            "tap file declares N = {order_n} but contains {} taps",
            taps.len()
        )));
    }
    ImpulseResponse::new(taps, carrier_hz, omega_m_rad, z_ref)
}

fn parse_meta_f64(value: &str, line_no: usize) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::parse(line_no, format!("invalid metadata value `{value}`")))
}
