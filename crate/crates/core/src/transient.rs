//! Equivalent-baseband transient solver.
//!
//! Each port is terminated by a Thevenin source `ṽ_s = R_s·ĩ + ṽ`. At
//! step n the convolution history `H[n]` is known, the scattered wave
//! is `b̃ = s̃[0]·ã + H`, and substituting the pseudowave definitions
//! `ṽ = √z0·(ã+b̃)`, `ĩ = (ã−b̃)/√z0` leaves a P×P linear system for
//! the unknown incident wave:
//!
//! `[diag(α) + diag(β)·s̃[0]]·ã = ṽ_s − diag(β)·H`,
//! `α_p = √z0 + R_p/√z0`, `β_p = √z0 − R_p/√z0`.
//!
//! The simulation step is locked to the tap spacing `π/ω_m`; envelopes
//! are sampled, never interpolated.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::convolution::ConvolverState;
use crate::error::{Error, Result};
use crate::fourier_fit::ImpulseResponse;

/// Pseudowaves from port voltage and current:
/// `a = (v + z0·i)/(2√z0)`, `b = (v − z0·i)/(2√z0)`.
pub fn waves_from_vi(v: Complex64, i: Complex64, z0: f64) -> (Complex64, Complex64) {
    assert!(z0 > 0.0, "reference impedance must be positive");
    let root = z0.sqrt();
    let a = (v + z0 * i) / (2.0 * root);
    let b = (v - z0 * i) / (2.0 * root);
    (a, b)
}

/// Inverse of [`waves_from_vi`]: `v = √z0·(a+b)`, `i = (a−b)/√z0`.
pub fn vi_from_waves(a: Complex64, b: Complex64, z0: f64) -> (Complex64, Complex64) {
    assert!(z0 > 0.0, "reference impedance must be positive");
    let root = z0.sqrt();
    (root * (a + b), (a - b) / root)
}

/// Multisine excitation: equal-length tone offset/amplitude/phase lists.
#[derive(Debug, Clone, PartialEq)]
pub struct MultisineSpec {
    tone_offsets_hz: Vec<f64>,
    amplitudes_v: Vec<f64>,
    phases_rad: Vec<f64>,
}

impl MultisineSpec {
    pub fn new(
        tone_offsets_hz: Vec<f64>,
        amplitudes_v: Vec<f64>,
        phases_rad: Vec<f64>,
    ) -> Result<Self> {
        if tone_offsets_hz.is_empty() {
            return Err(Error::validation("multisine needs at least one tone"));
        }
        if tone_offsets_hz.len() != amplitudes_v.len()
            || tone_offsets_hz.len() != phases_rad.len()
        {
            return Err(Error::validation(format!(
                "multisine lists must have equal lengths: {} offsets, {} amplitudes, {} phases",
                tone_offsets_hz.len(),
                amplitudes_v.len(),
                phases_rad.len()
            )));
        }
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        if !finite(&tone_offsets_hz) || !finite(&amplitudes_v) || !finite(&phases_rad) {
            return Err(Error::validation("multisine parameters must be finite"));
        }
        Ok(MultisineSpec {
            tone_offsets_hz,
            amplitudes_v,
            phases_rad,
        })
    }

    pub fn tone_count(&self) -> usize {
        self.tone_offsets_hz.len()
    }

    pub fn tone_offsets_hz(&self) -> &[f64] {
        &self.tone_offsets_hz
    }

    pub fn amplitudes_v(&self) -> &[f64] {
        &self.amplitudes_v
    }

    pub fn phases_rad(&self) -> &[f64] {
        &self.phases_rad
    }
}

/// Baseband source envelope evaluated at a step index:
/// `ṽ_s[n] = Σ_m A_m·exp(j(2π·Δf_m·n·dt + φ_m))`.
///
/// Every tone must stay in band: `|2π·Δf| ≤ ω_m = π/dt`.
pub fn multisine_envelope(
    spec: &MultisineSpec,
    dt_s: f64,
) -> Result<impl Fn(usize) -> Complex64 + Send + Sync + 'static> {
    if !(dt_s > 0.0 && dt_s.is_finite()) {
        return Err(Error::validation(format!(
            "time step {dt_s} must be positive"
        )));
    }
    let omega_m = std::f64::consts::PI / dt_s;
    for &offset in spec.tone_offsets_hz() {
        let tone_rad = std::f64::consts::TAU * offset;
        if tone_rad.abs() > omega_m * (1.0 + 1e-12) {
            return Err(Error::validation(format!(
                "tone offset {offset} Hz is out of band: |2π·Δf| = {:.6e} rad/s exceeds ω_m = \
                 {omega_m:.6e} rad/s",
                tone_rad.abs()
            )));
        }
    }
    let offsets = spec.tone_offsets_hz.clone();
    let amplitudes = spec.amplitudes_v.clone();
    let phases = spec.phases_rad.clone();
    Ok(move |n: usize| {
        let t = n as f64 * dt_s;
        offsets
            .iter()
            .zip(&amplitudes)
            .zip(&phases)
            .map(|((&df, &a), &phi)| {
                Complex64::from_polar(a, std::f64::consts::TAU * df * t + phi)
            })
            .sum()
    })
}

/// Thevenin termination: source resistance plus a baseband envelope.
pub struct TheveninSource {
    r_s_ohm: f64,
    envelope: Box<dyn Fn(usize) -> Complex64 + Send + Sync>,
}

impl TheveninSource {
    pub fn new(
        r_s_ohm: f64,
        envelope: impl Fn(usize) -> Complex64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(r_s_ohm > 0.0 && r_s_ohm.is_finite()) {
            return Err(Error::validation(format!(
                "source resistance {r_s_ohm} must be positive"
            )));
        }
        Ok(TheveninSource {
            r_s_ohm,
            envelope: Box::new(envelope),
        })
    }

    /// Constant-envelope source.
    pub fn constant(r_s_ohm: f64, level_v: Complex64) -> Result<Self> {
        TheveninSource::new(r_s_ohm, move |_| level_v)
    }

    /// Multisine source sampled at the simulation step.
    pub fn multisine(r_s_ohm: f64, spec: &MultisineSpec, dt_s: f64) -> Result<Self> {
        let env = multisine_envelope(spec, dt_s)?;
        TheveninSource::new(r_s_ohm, env)
    }

    /// Quiet termination (zero envelope).
    pub fn termination(r_s_ohm: f64) -> Result<Self> {
        TheveninSource::constant(r_s_ohm, Complex64::new(0.0, 0.0))
    }

    pub fn resistance_ohm(&self) -> f64 {
        self.r_s_ohm
    }

    pub fn envelope_at(&self, n: usize) -> Complex64 {
        (self.envelope)(n)
    }
}

impl std::fmt::Debug for TheveninSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TheveninSource")
            .field("r_s_ohm", &self.r_s_ohm)
            .finish_non_exhaustive()
    }
}

/// Solve one step for the unknown incident wave `ã[n]`.
///
/// `h` is the convolution history term, `vs_n` the source envelopes and
/// `r_s` the per-port source resistances. Errors if the system matrix
/// `diag(α) + diag(β)·s̃[0]` is singular.
pub fn solve_step(
    s0: &DMatrix<Complex64>,
    h: &DVector<Complex64>,
    vs_n: &DVector<Complex64>,
    r_s: &[f64],
    z0: f64,
) -> Result<DVector<Complex64>> {
    let ports = s0.nrows();
    if s0.ncols() != ports || h.len() != ports || vs_n.len() != ports || r_s.len() != ports {
        return Err(Error::validation(format!(
            "inconsistent dimensions: s0 is {}x{}, h has {}, vs has {}, r_s has {}",
            s0.nrows(),
            s0.ncols(),
            h.len(),
            vs_n.len(),
            r_s.len()
        )));
    }
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(Error::validation(format!(
            "reference impedance {z0} must be positive"
        )));
    }
    let root = z0.sqrt();
    // algebraically √z0 ± R/√z0; this form makes β vanish exactly for a
    // matched source, so the incident wave decouples from the model
    let alpha: Vec<f64> = r_s.iter().map(|r| (z0 + r) / root).collect();
    let beta: Vec<f64> = r_s.iter().map(|r| (z0 - r) / root).collect();

    let mut system = DMatrix::from_fn(ports, ports, |p, q| beta[p] * s0[(p, q)]);
    for p in 0..ports {
        system[(p, p)] += alpha[p];
    }
    let rhs = DVector::from_fn(ports, |p, _| vs_n[p] - beta[p] * h[p]);
    system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numerical("singular step matrix: pathological active s̃[0]"))
}

/// Recorded wave, voltage and current envelopes of a transient run.
///
/// `v = √z0·(a+b)` and `i = (a−b)/√z0` hold by construction at every
/// sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    dt_s: f64,
    a: Vec<DVector<Complex64>>,
    b: Vec<DVector<Complex64>>,
    v: Vec<DVector<Complex64>>,
    i: Vec<DVector<Complex64>>,
}

impl SimResult {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn port_count(&self) -> usize {
        self.a[0].len()
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    pub fn time_s(&self, n: usize) -> f64 {
        n as f64 * self.dt_s
    }

    pub fn incident(&self) -> &[DVector<Complex64>] {
        &self.a
    }

    pub fn scattered(&self) -> &[DVector<Complex64>] {
        &self.b
    }

    pub fn voltage(&self) -> &[DVector<Complex64>] {
        &self.v
    }

    pub fn current(&self) -> &[DVector<Complex64>] {
        &self.i
    }
}

/// Run the transient loop: history term, per-step solve, advance.
///
/// One Thevenin source per port; the step is the response's `dt_s` and
/// the start is quiescent.
pub fn run(
    ir: &Arc<ImpulseResponse>,
    sources: &[TheveninSource],
    n_steps: usize,
) -> Result<SimResult> {
    let ports = ir.port_count();
    if sources.len() != ports {
        return Err(Error::validation(format!(
            "{} sources supplied for a {ports}-port response",
            sources.len()
        )));
    }
    if n_steps == 0 {
        return Err(Error::validation("n_steps must be at least 1"));
    }
    let z0 = ir.z_ref_ohm();
    let root = z0.sqrt();
    let r_s: Vec<f64> = sources.iter().map(|s| s.resistance_ohm()).collect();
    let s0 = ir.tap(0).clone();

    let mut conv = ConvolverState::new(Arc::clone(ir));
    let mut result = SimResult {
        dt_s: ir.dt_s(),
        a: Vec::with_capacity(n_steps),
        b: Vec::with_capacity(n_steps),
        v: Vec::with_capacity(n_steps),
        i: Vec::with_capacity(n_steps),
    };

    for n in 0..n_steps {
        let vs = DVector::from_fn(ports, |p, _| sources[p].envelope_at(n));
        let h = conv.history_term();
        let a = solve_step(&s0, &h, &vs, &r_s, z0)?;
        let b = conv.advance(&a)?;
        let v = DVector::from_fn(ports, |p, _| root * (a[p] + b[p]));
        let i = DVector::from_fn(ports, |p, _| (a[p] - b[p]) / root);

        #[cfg(debug_assertions)]
        for p in 0..ports {
            let residual = (vs[p] - Complex64::new(r_s[p], 0.0) * i[p] - v[p]).norm();
            debug_assert!(
                residual < 1e-12 * (vs[p].norm() + 1.0),
                "Thevenin residual {residual:.3e} at step {n}, port {p}"
            );
        }

        result.a.push(a);
        result.b.push(b);
        result.v.push(v);
        result.i.push(i);
    }
    Ok(result)
}

/// Serialize a run to CSV: `n,t_s` then `re_a,im_a,re_b,im_b,re_v,im_v,
/// re_i,im_i` column groups suffixed by the 1-based port index.
pub fn write_sim_csv(result: &SimResult) -> String {
    let ports = result.port_count();
    let mut out = String::from("n,t_s");
    for p in 1..=ports {
        for name in ["a", "b", "v", "i"] {
            let _ = write!(out, ",re_{name}{p},im_{name}{p}");
        }
    }
    out.push('\n');
    for n in 0..result.len() {
        let _ = write!(out, "{n},{}", result.time_s(n));
        for p in 0..ports {
            for series in [&result.a, &result.b, &result.v, &result.i] {
                let c = series[n][p];
                let _ = write!(out, ",{},{}", c.re, c.im);
            }
        }
        out.push('\n');
    }
    out
}

/// Parse CSV produced by [`write_sim_csv`].
pub fn read_sim_csv(text: &str) -> Result<SimResult> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(0, e.to_string()))?
        .clone();
    if headers.len() < 10 || &headers[0] != "n" || &headers[1] != "t_s" {
        return Err(Error::validation(
            "waveform header must start with `n,t_s` followed by per-port wave columns",
        ));
    }
    if (headers.len() - 2) % 8 != 0 {
        return Err(Error::validation(format!(
            "waveform columns do not form per-port a/b/v/i groups ({} value columns)",
            headers.len() - 2
        )));
    }
    let ports = (headers.len() - 2) / 8;

    let mut times = Vec::new();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut v = Vec::new();
    let mut i = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(csv_line(&e), e.to_string()))?;
        let line_no = row_idx + 2;
        if record.len() != headers.len() {
            return Err(Error::parse(
                line_no,
                format!(
                    "ragged row: expected {} fields, found {}",
                    headers.len(),
                    record.len()
                ),
            ));
        }
        let field = |idx: usize| -> Result<f64> {
            record[idx]
                .parse::<f64>()
                .map_err(|_| Error::parse(line_no, format!("invalid number `{}`", &record[idx])))
        };
        let n = field(0)? as usize;
        if n != row_idx {
            return Err(Error::parse(
                line_no,
                format!("step indices must be consecutive from 0, found {n}"),
            ));
        }
        times.push(field(1)?);
        let mut row = [vec![], vec![], vec![], vec![]];
        for p in 0..ports {
            for (which, slot) in row.iter_mut().enumerate() {
                let base = 2 + 8 * p + 2 * which;
                slot.push(Complex64::new(field(base)?, field(base + 1)?));
            }
        }
        let [ra, rb, rv, ri] = row;
        a.push(DVector::from_vec(ra));
        b.push(DVector::from_vec(rb));
        v.push(DVector::from_vec(rv));
        i.push(DVector::from_vec(ri));
    }
    if a.len() < 2 {
        return Err(Error::validation(
            "waveform file needs at least two samples",
        ));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation(format!(
            "non-increasing time axis: dt = {dt}"
        )));
    }
    Ok(SimResult { dt_s: dt, a, b, v, i })
}

fn csv_line(err: &csv::Error) -> usize {
    err.position().map_or(0, |p| p.line() as usize)
}
