//! Analytic reference for cascaded lossless transmission-line one-ports:
//! synthetic S-parameter generation and exact multisine steady states.
//!
//! The input reflection walks from the load toward the port entirely in
//! reflection-coefficient space. Re-referencing Γ between two positive
//! finite impedances,
//! `Γ' = ((z−z') + Γ(z+z'))/((z+z') + Γ(z−z'))`,
//! has a denominator bounded away from zero whenever |Γ| ≤ 1, so the
//! recursion never forms an intermediate impedance and cannot produce
//! NaN, even for short or open loads.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::touchstone::NetworkData;
use crate::transient::MultisineSpec;

/// One lossless line section, delay-parameterized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSection {
    pub z0_ohm: f64,
    pub delay_s: f64,
}

/// Load at the far end of the cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Real resistance in ohms; 0 is a short. Large-but-finite values
    /// (e.g. 1e9) approximate an open while keeping conversions finite.
    Resistor(f64),
    /// Exact open circuit (Γ = 1 at the load).
    Open,
}

/// Cascade of lossless lines from the reference port to the load.
///
/// `sections[0]` touches the port; the load terminates the final
/// section.
#[derive(Debug, Clone, PartialEq)]
pub struct LineCascade {
    sections: Vec<LineSection>,
    load: Termination,
    z_ref_ohm: f64,
}

impl LineCascade {
    pub fn new(sections: Vec<LineSection>, load: Termination, z_ref_ohm: f64) -> Result<Self> {
        if sections.is_empty() {
            return Err(Error::validation("cascade needs at least one section"));
        }
        for (idx, s) in sections.iter().enumerate() {
            if !(s.z0_ohm > 0.0 && s.z0_ohm.is_finite()) {
                return Err(Error::validation(format!(
                    "section {idx} impedance {} must be positive",
                    s.z0_ohm
                )));
            }
            if !(s.delay_s > 0.0 && s.delay_s.is_finite()) {
                return Err(Error::validation(format!(
                    "section {idx} delay {} must be positive",
                    s.delay_s
                )));
            }
        }
        if let Termination::Resistor(r) = load {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::validation(format!(
                    "load resistance {r} must be non-negative and finite"
                )));
            }
        }
        if !(z_ref_ohm > 0.0 && z_ref_ohm.is_finite()) {
            return Err(Error::validation(format!(
                "reference impedance {z_ref_ohm} must be positive"
            )));
        }
        Ok(LineCascade {
            sections,
            load,
            z_ref_ohm,
        })
    }

    pub fn sections(&self) -> &[LineSection] {
        &self.sections
    }

    pub fn load(&self) -> Termination {
        self.load
    }

    pub fn z_ref_ohm(&self) -> f64 {
        self.z_ref_ohm
    }
}

/// Re-reference a reflection coefficient from impedance `z_from` to
/// `z_to` without forming the intermediate impedance.
fn re_reference(gamma: Complex64, z_from: f64, z_to: f64) -> Complex64 {
    let sum = z_from + z_to;
    let diff = z_from - z_to;
    (diff + gamma * sum) / (sum + gamma * diff)
}

/// Input reflection coefficient of the cascade at a real frequency,
/// referenced to the cascade's `z_ref`. Passive: |Γ| ≤ 1 + 1e−12.
pub fn input_reflection(net: &LineCascade, omega_rad: f64) -> Complex64 {
    let last_z0 = net.sections.last().unwrap().z0_ohm;
    let mut gamma = match net.load {
        Termination::Open => Complex64::new(1.0, 0.0),
        Termination::Resistor(r) => Complex64::new((r - last_z0) / (r + last_z0), 0.0),
    };
    for idx in (0..net.sections.len()).rev() {
        let section = net.sections[idx];
        // transform along the lossless line toward the port
        gamma *= Complex64::from_polar(1.0, -2.0 * omega_rad * section.delay_s);
        let z_to = if idx == 0 {
            net.z_ref_ohm
        } else {
            net.sections[idx - 1].z0_ohm
        };
        gamma = re_reference(gamma, section.z0_ohm, z_to);
    }
    gamma
}

/// Sample the cascade on an ascending frequency grid.
pub fn sample_network(net: &LineCascade, freqs_hz: &[f64]) -> Result<NetworkData> {
    let s = freqs_hz
        .iter()
        .map(|&f| DMatrix::from_element(1, 1, input_reflection(net, TAU * f)))
        .collect();
    NetworkData::new(freqs_hz.to_vec(), s, net.z_ref_ohm)
}

/// Exact LTI steady state of the cascade under a multisine Thevenin
/// drive: per-tone incident/scattered/current phasors plus the summed
/// current envelope.
#[derive(Debug, Clone)]
pub struct SteadyState {
    tone_offsets_rad: Vec<f64>,
    incident: Vec<Complex64>,
    scattered: Vec<Complex64>,
    current: Vec<Complex64>,
}

impl SteadyState {
    pub fn tone_count(&self) -> usize {
        self.tone_offsets_rad.len()
    }

    pub fn tone_offset_rad(&self, m: usize) -> f64 {
        self.tone_offsets_rad[m]
    }

    pub fn incident_phasor(&self, m: usize) -> Complex64 {
        self.incident[m]
    }

    pub fn scattered_phasor(&self, m: usize) -> Complex64 {
        self.scattered[m]
    }

    pub fn current_phasor(&self, m: usize) -> Complex64 {
        self.current[m]
    }

    /// `ĩ(t) = Σ_m i_m·e^{jΔω_m t}`.
    pub fn current_envelope(&self, t_s: f64) -> Complex64 {
        self.tone_offsets_rad
            .iter()
            .zip(&self.current)
            .map(|(&dw, &i)| i * Complex64::from_polar(1.0, dw * t_s))
            .sum()
    }
}

/// Per-tone steady-state solution, independent of any fitted model.
///
/// At each tone `ω = 2π·carrier + Δω`: `Γ = input_reflection(ω)`,
/// `Z_in = z_ref(1+Γ)/(1−Γ)`, `i = A·e^{jφ}/(R_s + Z_in)`. A tone that
/// sees an open input (Γ → 1) is an error.
pub fn steady_state_multisine(
    net: &LineCascade,
    spec: &MultisineSpec,
    carrier_hz: f64,
    r_s_ohm: f64,
) -> Result<SteadyState> {
    if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
        return Err(Error::validation(format!(
            "carrier {carrier_hz} Hz must be positive"
        )));
    }
    if !(r_s_ohm > 0.0 && r_s_ohm.is_finite()) {
        return Err(Error::validation(format!(
            "source resistance {r_s_ohm} must be positive"
        )));
    }
    let z_ref = net.z_ref_ohm;
    let root = z_ref.sqrt();
    let mut state = SteadyState {
        tone_offsets_rad: Vec::with_capacity(spec.tone_count()),
        incident: Vec::with_capacity(spec.tone_count()),
        scattered: Vec::with_capacity(spec.tone_count()),
        current: Vec::with_capacity(spec.tone_count()),
    };
    for m in 0..spec.tone_count() {
        let offset_hz = spec.tone_offsets_hz()[m];
        let omega = TAU * (carrier_hz + offset_hz);
        let gamma = input_reflection(net, omega);
        let one_minus = Complex64::new(1.0, 0.0) - gamma;
        if one_minus.norm() < 1e-9 {
            return Err(Error::numerical(format!(
                "open-circuit input at tone {m} (offset {offset_hz} Hz): Γ = {gamma}"
            )));
        }
        let z_in = z_ref * (Complex64::new(1.0, 0.0) + gamma) / one_minus;
        let source = Complex64::from_polar(spec.amplitudes_v()[m], spec.phases_rad()[m]);
        let i = source / (r_s_ohm + z_in);
        let v = z_in * i;
        let a = (v + z_ref * i) / (2.0 * root);
        let b = (v - z_ref * i) / (2.0 * root);
        state.tone_offsets_rad.push(TAU * offset_hz);
        state.incident.push(a);
        state.scattered.push(b);
        state.current.push(i);
    }
    Ok(state)
}
