//! Streaming evaluation of the discrete-time complex convolution
//! `b̃[n] = s̃[0]·ã[n] + Σ_{k=1..min(n,N)} s̃[k]·ã[n−k]`.
//!
//! The sum over past inputs is available through [`ConvolverState::history_term`]
//! before the current input is known, which is what lets a solver
//! eliminate the unknown `ã[n]` at each step. The response is finite,
//! so a ring buffer of exactly N past inputs suffices; the start is
//! quiescent (zero initial conditions).

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier_fit::ImpulseResponse;

/// Per-port streaming convolver over a shared immutable response.
#[derive(Debug, Clone)]
pub struct ConvolverState {
    ir: Arc<ImpulseResponse>,
    /// Most recent input first: `history[k-1]` holds `ã[n−k]`.
    history: VecDeque<DVector<Complex64>>,
    step_index: usize,
}

impl ConvolverState {
    pub fn new(ir: Arc<ImpulseResponse>) -> Self {
        let capacity = ir.order();
        ConvolverState {
            ir,
            history: VecDeque::with_capacity(capacity),
            step_index: 0,
        }
    }

    pub fn impulse_response(&self) -> &ImpulseResponse {
        &self.ir
    }

    /// Number of completed [`advance`](Self::advance) calls.
    pub fn step_index(&self) -> usize {
        self.step_index
    }

    /// `H[n] = Σ_{k=1..min(n,N)} s̃[k]·ã[n−k]`: everything in the
    /// convolution except the `s̃[0]·ã[n]` term. Depends only on past
    /// inputs; calling twice without advancing returns the same value.
    pub fn history_term(&self) -> DVector<Complex64> {
        let mut acc = DVector::zeros(self.ir.port_count());
        for (k, past) in self.history.iter().enumerate() {
            acc += self.ir.tap(k + 1) * past;
        }
        acc
    }

    /// Complete step n: return `b̃[n] = s̃[0]·ã[n] + H[n]`, push `ã[n]`
    /// into the history and increment the step index.
    pub fn advance(&mut self, a_n: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let ports = self.ir.port_count();
        if a_n.len() != ports {
            return Err(Error::validation(format!(
                "incident wave vector has {} entries, expected {ports}",
                a_n.len()
            )));
        }
        if a_n.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite incident wave sample at step {}",
                self.step_index
            )));
        }
        let b = self.ir.tap(0) * a_n + self.history_term();
        if self.ir.order() > 0 {
            self.history.push_front(a_n.clone());
            self.history.truncate(self.ir.order());
        }
        self.step_index += 1;
        Ok(b)
    }
}

/// Shortest tap prefix retaining at least `energy_keep` of the total
/// `Σ‖s̃[k]‖²_F`; `energy_keep = 1` returns the input unchanged.
pub fn truncate(ir: &ImpulseResponse, energy_keep: f64) -> Result<ImpulseResponse> {
    if !(energy_keep > 0.0 && energy_keep <= 1.0) {
        return Err(Error::validation(format!(
            "energy_keep {energy_keep} must lie in (0, 1]"
        )));
    }
    let energies: Vec<f64> = ir.taps().iter().map(|t| t.norm_squared()).collect();
    let total: f64 = energies.iter().sum();
    if total == 0.0 {
        return Err(Error::validation("cannot truncate an all-zero response"));
    }
    if energy_keep == 1.0 {
        return Ok(ir.clone());
    }
    let threshold = energy_keep * total;
    let mut cum = 0.0;
    let mut keep_len = energies.len();
    for (k, e) in energies.iter().enumerate() {
        cum += e;
        if cum >= threshold {
            keep_len = k + 1;
            break;
        }
    }
    ImpulseResponse::new(
        ir.taps()[..keep_len].to_vec(),
        ir.carrier_hz(),
        ir.half_bandwidth_rad(),
        ir.z_ref_ohm(),
    )
}
