//! Downshift of passband network data to an equivalent-baseband
//! offset-frequency grid, and the inverse axis shift.
//!
//! The shift moves the frequency axis only: every S value is carried
//! over bit-for-bit. Baseband data generally has no conjugate symmetry.
//! The complex-envelope convention shared by all modules is
//! `x(t) = Re{x̃(t)·e^{+j2πf_c t}}`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::touchstone::NetworkData;

/// Baseband S-samples on an offset grid spanning `[-ω_m, +ω_m]`.
///
/// `ω_m` (the half-bandwidth) is taken from the data extent:
/// `max |offset|` over the grid. The original passband grid is kept so
/// [`to_passband`] restores it exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandData {
    freqs_hz: Vec<f64>,
    offsets_rad: Vec<f64>,
    s: Vec<DMatrix<Complex64>>,
    carrier_hz: f64,
    half_bandwidth_rad: f64,
    z_ref_ohm: f64,
}

impl BasebandData {
    pub fn len(&self) -> usize {
        self.offsets_rad.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn port_count(&self) -> usize {
        self.s[0].nrows()
    }

    /// Offsets from the carrier in rad/s, ascending.
    pub fn offsets_rad(&self) -> &[f64] {
        &self.offsets_rad
    }

    pub fn s_matrices(&self) -> &[DMatrix<Complex64>] {
        &self.s
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    /// Half-bandwidth `ω_m` in rad/s.
    pub fn half_bandwidth_rad(&self) -> f64 {
        self.half_bandwidth_rad
    }

    pub fn z_ref_ohm(&self) -> f64 {
        self.z_ref_ohm
    }
}

/// Downshift passband data around a carrier.
///
/// When `carrier_hz` is omitted the band center `(f_min + f_max)/2` is
/// used. The carrier must lie within the covered band and the grid
/// needs at least two points.
pub fn to_baseband(net: &NetworkData, carrier_hz: Option<f64>) -> Result<BasebandData> {
    if net.len() < 2 {
        return Err(Error::validation(format!(
            "baseband conversion needs at least 2 frequency points, got {}",
            net.len()
        )));
    }
    let carrier = carrier_hz.unwrap_or_else(|| 0.5 * (net.f_min_hz() + net.f_max_hz()));
    if !carrier.is_finite() || carrier < net.f_min_hz() || carrier > net.f_max_hz() {
        return Err(Error::validation(format!(
            "carrier {carrier} Hz lies outside the data band [{}, {}] Hz",
            net.f_min_hz(),
            net.f_max_hz()
        )));
    }
    let offsets_rad: Vec<f64> = net.freqs_hz().iter().map(|f| TAU * (f - carrier)).collect();
    let half_bandwidth_rad = offsets_rad.iter().fold(0.0f64, |m, o| m.max(o.abs()));
    // passband must stay strictly positive-frequency
    if TAU * carrier <= half_bandwidth_rad {
        return Err(Error::validation(format!(
            "carrier {carrier} Hz is too low for half-bandwidth {half_bandwidth_rad} rad/s \
             (passband would reach non-positive frequencies)"
        )));
    }
    Ok(BasebandData {
        freqs_hz: net.freqs_hz().to_vec(),
        offsets_rad,
        s: net.s_matrices().to_vec(),
        carrier_hz: carrier,
        half_bandwidth_rad,
        z_ref_ohm: net.z_ref_ohm(),
    })
}

/// Inverse axis shift; exact because the passband grid is retained.
pub fn to_passband(bb: &BasebandData) -> NetworkData {
    NetworkData::new(bb.freqs_hz.clone(), bb.s.clone(), bb.z_ref_ohm)
        .expect("BasebandData invariants guarantee a valid network")
}
