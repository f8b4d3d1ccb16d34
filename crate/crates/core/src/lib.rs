//! Equivalent-baseband modeling of frequency-domain network data.
//!
//! The pipeline turns tabulated passband S-parameters into a model a
//! transient solver can use directly:
//!
//! 1. [`touchstone`] parses Touchstone v1 files (or a CSV interchange
//!    format) into validated [`touchstone::NetworkData`].
//! 2. [`baseband`] downshifts the data around a carrier onto an offset
//!    frequency grid spanning `[-ω_m, +ω_m]`.
//! 3. [`fourier_fit`] extracts the coefficients of a one-sided complex
//!    Fourier series by least squares; the coefficients double as the
//!    taps of a complex discrete-time impulse response with uniform
//!    step `π/ω_m`.
//! 4. [`convolution`] evaluates that response sample by sample, keeping
//!    the past-input history separate so the current input can be
//!    solved for before it is known.
//! 5. [`transient`] closes the loop: at each step the unknown incident
//!    wave is solved against a Thevenin termination, then the convolver
//!    advances.
//!
//! [`oracle`] generates synthetic S-parameters for cascaded
//! transmission-line networks and exact multisine steady states, used
//! as analytic references by the test suites and the `compare` command
//! of the CLI.

pub mod baseband;
pub mod convolution;
pub mod error;
pub mod fourier_fit;
pub mod oracle;
pub mod touchstone;
pub mod transient;

pub use error::{Error, Result};
