//! Run configuration: one structured TOML file per run, unit-suffixed
//! key names throughout. Cross-field constraints of the underlying
//! modules are re-validated when the core types are built.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use bbsim_core::oracle::{LineCascade, LineSection, Termination};
use bbsim_core::transient::MultisineSpec;

use crate::AppError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: Option<NetworkConfig>,
    pub band: Option<BandConfig>,
    pub fit: Option<FitConfig>,
    pub multisine: Option<MultisineConfig>,
    pub source: Option<SourceConfig>,
    pub sim: Option<SimConfig>,
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub paths: PathsConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub z_ref_ohm: f64,
    pub load_ohm: Option<f64>,
    #[serde(default)]
    pub load_open: bool,
    pub sections: Vec<SectionConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub z0_ohm: f64,
    pub delay_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub points: usize,
    pub carrier_hz: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Target max abs error for automatic order selection.
    pub tol: Option<f64>,
    /// Fixed order; mutually exclusive with `tol`.
    pub order_n: Option<usize>,
    pub n_max: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultisineConfig {
    pub tone_offsets_hz: Vec<f64>,
    pub amplitudes_v: Vec<f64>,
    pub phases_rad: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Source resistance; a scalar applies to every port.
    pub r_s_ohm: ScalarOrVec,
    /// Port-1 drive: the configured multisine (default) or a single
    /// nonzero sample at n = 0 for impulse-response extraction.
    #[serde(default)]
    pub drive: DriveKind,
    /// Impulse height in volts when `drive = "impulse"`.
    pub impulse_amplitude_v: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveKind {
    #[default]
    Multisine,
    Impulse,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrVec {
    Scalar(f64),
    PerPort(Vec<f64>),
}

impl ScalarOrVec {
    pub fn per_port(&self, ports: usize) -> Result<Vec<f64>, AppError> {
        match self {
            ScalarOrVec::Scalar(value) => Ok(vec![*value; ports]),
            ScalarOrVec::PerPort(values) if values.len() == ports => Ok(values.clone()),
            ScalarOrVec::PerPort(values) => Err(AppError::config(format!(
                "source.r_s_ohm lists {} values for a {ports}-port response",
                values.len()
            ))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub threshold: f64,
    pub warmup_steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(default = "default_touchstone")]
    pub touchstone: PathBuf,
    #[serde(default = "default_taps")]
    pub taps: PathBuf,
    #[serde(default = "default_fit_report")]
    pub fit_report: PathBuf,
    #[serde(default = "default_fit_comparison")]
    pub fit_comparison: PathBuf,
    #[serde(default = "default_waveform")]
    pub waveform: PathBuf,
    #[serde(default = "default_compare_report")]
    pub compare_report: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            touchstone: default_touchstone(),
            taps: default_taps(),
            fit_report: default_fit_report(),
            fit_comparison: default_fit_comparison(),
            waveform: default_waveform(),
            compare_report: default_compare_report(),
        }
    }
}

fn default_touchstone() -> PathBuf {
    PathBuf::from("out/network.s1p")
}
fn default_taps() -> PathBuf {
    PathBuf::from("out/taps.csv")
}
fn default_fit_report() -> PathBuf {
    PathBuf::from("out/fit_report.json")
}
fn default_fit_comparison() -> PathBuf {
    PathBuf::from("out/fit_comparison.csv")
}
fn default_waveform() -> PathBuf {
    PathBuf::from("out/waveform.csv")
}
fn default_compare_report() -> PathBuf {
    PathBuf::from("out/compare_report.txt")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            AppError::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| AppError::config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn network(&self) -> Result<&NetworkConfig, AppError> {
        self.network
            .as_ref()
            .ok_or_else(|| AppError::config("config is missing the [network] section"))
    }

    pub fn band(&self) -> Result<&BandConfig, AppError> {
        self.band
            .as_ref()
            .ok_or_else(|| AppError::config("config is missing the [band] section"))
    }

    pub fn multisine(&self) -> Result<&MultisineConfig, AppError> {
        self.multisine
            .as_ref()
            .ok_or_else(|| AppError::config("config is missing the [multisine] section"))
    }

    pub fn source(&self) -> Result<&SourceConfig, AppError> {
        self.source
            .as_ref()
            .ok_or_else(|| AppError::config("config is missing the [source] section"))
    }

    pub fn sim(&self) -> Result<&SimConfig, AppError> {
        self.sim
            .as_ref()
            .ok_or_else(|| AppError::config("config is missing the [sim] section"))
    }

    pub fn compare(&self) -> Result<&CompareConfig, AppError> {
        self.compare
            .as_ref()
            .ok_or_else(|| AppError::config("config is missing the [compare] section"))
    }
}

impl NetworkConfig {
    pub fn build(&self) -> Result<LineCascade, AppError> {
        let sections = self
            .sections
            .iter()
            .map(|s| LineSection {
                z0_ohm: s.z0_ohm,
                delay_s: s.delay_s,
            })
            .collect();
        let load = match (self.load_open, self.load_ohm) {
            (true, None) => Termination::Open,
            (false, Some(r)) => Termination::Resistor(r),
            (true, Some(_)) => {
                return Err(AppError::config(
                    "network.load_ohm and network.load_open are mutually exclusive",
                ));
            }
            (false, None) => {
                return Err(AppError::config(
                    "network needs either load_ohm or load_open = true",
                ));
            }
        };
        LineCascade::new(sections, load, self.z_ref_ohm).map_err(AppError::config_from_core)
    }
}

impl BandConfig {
    /// Uniform grid including both endpoints.
    pub fn grid_hz(&self) -> Result<Vec<f64>, AppError> {
        if !(self.f_start_hz > 0.0 && self.f_start_hz.is_finite()) {
            return Err(AppError::config(format!(
                "band.f_start_hz {} must be positive",
                self.f_start_hz
            )));
        }
        if !self.f_stop_hz.is_finite() || self.f_stop_hz <= self.f_start_hz {
            return Err(AppError::config(format!(
                "band must ascend: f_stop_hz {} ≤ f_start_hz {}",
                self.f_stop_hz, self.f_start_hz
            )));
        }
        if self.points < 2 {
            return Err(AppError::config(format!(
                "band.points {} must be at least 2",
                self.points
            )));
        }
        let step = (self.f_stop_hz - self.f_start_hz) / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| self.f_start_hz + step * i as f64)
            .collect())
    }
}

impl MultisineConfig {
    pub fn build(&self) -> Result<MultisineSpec, AppError> {
        MultisineSpec::new(
            self.tone_offsets_hz.clone(),
            self.amplitudes_v.clone(),
            self.phases_rad.clone(),
        )
        .map_err(AppError::config_from_core)
    }
}

impl FitConfig {
    pub fn n_max(&self) -> usize {
        self.n_max.unwrap_or(64)
    }
}
