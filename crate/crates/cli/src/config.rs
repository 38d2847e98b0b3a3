//! Run configuration. Every physical quantity carries a unit suffix in its
//! key; unknown keys are rejected, which also rejects unsuffixed quantities.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use qdot_core::charge::{ChargeModelParams, TwoHoleRates};
use qdot_core::fitting::FitOptions;
use qdot_core::montecarlo::{DetectionConfig, PulseTrain};
use qdot_core::tmm::{CavityRecipe, MaterialTable};
use qdot_core::zeeman::ZeemanModelParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub charge: Option<ChargeSection>,
    pub pulses: Option<PulseTrain>,
    pub detection: Option<DetectionConfig>,
    pub trace: Option<TraceSection>,
    pub correlator: Option<CorrelatorSection>,
    pub fit: Option<FitSection>,
    pub tmm: Option<TmmSection>,
    pub zeeman: Option<ZeemanSection>,
}

/// Charge model given either by its pump rate or by its mean occupation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeSection {
    pub gamma_hz: Option<f64>,
    pub p_h_mean: Option<f64>,
    pub t_hole_s: f64,
    pub two_hole: Option<TwoHoleRates>,
}

impl ChargeSection {
    pub fn params(&self) -> Result<ChargeModelParams> {
        let base = match (self.gamma_hz, self.p_h_mean) {
            (Some(g), None) => ChargeModelParams::new(g, self.t_hole_s),
            (None, Some(p)) => ChargeModelParams::from_occupation(p, self.t_hole_s),
            _ => {
                return Err(CliError::Config(
                    "[charge] give exactly one of gamma_hz and p_h_mean".into(),
                ))
            }
        }
        .map_err(|e| CliError::in_section("charge", e))?;
        match self.two_hole {
            Some(th) => base
                .with_two_hole(th)
                .map_err(|e| CliError::in_section("charge.two_hole", e)),
            None => Ok(base),
        }
    }
}

/// Blinking time trace written alongside simulated streams.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    pub bin_s: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatorSection {
    pub bin_ps: Option<u64>,
    pub max_delay_ps: Option<u64>,
    pub rebin: Option<String>,
    pub rep_rate_hz: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub p_qd: Option<f64>,
    pub exclude_within_s: Option<f64>,
    pub max_iterations: Option<usize>,
    pub tolerance: Option<f64>,
}

impl FitSection {
    pub fn options(&self) -> FitOptions {
        let d = FitOptions::default();
        FitOptions {
            exclude_within: self.exclude_within_s.unwrap_or(d.exclude_within),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmmSection {
    pub stack: CavityRecipe,
    /// Overrides and additions to the default material table, `[re, im]`.
    #[serde(default)]
    pub materials: BTreeMap<String, Complex64>,
    pub scan_start_nm: Option<f64>,
    pub scan_stop_nm: Option<f64>,
    #[serde(default = "default_scan_points")]
    pub scan_points: usize,
    #[serde(default = "default_resolution")]
    pub field_resolution_nm: f64,
}

fn default_scan_points() -> usize {
    2001
}

fn default_resolution() -> f64 {
    0.5
}

impl TmmSection {
    pub fn material_table(&self) -> MaterialTable {
        let mut table = MaterialTable::default();
        for (name, n) in &self.materials {
            table.set(name.clone(), *n);
        }
        table
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeemanSection {
    #[serde(default)]
    pub model: ZeemanModelParams,
    #[serde(default = "default_fields")]
    pub b_fields_t: Vec<f64>,
    #[serde(default = "default_peak_counts")]
    pub peak_counts: f64,
    #[serde(default)]
    pub noise_level: f64,
    pub instrument_fwhm_ev: Option<f64>,
    #[serde(default = "default_half_span")]
    pub half_span_ev: f64,
    #[serde(default = "default_step")]
    pub step_ev: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance_ev: f64,
    #[serde(default = "default_prominence")]
    pub min_prominence: f64,
    #[serde(default)]
    pub smoothing_half_window: usize,
}

fn default_fields() -> Vec<f64> {
    vec![0.0, 4.0]
}
fn default_peak_counts() -> f64 {
    1000.0
}
fn default_half_span() -> f64 {
    300e-6
}
fn default_step() -> f64 {
    0.2e-6
}
fn default_tolerance() -> f64 {
    2e-6
}
fn default_prominence() -> f64 {
    50.0
}

impl Default for ZeemanSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ZeemanSection {
    pub fn validate(&self) -> Result<()> {
        self.model
            .validate()
            .map_err(|e| CliError::in_section("zeeman.model", e))?;
        let bad = |what: &str| Err(CliError::Config(format!("[zeeman] {what}")));
        if self.b_fields_t.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return bad("b_fields_t must be finite and >= 0");
        }
        if !(self.half_span_ev > 0.0) || !(self.step_ev > 0.0) || self.step_ev >= self.half_span_ev {
            return bad("need 0 < step_ev < half_span_ev");
        }
        if !(self.peak_counts >= 0.0) || !(self.noise_level >= 0.0) {
            return bad("peak_counts and noise_level must be >= 0");
        }
        if !(self.tolerance_ev > 0.0) || !(self.min_prominence > 0.0) {
            return bad("tolerance_ev and min_prominence must be > 0");
        }
        Ok(())
    }
}

/// Parsed configuration with the raw bytes it came from.
pub struct Loaded {
    pub config: RunConfig,
    pub bytes: Vec<u8>,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Config(format!("{}: not UTF-8", path.display())))?;
    let config = toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Loaded { config, bytes })
}

pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}
