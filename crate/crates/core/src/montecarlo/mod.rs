//! Stochastic simulation of the charge telegraph process and of the pulsed
//! photon stream it gates.
//!
//! Every random draw comes from a ChaCha8 generator seeded by the caller, with
//! one independent stream per simulation stage, so identical seeds give
//! bit-identical outputs on every platform.

mod blink;
mod detection;
mod emission;
mod trajectory;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use blink::{blink_histogram, time_trace, time_trace_combined, BlinkAnalysis};
pub use detection::{detect, simulate_detection, Detection};
pub use emission::emit_photons;
pub use trajectory::{simulate_trajectory, stationary_distribution, ChargeState, ChargeTrajectory, Interval};

/// Resonant excitation pulses; each pulse is treated as instantaneous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseTrain {
    #[serde(rename = "rep_rate_hz")]
    pub rep_rate: f64,
    /// Rabi rotation angle of each pulse, radians in `[0, π]`.
    #[serde(rename = "pulse_area_rad")]
    pub pulse_area: f64,
    #[serde(rename = "duration_s")]
    pub duration: f64,
}

impl PulseTrain {
    pub fn new(rep_rate: f64, pulse_area: f64, duration: f64) -> Result<Self> {
        let p = Self {
            rep_rate,
            pulse_area,
            duration,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate > 0.0) || !self.rep_rate.is_finite() {
            return Err(Error::param("rep_rate", format!("must be > 0, got {}", self.rep_rate)));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.pulse_area) {
            return Err(Error::param(
                "pulse_area",
                format!("must be in [0, π], got {}", self.pulse_area),
            ));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::param("duration", format!("must be > 0, got {}", self.duration)));
        }
        Ok(())
    }

    pub fn period_ps(&self) -> f64 {
        crate::PS_PER_S / self.rep_rate
    }

    /// Number of pulses `k` with `k / rep_rate < duration`.
    pub fn pulse_count(&self) -> u64 {
        let n = (self.duration * self.rep_rate).ceil() as u64;
        if n > 0 && (n - 1) as f64 / self.rep_rate >= self.duration {
            n - 1
        } else {
            n
        }
    }

    pub fn pulse_time_ps(&self, k: u64) -> u64 {
        (k as f64 * self.period_ps()).round() as u64
    }

    pub fn duration_ps(&self) -> u64 {
        (self.duration * crate::PS_PER_S).round() as u64
    }

    /// Trion population after one pulse, `sin²(area/2)`.
    pub fn excitation_probability(&self) -> f64 {
        (self.pulse_area / 2.0).sin().powi(2)
    }

    /// First pulse index at or after time `t` (seconds).
    fn first_pulse_at_or_after(&self, t: f64) -> u64 {
        (t * self.rep_rate).ceil().max(0.0) as u64
    }
}

/// Detector-side imperfections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    /// Probability that an emitted photon is detected (collection, setup
    /// transmission and detector efficiency lumped together).
    pub efficiency: f64,
    /// Dark count rate per channel, 1/s.
    #[serde(rename = "dark_rate_hz", default)]
    pub dark_rate: f64,
    /// Probability of a laser-leakage count per pulse per channel.
    #[serde(default)]
    pub leakage_prob: f64,
    /// Probability that a photon is routed to channel 0.
    #[serde(default = "default_splitter")]
    pub splitter_ratio: f64,
    /// Gaussian timing jitter standard deviation, s.
    #[serde(rename = "jitter_s", default)]
    pub jitter: f64,
    /// Non-paralyzable dead time per channel, s.
    #[serde(rename = "dead_time_s", default)]
    pub dead_time: f64,
}

fn default_splitter() -> f64 {
    0.5
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate: 0.0,
            leakage_prob: 0.0,
            splitter_ratio: 0.5,
            jitter: 0.0,
            dead_time: 0.0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("efficiency", self.efficiency),
            ("leakage_prob", self.leakage_prob),
            ("splitter_ratio", self.splitter_ratio),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("probability must be in [0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("dark_rate", self.dark_rate),
            ("jitter", self.jitter),
            ("dead_time", self.dead_time),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Simulation stages, each drawing from its own generator stream.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stage {
    Trajectory = 1,
    Emission = 2,
    Detection = 3,
    FusedDetection = 4,
}

fn stage_rng(seed: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    rng
}
