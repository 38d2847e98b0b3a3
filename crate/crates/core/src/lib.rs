//! Simulation and analysis toolkit for charged quantum-dot micropillar
//! single-photon sources.
//!
//! The crate is split along the physical pipeline:
//!
//! * [`charge`]: closed-form two-state charge occupation model and the
//!   bunching envelope it predicts for the intensity autocorrelation.
//! * [`montecarlo`]: telegraph-process trajectories, pulsed emission,
//!   detector imperfections and blinking time traces.
//! * [`stream`]: the timestamp stream carrier and its binary/CSV formats.
//! * [`correlator`]: coincidence histograms, normalization, pulsed peak
//!   areas, HBT purity and HOM visibility.
//! * [`fitting`]: background correction, envelope fitting and brightness.
//! * [`tmm`]: transfer-matrix optics of the planar DBR cavity.
//! * [`zeeman`]: in-plane field line patterns, synthetic spectra, peak
//!   detection and charge-state classification.

pub mod charge;
pub mod correlator;
pub mod error;
pub mod fitting;
pub mod montecarlo;
pub mod stream;
pub mod tmm;
pub mod zeeman;

pub use error::{Error, Result};

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;
