//! Two-state charge occupation model of an optically pumped quantum dot.
//!
//! The dot is either empty (`0`) or holds a single hole (`h`). The
//! quasi-resonant pump transfers `0 → h` at rate `gamma`, and the hole
//! tunnels out after a mean time `t_hole`:
//!
//! ```text
//! dP_h/dt =  gamma·P_0 − P_h / t_hole
//! dP_0/dt = −gamma·P_0 + P_h / t_hole
//! ```
//!
//! Everything here is closed form. The optional two-hole extension is only
//! understood by the Monte Carlo simulator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rates of the optional `h ↔ hh` extension of the charge model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoHoleRates {
    /// Pump rate `h → hh`, 1/s.
    #[serde(rename = "gamma2_hz")]
    pub gamma2: f64,
    /// Relaxation time `hh → h`, s.
    #[serde(rename = "t_hole2_s")]
    pub t_hole2: f64,
}

impl Default for TwoHoleRates {
    fn default() -> Self {
        // Disabled: no pumping into the two-hole state.
        Self {
            gamma2: 0.0,
            t_hole2: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeModelParams {
    /// Pump rate `0 → h`, 1/s.
    #[serde(rename = "gamma_hz")]
    pub gamma: f64,
    /// Hole trapping time (mean time before the hole tunnels out), s.
    #[serde(rename = "t_hole_s")]
    pub t_hole: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_hole: Option<TwoHoleRates>,
}

/// Steady-state occupation and relaxation time of the two-state model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupationDynamics {
    /// Average hole occupation probability `<P_h>`.
    pub p_h_mean: f64,
    /// Effective relaxation time `(gamma + 1/t_hole)^-1`, s.
    pub tau_eff: f64,
}

/// Parameters recovered from a fitted bunching envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertedFit {
    pub p_h_mean: f64,
    pub t_hole: f64,
    pub gamma: f64,
}

impl ChargeModelParams {
    pub fn new(gamma: f64, t_hole: f64) -> Result<Self> {
        let params = Self {
            gamma,
            t_hole,
            two_hole: None,
        };
        params.validate()?;
        Ok(params)
    }

    /// Builds the parameters that produce a given steady state.
    pub fn from_occupation(p_h_mean: f64, t_hole: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p_h_mean) {
            return Err(Error::param("p_h_mean", format!("{p_h_mean} not in [0, 1)")));
        }
        // <P_h> = gamma·t_hole / (1 + gamma·t_hole)
        Self::new(p_h_mean / ((1.0 - p_h_mean) * t_hole), t_hole)
    }

    pub fn with_two_hole(mut self, rates: TwoHoleRates) -> Result<Self> {
        self.two_hole = Some(rates);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::param(
                "gamma",
                format!("must be finite and >= 0, got {}", self.gamma),
            ));
        }
        if !(self.t_hole > 0.0) || !self.t_hole.is_finite() {
            return Err(Error::param(
                "t_hole",
                format!("must be finite and > 0, got {}", self.t_hole),
            ));
        }
        if let Some(th) = self.two_hole {
            if !(th.gamma2 >= 0.0) || !th.gamma2.is_finite() {
                return Err(Error::param(
                    "gamma2",
                    format!("must be finite and >= 0, got {}", th.gamma2),
                ));
            }
            if !(th.t_hole2 > 0.0) || !th.t_hole2.is_finite() {
                return Err(Error::param(
                    "t_hole2",
                    format!("must be finite and > 0, got {}", th.t_hole2),
                ));
            }
        }
        Ok(())
    }

    /// Bunching amplitude `1/<P_h> − 1`, evaluated as `1/(gamma·t_hole)` to
    /// avoid cancellation when `<P_h>` is close to one.
    pub fn bunching_amplitude(&self) -> f64 {
        1.0 / (self.gamma * self.t_hole)
    }

    fn require_two_state(&self) -> Result<()> {
        self.validate()?;
        if self.two_hole.is_some_and(|th| th.gamma2 > 0.0) {
            return Err(Error::Domain(
                "closed-form dynamics cover the two-state model only; simulate the two-hole extension".into(),
            ));
        }
        Ok(())
    }

    fn require_pumped(&self) -> Result<()> {
        self.require_two_state()?;
        if self.gamma <= 0.0 {
            return Err(Error::Domain(
                "gamma = 0: the source is never charged and emits no photons, g2 is undefined".into(),
            ));
        }
        Ok(())
    }
}

pub fn steady_state(params: &ChargeModelParams) -> Result<OccupationDynamics> {
    params.require_two_state()?;
    let total_rate = params.gamma + 1.0 / params.t_hole;
    Ok(OccupationDynamics {
        p_h_mean: params.gamma / total_rate,
        tau_eff: 1.0 / total_rate,
    })
}

/// Hole occupation at time `t` starting from `p_h_initial`.
pub fn occupation_at(params: &ChargeModelParams, p_h_initial: f64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_h_initial) {
        return Err(Error::Domain(format!("initial occupation {p_h_initial} not in [0, 1]")));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    let ss = steady_state(params)?;
    if t == 0.0 {
        return Ok(p_h_initial);
    }
    Ok((p_h_initial - ss.p_h_mean) * (-t / ss.tau_eff).exp() + ss.p_h_mean)
}

/// Bunching envelope of g²(t): `(1/<P_h> − 1)·exp(−t/tau_eff) + 1`.
pub fn g2_envelope(params: &ChargeModelParams, t: f64) -> Result<f64> {
    params.require_pumped()?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("delay must be >= 0, got {t}")));
    }
    let tau_eff = steady_state(params)?.tau_eff;
    Ok(params.bunching_amplitude() * (-t / tau_eff).exp() + 1.0)
}

/// Slope of the envelope at zero delay, 1/s.
pub fn g2_envelope_slope_at_zero(params: &ChargeModelParams) -> Result<f64> {
    params.require_pumped()?;
    let tau_eff = steady_state(params)?.tau_eff;
    Ok(-params.bunching_amplitude() / tau_eff)
}

/// Delay at which the tangent to the envelope at zero delay crosses g² = 0.
///
/// Analytically this is exactly `t_hole`, independent of `gamma`.
pub fn tangent_x_intercept(params: &ChargeModelParams) -> Result<f64> {
    let g0 = g2_envelope(params, 0.0)?;
    let slope = g2_envelope_slope_at_zero(params)?;
    Ok(-g0 / slope)
}

/// Recovers `<P_h>`, `t_hole` and `gamma` from the fitted amplitude
/// `A = g²(0) − 1` and decay time of the envelope.
pub fn invert_fit(amplitude: f64, tau_eff: f64) -> Result<InvertedFit> {
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::Domain(format!("amplitude must be > 0, got {amplitude}")));
    }
    if !(tau_eff > 0.0) || !tau_eff.is_finite() {
        return Err(Error::Domain(format!("tau_eff must be > 0, got {tau_eff}")));
    }
    let one_plus = 1.0 + amplitude;
    Ok(InvertedFit {
        p_h_mean: 1.0 / one_plus,
        // tau/(1 − p) with 1 − p = A/(1 + A)
        t_hole: tau_eff * one_plus / amplitude,
        gamma: 1.0 / (one_plus * tau_eff),
    })
}
