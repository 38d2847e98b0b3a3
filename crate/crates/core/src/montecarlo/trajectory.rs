use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{stage_rng, Stage};
use crate::charge::ChargeModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeState {
    Empty,
    Hole,
    TwoHole,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub state: ChargeState,
    /// Start time, s.
    pub start: f64,
    /// End time, s.
    pub end: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

/// Piecewise-constant charge history covering `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeTrajectory {
    intervals: Vec<Interval>,
}

impl ChargeTrajectory {
    /// Checks contiguity, coverage from zero and alternation of states.
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        let first = intervals
            .first()
            .ok_or_else(|| Error::Data("trajectory needs at least one interval".into()))?;
        if first.start != 0.0 {
            return Err(Error::Data("trajectory must start at t = 0".into()));
        }
        for iv in &intervals {
            if !(iv.end > iv.start) {
                return Err(Error::Data(format!("empty interval [{}, {}]", iv.start, iv.end)));
            }
        }
        for w in intervals.windows(2) {
            if w[0].end != w[1].start {
                return Err(Error::Data(format!("gap or overlap at t = {}", w[0].end)));
            }
            if w[0].state == w[1].state {
                return Err(Error::Data(format!(
                    "repeated state {:?} at t = {}",
                    w[0].state, w[0].end
                )));
            }
        }
        Ok(Self { intervals })
    }

    /// A trajectory frozen in one state.
    pub fn constant(state: ChargeState, duration: f64) -> Result<Self> {
        Self::new(vec![Interval {
            state,
            start: 0.0,
            end: duration,
        }])
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn duration(&self) -> f64 {
        self.intervals.last().map_or(0.0, |iv| iv.end)
    }

    pub fn state_at(&self, t: f64) -> Option<ChargeState> {
        if t < 0.0 || t > self.duration() {
            return None;
        }
        let idx = self.intervals.partition_point(|iv| iv.end <= t);
        self.intervals.get(idx.min(self.intervals.len() - 1)).map(|iv| iv.state)
    }

    pub fn time_in(&self, state: ChargeState) -> f64 {
        self.intervals
            .iter()
            .filter(|iv| iv.state == state)
            .map(Interval::len)
            .sum()
    }

    pub fn fraction_in(&self, state: ChargeState) -> f64 {
        self.time_in(state) / self.duration()
    }

    /// Complete sojourn times in `state`, skipping the first and last
    /// intervals which are truncated by the observation window.
    pub fn sojourns(&self, state: ChargeState) -> Vec<f64> {
        let n = self.intervals.len();
        if n < 3 {
            return Vec::new();
        }
        self.intervals[1..n - 1]
            .iter()
            .filter(|iv| iv.state == state)
            .map(Interval::len)
            .collect()
    }
}

/// Stationary probabilities of (empty, hole, two-hole).
///
/// The chain is birth-death, so detailed balance gives
/// `π_h / π_0 = gamma·t_hole` and `π_hh / π_h = gamma2·t_hole2`.
pub fn stationary_distribution(params: &ChargeModelParams) -> Result<[f64; 3]> {
    params.validate()?;
    let w_h = params.gamma * params.t_hole;
    let w_hh = params.two_hole.map_or(0.0, |th| w_h * th.gamma2 * th.t_hole2);
    let z = 1.0 + w_h + w_hh;
    Ok([1.0 / z, w_h / z, w_hh / z])
}

fn exit_rate(params: &ChargeModelParams, state: ChargeState) -> f64 {
    match state {
        ChargeState::Empty => params.gamma,
        ChargeState::Hole => 1.0 / params.t_hole + params.two_hole.map_or(0.0, |th| th.gamma2),
        ChargeState::TwoHole => params.two_hole.map_or(0.0, |th| 1.0 / th.t_hole2),
    }
}

/// Exact continuous-time Markov sampling of the charge state on
/// `[0, duration]`, starting from the stationary distribution.
pub fn simulate_trajectory(params: &ChargeModelParams, duration: f64, seed: u64) -> Result<ChargeTrajectory> {
    params.validate()?;
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::param("duration", format!("must be > 0, got {duration}")));
    }
    let mut rng = stage_rng(seed, Stage::Trajectory);
    let pi = stationary_distribution(params)?;
    let u: f64 = rng.random();
    let mut state = if u < pi[0] {
        ChargeState::Empty
    } else if u < pi[0] + pi[1] {
        ChargeState::Hole
    } else {
        ChargeState::TwoHole
    };

    let mut intervals: Vec<Interval> = Vec::new();
    let mut t = 0.0;
    while t < duration {
        let rate = exit_rate(params, state);
        let dwell = if rate > 0.0 {
            Exp::new(rate).expect("positive rate").sample(&mut rng)
        } else {
            f64::INFINITY
        };
        let end = (t + dwell).min(duration);
        match intervals.last_mut() {
            // a dwell shorter than one ulp of t leaves two same-state intervals adjacent
            Some(last) if last.state == state => last.end = end,
            _ if end > t => intervals.push(Interval { state, start: t, end }),
            _ => {}
        }
        t = end;
        state = match state {
            ChargeState::Empty | ChargeState::TwoHole => ChargeState::Hole,
            ChargeState::Hole => {
                let to_two = params.two_hole.map_or(0.0, |th| th.gamma2);
                if to_two > 0.0 && rng.random::<f64>() * rate < to_two {
                    ChargeState::TwoHole
                } else {
                    ChargeState::Empty
                }
            }
        };
    }
    ChargeTrajectory::new(intervals)
}
