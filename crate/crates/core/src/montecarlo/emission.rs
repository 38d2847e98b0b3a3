use rand::Rng;
use rand_distr::{Distribution, Geometric};

use super::trajectory::{ChargeState, ChargeTrajectory};
use super::{stage_rng, PulseTrain, Stage};
use crate::error::{Error, Result};
use crate::stream::TimestampStream;

/// Calls `hit(k)` for every pulse index `k` inside hole intervals that
/// succeeds a Bernoulli trial of probability `p`. Successes are found by
/// geometric skipping, so the cost scales with the number of hits rather
/// than the number of pulses.
pub(super) fn for_each_hole_pulse<R: Rng>(
    traj: &ChargeTrajectory,
    pulses: &PulseTrain,
    p: f64,
    rng: &mut R,
    mut hit: impl FnMut(u64, &mut R),
) {
    if p <= 0.0 {
        return;
    }
    let n_pulses = pulses.pulse_count();
    let skip = (p < 1.0).then(|| Geometric::new(p).expect("p in (0, 1)"));
    for iv in traj.intervals().iter().filter(|iv| iv.state == ChargeState::Hole) {
        let first = pulses.first_pulse_at_or_after(iv.start);
        let end = pulses.first_pulse_at_or_after(iv.end).min(n_pulses);
        let mut k = first;
        while k < end {
            if let Some(g) = &skip {
                k = k.saturating_add(g.sample(rng));
                if k >= end {
                    break;
                }
            }
            hit(k, rng);
            k += 1;
        }
    }
}

/// Pulse-synchronous single-photon emission gated by the charge state.
///
/// A pulse arriving while the dot holds a hole produces exactly one photon
/// with probability `sin²(area/2)`; empty and two-hole states never emit.
/// Photon times equal the pulse times (radiative lifetime neglected).
pub fn emit_photons(traj: &ChargeTrajectory, pulses: &PulseTrain, seed: u64) -> Result<TimestampStream> {
    pulses.validate()?;
    if pulses.duration > traj.duration() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "pulse train ({} s) longer than trajectory ({} s)",
            pulses.duration,
            traj.duration()
        )));
    }
    let mut rng = stage_rng(seed, Stage::Emission);
    let mut times = Vec::new();
    for_each_hole_pulse(traj, pulses, pulses.excitation_probability(), &mut rng, |k, _| {
        times.push(pulses.pulse_time_ps(k));
    });
    TimestampStream::new(0, pulses.duration_ps(), times)
}
