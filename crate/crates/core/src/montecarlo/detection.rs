use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric, Normal};

use super::emission::for_each_hole_pulse;
use super::trajectory::ChargeTrajectory;
use super::{stage_rng, DetectionConfig, PulseTrain, Stage};
use crate::error::{Error, Result};
use crate::stream::TimestampStream;

/// Output of the two-detector HBT arm.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub channels: [TimestampStream; 2],
    /// Registered clicks that came from source photons, per channel.
    pub signal_counts: [u64; 2],
    /// Registered clicks from dark counts and laser leakage, per channel.
    pub background_counts: [u64; 2],
}

impl Detection {
    /// Fraction of registered clicks originating from the source.
    pub fn source_fraction(&self) -> f64 {
        let s: u64 = self.signal_counts.iter().sum();
        let b: u64 = self.background_counts.iter().sum();
        if s + b == 0 {
            0.0
        } else {
            s as f64 / (s + b) as f64
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Origin {
    Source,
    Background,
}

/// Adds background, jitter and dead time to the source clicks of each channel
/// and assembles sorted streams.
fn finish<R: Rng>(
    mut clicks: [Vec<(u64, Origin)>; 2],
    cfg: &DetectionConfig,
    pulses: &PulseTrain,
    rng: &mut R,
) -> Result<Detection> {
    let duration_ps = pulses.duration_ps();
    let n_pulses = pulses.pulse_count();
    for channel in clicks.iter_mut() {
        if cfg.dark_rate > 0.0 {
            let gap = Exp::new(cfg.dark_rate).expect("positive rate");
            let mut t = gap.sample(rng);
            while t < pulses.duration {
                channel.push(((t * crate::PS_PER_S) as u64, Origin::Background));
                t += gap.sample(rng);
            }
        }
        if cfg.leakage_prob > 0.0 {
            let mut k = 0u64;
            let skip = (cfg.leakage_prob < 1.0).then(|| Geometric::new(cfg.leakage_prob).expect("p in (0, 1)"));
            loop {
                if let Some(g) = &skip {
                    k = k.saturating_add(g.sample(rng));
                }
                if k >= n_pulses {
                    break;
                }
                channel.push((pulses.pulse_time_ps(k), Origin::Background));
                k += 1;
            }
        }
        if cfg.jitter > 0.0 {
            let normal = Normal::new(0.0, cfg.jitter * crate::PS_PER_S).expect("finite sigma");
            for (t, _) in channel.iter_mut() {
                let shifted = *t as f64 + normal.sample(rng);
                *t = shifted.round().clamp(0.0, duration_ps as f64) as u64;
            }
        }
        // coincident clicks on one detector register once; source wins ties
        channel.sort_unstable();
        channel.dedup_by_key(|c| c.0);
        if cfg.dead_time > 0.0 {
            let dead = (cfg.dead_time * crate::PS_PER_S).round() as u64;
            let mut last: Option<u64> = None;
            channel.retain(|&(t, _)| {
                let keep = last.is_none_or(|l| t >= l + dead);
                if keep {
                    last = Some(t);
                }
                keep
            });
        }
    }
    let count = |c: &[(u64, Origin)], o: Origin| c.iter().filter(|x| x.1 == o).count() as u64;
    let signal_counts = [count(&clicks[0], Origin::Source), count(&clicks[1], Origin::Source)];
    let background_counts = [
        count(&clicks[0], Origin::Background),
        count(&clicks[1], Origin::Background),
    ];
    let [c0, c1] = clicks.map(|c| c.into_iter().map(|x| x.0).collect::<Vec<_>>());
    Ok(Detection {
        channels: [
            TimestampStream::new(0, duration_ps, c0)?,
            TimestampStream::new(1, duration_ps, c1)?,
        ],
        signal_counts,
        background_counts,
    })
}

fn validate_inputs(cfg: &DetectionConfig, pulses: &PulseTrain) -> Result<()> {
    cfg.validate()?;
    pulses.validate()
}

/// Lossy detection of an emitted photon stream behind a beam splitter.
///
/// Each photon survives with probability `efficiency` and goes to channel 0
/// with probability `splitter_ratio`. Dark counts (Poisson, per channel) and
/// pulse-synchronous laser leakage are then added.
pub fn detect(photons: &TimestampStream, cfg: &DetectionConfig, pulses: &PulseTrain, seed: u64) -> Result<Detection> {
    validate_inputs(cfg, pulses)?;
    if photons.duration_ps() > pulses.duration_ps() {
        return Err(Error::Domain("photon stream longer than the pulse train".into()));
    }
    let mut rng = stage_rng(seed, Stage::Detection);
    let mut clicks: [Vec<(u64, Origin)>; 2] = [Vec::new(), Vec::new()];
    for &t in photons.timestamps() {
        if rng.random::<f64>() < cfg.efficiency {
            let ch = usize::from(rng.random::<f64>() >= cfg.splitter_ratio);
            clicks[ch].push((t, Origin::Source));
        }
    }
    finish(clicks, cfg, pulses, &mut rng)
}

/// Emission and detection in one pass.
///
/// Statistically identical to [`super::emit_photons`] followed by
/// [`detect`]: every pulse in a hole interval is detected with probability
/// `sin²(area/2)·efficiency` and then routed by the splitter. The photon
/// stream is never materialized, which keeps long acquisitions at 82 MHz
/// within memory.
pub fn simulate_detection(
    traj: &ChargeTrajectory,
    pulses: &PulseTrain,
    cfg: &DetectionConfig,
    seed: u64,
) -> Result<Detection> {
    validate_inputs(cfg, pulses)?;
    if pulses.duration > traj.duration() * (1.0 + 1e-12) {
        return Err(Error::Domain("pulse train longer than trajectory".into()));
    }
    let mut rng = stage_rng(seed, Stage::FusedDetection);
    let mut clicks: [Vec<(u64, Origin)>; 2] = [Vec::new(), Vec::new()];
    let p = pulses.excitation_probability() * cfg.efficiency;
    for_each_hole_pulse(traj, pulses, p, &mut rng, |k, rng| {
        let ch = usize::from(rng.random::<f64>() >= cfg.splitter_ratio);
        clicks[ch].push((pulses.pulse_time_ps(k), Origin::Source));
    });
    finish(clicks, cfg, pulses, &mut rng)
}
