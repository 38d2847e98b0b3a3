//! Reference implementations and simulation recipes shared by the
//! integration suites. The oracles here share no code path with the
//! library routines they check.

#![allow(dead_code)]

use std::f64::consts::PI;

use qdot_core::charge::ChargeModelParams;
use qdot_core::correlator::{self, DelayWindow, G2Curve};
use qdot_core::fitting::{self, EnvelopeFit, FitOptions};
use qdot_core::montecarlo::{simulate_detection, simulate_trajectory, Detection, DetectionConfig, PulseTrain};
use qdot_core::stream::TimestampStream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const REP_RATE: f64 = 82e6;

/// Classical RK4 on the two-population rate equations
/// `dP0/dt = −γP0 + Ph/T`, `dPh/dt = γP0 − Ph/T`.
/// Returns `Ph(t)` and the largest `|P0 + Ph − 1|` seen along the way.
pub fn rk4_occupation(gamma: f64, t_hole: f64, p_h0: f64, t: f64, steps: usize) -> (f64, f64) {
    let f = |p0: f64, ph: f64| {
        let flow = gamma * p0 - ph / t_hole;
        (-flow, flow)
    };
    let h = t / steps as f64;
    let (mut p0, mut ph) = (1.0 - p_h0, p_h0);
    let mut drift: f64 = 0.0;
    for _ in 0..steps {
        let k1 = f(p0, ph);
        let k2 = f(p0 + h / 2.0 * k1.0, ph + h / 2.0 * k1.1);
        let k3 = f(p0 + h / 2.0 * k2.0, ph + h / 2.0 * k2.1);
        let k4 = f(p0 + h * k3.0, ph + h * k3.1);
        p0 += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        ph += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        drift = drift.max((p0 + ph - 1.0).abs());
    }
    (ph, drift)
}

/// All-pairs coincidence histogram, O(n0·n1).
pub fn brute_force_counts(starts: &[u64], stops: &[u64], window: &DelayWindow) -> Vec<u64> {
    let mut counts = vec![0u64; window.bin_count()];
    for &a in starts {
        for &b in stops {
            let d = b as i64 - a as i64;
            if d >= window.min_delay && d < window.max_delay {
                counts[((d - window.min_delay) / window.bin_width as i64) as usize] += 1;
            }
        }
    }
    counts
}

/// One-sample Kolmogorov–Smirnov test against an exponential with the given
/// mean. Returns the statistic D and its asymptotic p-value.
pub fn ks_exponential(samples: &[f64], mean: f64) -> (f64, f64) {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let cdf = 1.0 - (-xi / mean).exp();
        d = d.max((i as f64 + 1.0) / n - cdf).max(cdf - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

/// Sorted Poisson arrival times (ps) at `rate` (1/s) over `duration` (s).
pub fn poisson_stream(channel: u8, rate: f64, duration: f64, rng: &mut ChaCha8Rng) -> TimestampStream {
    let duration_ps = (duration * 1e12) as u64;
    let mut t = 0.0;
    let mut ts = Vec::with_capacity((rate * duration * 1.1) as usize);
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / rate * 1e12;
        if t >= duration_ps as f64 {
            break;
        }
        ts.push(t as u64);
    }
    TimestampStream::from_unsorted(channel, duration_ps, ts).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn period_ps() -> f64 {
    1e12 / REP_RATE
}

/// Blinking source behind an HBT setup tuned to `rate_per_channel` clicks/s,
/// with a little dark count and laser leakage.
pub fn blinking_detection(
    p_h: f64,
    t_hole: f64,
    duration: f64,
    rate_per_channel: f64,
    seed: u64,
) -> (Detection, PulseTrain) {
    let params = ChargeModelParams::from_occupation(p_h, t_hole).unwrap();
    let traj = simulate_trajectory(&params, duration, seed).unwrap();
    let pulses = PulseTrain::new(REP_RATE, PI, duration).unwrap();
    let cfg = DetectionConfig {
        efficiency: 2.0 * rate_per_channel / (REP_RATE * p_h),
        dark_rate: 200.0,
        leakage_prob: 1e-4,
        ..Default::default()
    };
    (simulate_detection(&traj, &pulses, &cfg, seed).unwrap(), pulses)
}

/// Correlation window whose rebinned groups of ten periods cover at least
/// ten bunching times on each side.
pub fn envelope_window(tau_eff: f64) -> DelayWindow {
    let group_span = 10.0 / REP_RATE;
    let half_groups = ((10.0 * tau_eff / group_span).ceil() as usize).max(20);
    DelayWindow::pulse_aligned(period_ps(), 10, half_groups).unwrap()
}

/// Raw correlation of the two channels rebinned to ten repetition periods.
pub fn rebinned_g2(a: &TimestampStream, b: &TimestampStream, window: DelayWindow) -> G2Curve {
    let hist = correlator::coincidences_in(a, b, window).unwrap();
    correlator::normalize(&correlator::rebin(&hist, 10).unwrap()).unwrap()
}

pub struct PipelineRun {
    pub fit: EnvelopeFit,
    pub p_qd: f64,
    pub clicks_per_channel: f64,
}

/// Simulate, correlate, rebin to 10·T_R, correct the background and fit.
pub fn pipeline(p_h: f64, t_hole: f64, duration: f64, seed: u64) -> PipelineRun {
    let (det, _) = blinking_detection(p_h, t_hole, duration, 1.5e6, seed);
    let tau = t_hole * (1.0 - p_h);
    let g2 = rebinned_g2(&det.channels[0], &det.channels[1], envelope_window(tau));
    let signal: u64 = det.signal_counts.iter().sum();
    let background: u64 = det.background_counts.iter().sum();
    let p_qd = fitting::estimate_pqd(signal as f64, background as f64).unwrap();
    let corrected = fitting::correct_background(&g2, p_qd).unwrap();
    let fit = fitting::fit_envelope(&corrected, &FitOptions::excluding(1.0 / REP_RATE)).unwrap();
    PipelineRun {
        fit,
        p_qd,
        clicks_per_channel: (det.channels[0].len() + det.channels[1].len()) as f64 / 2.0 / duration,
    }
}
