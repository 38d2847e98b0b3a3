mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use qdot_core::correlator::{self, G2Curve, ReferencePeaks};
use qdot_core::fitting::{self, BrightnessInput, FitOptions};
use qdot_core::montecarlo::{simulate_detection, ChargeState, ChargeTrajectory, DetectionConfig, PulseTrain};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// Symmetric delay grid spanning ±`span` bunching times.
fn delays(tau: f64, n: usize, span: f64) -> Vec<f64> {
    (0..n)
        .map(|i| (i as f64 / (n - 1) as f64 * 2.0 - 1.0) * span * tau)
        .collect()
}

fn envelope(a: f64, tau: f64, t: f64) -> f64 {
    a * (-t.abs() / tau).exp() + 1.0
}

#[test]
fn noiseless_envelopes_are_recovered() {
    let mut r = common::rng(41);
    for draw in 0..100 {
        let p_h: f64 = r.random_range(0.3..0.97);
        let t_hole = 10f64.powf(r.random_range(-6.5..-3.5));
        let a = 1.0 / p_h - 1.0;
        let tau = t_hole * (1.0 - p_h);
        let t = delays(tau, 201, 8.0);
        let g: Vec<f64> = t.iter().map(|&t| envelope(a, tau, t)).collect();
        let curve = G2Curve::new(t.clone(), g, vec![0.0; t.len()]).unwrap();
        let fit = fitting::fit_envelope(&curve, &FitOptions::default()).unwrap();
        assert!(
            common::rel(fit.p_h_mean, p_h) < 1e-6,
            "draw {draw}: P {} vs {p_h}",
            fit.p_h_mean
        );
        assert!(
            common::rel(fit.t_hole, t_hole) < 1e-6,
            "draw {draw}: T {} vs {t_hole}",
            fit.t_hole
        );
        assert!(fit.residual_rms < 1e-9);
    }
}

#[test]
fn reported_errors_match_scatter() {
    let (a, tau) = (0.25, 3e-6);
    let t = delays(tau, 161, 8.0);
    let scale = 4000.0;
    let mut r = common::rng(42);
    let mut pulls = Vec::new();
    for _ in 0..200 {
        let (mut g, mut e) = (Vec::new(), Vec::new());
        for &ti in &t {
            let n = Poisson::new(scale * envelope(a, tau, ti)).unwrap().sample(&mut r);
            g.push(n / scale);
            e.push(n.sqrt() / scale);
        }
        let fit = fitting::fit_envelope(&G2Curve::new(t.clone(), g, e).unwrap(), &FitOptions::default()).unwrap();
        pulls.push((
            (fit.tau_eff - tau) / fit.tau_eff_err,
            (fit.amplitude - a) / fit.amplitude_err,
        ));
        assert!(fit.dof > 0 && fit.chi2 / (fit.dof as f64) < 1.5);
    }
    for (name, xs) in [
        ("tau", pulls.iter().map(|p| p.0).collect::<Vec<_>>()),
        ("A", pulls.iter().map(|p| p.1).collect()),
    ] {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let inside = xs.iter().filter(|x| x.abs() <= 1.0).count() as f64 / n;
        assert!(mean.abs() < 0.25, "{name} pull mean {mean}");
        assert!((0.8..1.25).contains(&sd), "{name} pull sd {sd}");
        assert!((0.58..0.78).contains(&inside), "{name} 1σ coverage {inside}");
    }
}

#[test]
fn leakage_fraction_is_read_off_the_zero_delay_peak() {
    let duration = 0.1;
    let efficiency = 0.1;
    // 5% of clicks from the laser
    let leakage = 0.05 * (efficiency / 2.0) / 0.95;
    let traj = ChargeTrajectory::constant(ChargeState::Hole, duration).unwrap();
    let pulses = PulseTrain::new(common::REP_RATE, PI, duration).unwrap();
    let cfg = DetectionConfig {
        efficiency,
        leakage_prob: leakage,
        ..Default::default()
    };
    let det = simulate_detection(&traj, &pulses, &cfg, 43).unwrap();
    let hist = correlator::coincidences(&det.channels[0], &det.channels[1], 100, 400_000).unwrap();
    let period = common::period_ps();
    let peaks = correlator::peak_areas(&hist, period, period / 2.0).unwrap();
    let raw = correlator::g2_zero(&peaks, ReferencePeaks::hbt_default()).unwrap();
    // a perfect emitter with background shows g²(0) = 1 − p²
    let p_qd = (1.0 - raw.value).sqrt();
    assert!((p_qd - 0.95).abs() < 0.01, "p_qd {p_qd} from g2(0) {}", raw.value);
    assert!((det.source_fraction() - 0.95).abs() < 0.01);
}

fn unit_curve(values: Vec<f64>) -> G2Curve {
    let n = values.len();
    G2Curve::new((0..n).map(|i| i as f64).collect(), values, vec![0.01; n]).unwrap()
}

proptest! {
    #[test]
    fn correction_inverts_mixing(values in prop::collection::vec(0.0f64..3.0, 1..50), p in 0.05f64..=1.0) {
        let clean = unit_curve(values);
        let back = fitting::correct_background(&fitting::mix_background(&clean, p).unwrap(), p).unwrap();
        for (a, b) in back.values.iter().zip(&clean.values) {
            prop_assert!((a - b).abs() < 1e-12 / (p * p));
        }
    }

    #[test]
    fn brightness_scales_exactly(
        f in 1e7f64..1e9,
        t in 0.01f64..1.0,
        eta in 0.1f64..1.0,
        frac in 1e-4f64..0.2,
        k in 0i32..3,
    ) {
        let input = BrightnessInput { count_rate: frac * f * t * eta, rep_rate: f, setup_transmission: t, detector_efficiency: eta };
        let b = fitting::brightness(&input).unwrap();
        prop_assert!(common::rel(b, frac) < 1e-14);
        let s = 2f64.powi(k);
        let scaled = fitting::brightness(&BrightnessInput { count_rate: input.count_rate * s, ..input }).unwrap();
        prop_assert_eq!(scaled, b * s);
        let dimmer = fitting::brightness(&BrightnessInput { setup_transmission: t / s, ..input }).unwrap();
        prop_assert_eq!(dimmer, input.count_rate / (f * (t / s) * eta));
    }

    #[test]
    fn slope_model_peaks_at_pi(theta in 0.0f64..PI, s in 0.0f64..1.0, p in 0.0f64..=1.0) {
        let b = fitting::brightness_slope_model(theta, s, p);
        prop_assert!(b >= 0.0 && b <= fitting::brightness_slope_model(PI, s, p) + 1e-15);
        prop_assert!((fitting::brightness_slope_model(theta, s, 1.0) * p - b).abs() < 1e-15);
    }
}

#[test]
fn inconsistent_brightness_is_rejected() {
    let input = BrightnessInput {
        count_rate: 1e8,
        rep_rate: 8.2e7,
        setup_transmission: 1.0,
        detector_efficiency: 1.0,
    };
    assert!(fitting::brightness(&input).is_err());
    assert!(fitting::brightness(&BrightnessInput {
        setup_transmission: 0.0,
        ..input
    })
    .is_err());
}

#[test]
fn pipeline_bias_is_small_at_the_qd1_anchor() {
    let run = common::pipeline(0.85, 20e-6, 1.0, 44);
    assert!(
        (run.fit.p_h_mean - 0.85).abs() < 3.0 * run.fit.p_h_mean_err + 2e-3,
        "{}",
        run.fit.p_h_mean
    );
    assert!((run.fit.t_hole - 20e-6).abs() < 0.1 * 20e-6);
    assert!(run.p_qd > 0.99);
}
