mod common;

use std::f64::consts::PI;

use qdot_core::charge::{self, ChargeModelParams};
use qdot_core::correlator::{self, ReferencePeaks};
use qdot_core::fitting;
use qdot_core::montecarlo::{
    blink_histogram, emit_photons, simulate_trajectory, time_trace_combined, ChargeState, PulseTrain,
};
use qdot_core::stream;

#[test]
fn same_seed_same_clicks() {
    let a = common::blinking_detection(0.85, 20e-6, 0.01, 1e6, 7).0;
    let b = common::blinking_detection(0.85, 20e-6, 0.01, 1e6, 7).0;
    let c = common::blinking_detection(0.85, 20e-6, 0.01, 1e6, 8).0;
    assert_eq!(a, b);
    assert_ne!(a.channels[0], c.channels[0]);
}

#[test]
fn photons_follow_the_charge_state() {
    let params = ChargeModelParams::from_occupation(0.7, 50e-6).unwrap();
    let traj = simulate_trajectory(&params, 0.05, 3).unwrap();
    let pulses = PulseTrain::new(common::REP_RATE, PI, 0.05).unwrap();
    let photons = emit_photons(&traj, &pulses, 3).unwrap();
    for &t in photons.timestamps() {
        assert_eq!(traj.state_at(t as f64 * 1e-12), Some(ChargeState::Hole));
    }
    let expected = traj.time_in(ChargeState::Hole) * common::REP_RATE;
    assert!((photons.len() as f64 - expected).abs() < 0.01 * expected);
}

#[test]
fn pulsed_peaks_trace_the_bunching_envelope() {
    // peak areas normalised by the long-delay level sample 1 + A·exp(−|kT_R|/τ)
    let (p_h, t_hole) = (0.6, 2e-6);
    let (det, _) = common::blinking_detection(p_h, t_hole, 0.5, 1.5e6, 9);
    let period = common::period_ps();
    let hist = correlator::coincidences(&det.channels[0], &det.channels[1], 1000, 6_000_000).unwrap();
    let peaks = correlator::peak_areas(&hist, period, period / 2.0).unwrap();
    let params = ChargeModelParams::from_occupation(p_h, t_hole).unwrap();
    let tau = charge::steady_state(&params).unwrap().tau_eff;
    let reference = ReferencePeaks::for_blinking(tau, 1.0 / common::REP_RATE);
    let envelope = fitting::envelope_from_peaks(&peaks, 1.0 / common::REP_RATE, reference).unwrap();
    for ((t, g), e) in envelope.delays.iter().zip(&envelope.values).zip(&envelope.stderr) {
        if *t == 0.0 {
            continue;
        }
        let model = charge::g2_envelope(&params, t.abs()).unwrap();
        assert!((g - model).abs() < 5.0 * e + 0.01, "{t}: {g} vs {model}");
    }
}

#[test]
fn blink_statistics_match_the_telegraph_process() {
    let bin = 4e-6;
    let (det, _) = common::blinking_detection(0.4, 300e-6, 2.0, 0.4 * 10.0 / bin / 2.0, 12);
    let trace = time_trace_combined(&det.channels, bin).unwrap();
    let a = blink_histogram(&trace).unwrap();
    assert!((a.occupancy_estimate - 0.4).abs() < 0.05, "{}", a.occupancy_estimate);
    assert!((a.bright_mean - 10.0).abs() < 0.5, "{}", a.bright_mean);
    assert_eq!(a.histogram.iter().sum::<u64>(), trace.len() as u64);
}

#[test]
fn detection_survives_a_qdts_file() {
    let (det, _) = common::blinking_detection(0.85, 20e-6, 0.01, 1e6, 13);
    let file = tempfile::NamedTempFile::new().unwrap();
    stream::write_qdts(
        std::fs::File::create(file.path()).unwrap(),
        &[&det.channels[0], &det.channels[1]],
    )
    .unwrap();
    let back = stream::read_qdts(
        std::fs::File::open(file.path()).unwrap(),
        Some(det.channels[0].duration_ps()),
    )
    .unwrap();
    assert_eq!(back, det.channels.to_vec());
}
