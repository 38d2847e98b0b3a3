//! Background correction, exponential envelope fits and source brightness.

use serde::{Deserialize, Serialize};

use crate::charge::invert_fit;
use crate::correlator::{G2Curve, PeakSeries, ReferencePeaks};
use crate::error::{Error, Result};

fn check_pqd(p_qd: f64) -> Result<()> {
    if !(p_qd > 0.0 && p_qd <= 1.0) {
        return Err(Error::param("p_qd", format!("must be in (0, 1], got {p_qd}")));
    }
    Ok(())
}

/// Removes the uncorrelated background from a measured correlation,
/// `g = (g_exp − 2(1−p) + (1−p)²) / p²`, where `p` is the fraction of
/// detections coming from the dot.
pub fn correct_background(g2_exp: &G2Curve, p_qd: f64) -> Result<G2Curve> {
    check_pqd(p_qd)?;
    let q = 1.0 - p_qd;
    let p2 = p_qd * p_qd;
    G2Curve::new(
        g2_exp.delays.clone(),
        g2_exp.values.iter().map(|g| (g - 2.0 * q + q * q) / p2).collect(),
        g2_exp.stderr.iter().map(|e| e / p2).collect(),
    )
}

/// Inverse of [`correct_background`]: the correlation that `g2` would show
/// with a fraction `1 − p_qd` of uncorrelated detections mixed in.
pub fn mix_background(g2: &G2Curve, p_qd: f64) -> Result<G2Curve> {
    check_pqd(p_qd)?;
    let q = 1.0 - p_qd;
    let p2 = p_qd * p_qd;
    G2Curve::new(
        g2.delays.clone(),
        g2.values.iter().map(|g| p2 * g + 2.0 * q - q * q).collect(),
        g2.stderr.iter().map(|e| e * p2).collect(),
    )
}

pub fn estimate_pqd(signal_rate: f64, background_rate: f64) -> Result<f64> {
    if !(signal_rate >= 0.0) || !(background_rate >= 0.0) {
        return Err(Error::param("rate", "rates must be >= 0"));
    }
    let total = signal_rate + background_rate;
    if total == 0.0 || !total.is_finite() {
        return Err(Error::Degenerate(
            "no counts: signal and background rates are both zero".into(),
        ));
    }
    Ok(signal_rate / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    /// Points with `|delay|` below this (s) are left out of the fit.
    #[serde(rename = "exclude_within_s", default)]
    pub exclude_within: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_max_iterations() -> usize {
    100
}

fn default_tolerance() -> f64 {
    1e-8
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            exclude_within: 0.0,
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
        }
    }
}

impl FitOptions {
    /// Drops the antibunched zero-delay bin of a histogram rebinned to
    /// groups of pulses.
    pub fn excluding(exclude_within: f64) -> Self {
        Self {
            exclude_within,
            ..Self::default()
        }
    }
}

/// Result of fitting `A·exp(−|t|/τ) + 1`, with the charge-model parameters
/// it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub amplitude: f64,
    pub amplitude_err: f64,
    /// s
    pub tau_eff: f64,
    pub tau_eff_err: f64,
    pub p_h_mean: f64,
    pub p_h_mean_err: f64,
    /// s
    pub t_hole: f64,
    pub t_hole_err: f64,
    /// 1/s
    pub gamma: f64,
    pub gamma_err: f64,
    /// Covariance of `(amplitude, tau_eff)`.
    pub covariance: [[f64; 2]; 2],
    /// Unweighted RMS of `g2 − model`.
    pub residual_rms: f64,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    pub points: usize,
}

impl EnvelopeFit {
    pub fn model(&self, delay: f64) -> f64 {
        self.amplitude * (-delay.abs() / self.tau_eff).exp() + 1.0
    }
}

struct Point {
    t: f64,
    g: f64,
    w: f64,
}

/// Standard error of a single count, recovered from any Poisson point via
/// `stderr² / value`.
fn one_count_stderr(g2: &G2Curve) -> Option<f64> {
    let mut scales: Vec<f64> = g2
        .values
        .iter()
        .zip(&g2.stderr)
        .filter(|(v, e)| **v > 0.0 && **e > 0.0)
        .map(|(v, e)| e * e / v)
        .collect();
    if scales.is_empty() {
        return None;
    }
    scales.sort_by(f64::total_cmp);
    Some(scales[scales.len() / 2])
}

fn chi2(points: &[Point], a: f64, tau: f64) -> f64 {
    points
        .iter()
        .map(|p| p.w * (p.g - a * (-p.t / tau).exp() - 1.0).powi(2))
        .sum()
}

fn initial_guess(points: &[Point], sigma: &[f64]) -> Result<(f64, f64)> {
    let strong: Vec<(f64, f64)> = points
        .iter()
        .zip(sigma)
        .filter(|(p, s)| p.g - 1.0 > 3.0 * **s)
        .map(|(p, _)| (p.t, (p.g - 1.0).ln()))
        .collect();
    if strong.is_empty() {
        return Err(Error::Degenerate(
            "no point exceeds 1 by 3 standard errors: no bunching detectable".into(),
        ));
    }
    let n = strong.len() as f64;
    let tm = strong.iter().map(|s| s.0).sum::<f64>() / n;
    let ym = strong.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = strong.iter().map(|s| (s.0 - tm).powi(2)).sum();
    let sxy: f64 = strong.iter().map(|s| (s.0 - tm) * (s.1 - ym)).sum();
    if strong.len() < 2 || sxx == 0.0 || !(sxy < 0.0) {
        return Err(Error::Degenerate("bunched points show no decay".into()));
    }
    let slope = sxy / sxx;
    let tau0 = -1.0 / slope;

    let a0 = (points[0].g + points[1].g) / 2.0 - 1.0;
    let a0 = if a0 > 0.0 { a0 } else { (ym - slope * tm).exp() };
    Ok((a0, tau0))
}

fn solve2(m: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * m[1][1] - b[1] * m[0][1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}

fn normal_matrix(points: &[Point], a: f64, tau: f64) -> ([[f64; 2]; 2], [f64; 2]) {
    let mut m = [[0.0; 2]; 2];
    let mut b = [0.0; 2];
    for p in points {
        let e = (-p.t / tau).exp();
        let j = [e, a * p.t * e / (tau * tau)];
        let r = p.g - a * e - 1.0;
        for i in 0..2 {
            b[i] += p.w * j[i] * r;
            for k in 0..2 {
                m[i][k] += p.w * j[i] * j[k];
            }
        }
    }
    (m, b)
}

/// Weighted least-squares fit of `A·exp(−|t|/τ) + 1` to a correlation curve.
///
/// Both delay signs are used. Weights are inverse variances; zero-count
/// points get the variance of one count. If the curve carries no errors at
/// all the fit is unweighted and the covariance is scaled by the residual
/// variance.
pub fn fit_envelope(g2: &G2Curve, options: &FitOptions) -> Result<EnvelopeFit> {
    if !(options.exclude_within >= 0.0) {
        return Err(Error::param("exclude_within", "must be >= 0"));
    }
    let floor = one_count_stderr(g2);
    let mut idx: Vec<usize> = (0..g2.len())
        .filter(|&i| g2.delays[i].abs() >= options.exclude_within)
        .collect();
    if idx.len() < 8 {
        return Err(Error::Data(format!(
            "envelope fit needs at least 8 points, got {}",
            idx.len()
        )));
    }
    idx.sort_by(|&i, &j| g2.delays[i].abs().total_cmp(&g2.delays[j].abs()));
    let sigma: Vec<f64> = idx
        .iter()
        .map(|&i| match floor {
            Some(f) => g2.stderr[i].max(f),
            None => 0.0,
        })
        .collect();
    let weighted = floor.is_some();
    let points: Vec<Point> = idx
        .iter()
        .zip(&sigma)
        .map(|(&i, s)| Point {
            t: g2.delays[i].abs(),
            g: g2.values[i],
            w: if weighted { 1.0 / (s * s) } else { 1.0 },
        })
        .collect();

    let (mut a, mut tau) = initial_guess(&points, &sigma)?;
    let mut cost = chi2(&points, a, tau);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let (m, b) = normal_matrix(&points, a, tau);
        let Some(step) = solve2(m, b) else {
            return Err(Error::NonConvergence {
                iterations,
                reason: format!("singular normal matrix at A = {a}, tau = {tau}"),
            });
        };
        let mut lambda = 1.0;
        let (mut a_new, mut tau_new, mut cost_new);
        loop {
            a_new = a + lambda * step[0];
            tau_new = tau + lambda * step[1];
            cost_new = if a_new > 0.0 && tau_new > 0.0 {
                chi2(&points, a_new, tau_new)
            } else {
                f64::INFINITY
            };
            if cost_new <= cost || lambda < 1e-10 {
                break;
            }
            lambda /= 2.0;
        }
        if !cost_new.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                reason: format!("no admissible step from A = {a}, tau = {tau}"),
            });
        }
        let change = ((a_new - a) / a).abs().max(((tau_new - tau) / tau).abs());
        a = a_new;
        tau = tau_new;
        cost = cost_new;
        if change < options.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            reason: format!(
                "relative step still above {} (A = {a}, tau = {tau}, chi2 = {cost})",
                options.tolerance
            ),
        });
    }

    let dof = points.len() - 2;
    let (m, _) = normal_matrix(&points, a, tau);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = if weighted { 1.0 } else { cost / dof as f64 };
    let covariance = [
        [scale * m[1][1] / det, -scale * m[0][1] / det],
        [-scale * m[1][0] / det, scale * m[0][0] / det],
    ];
    let inv = invert_fit(a, tau)?;
    // linear propagation through p = 1/(1+A), T = τ(1+A)/A, γ = 1/((1+A)τ)
    let propagate = |da: f64, dt: f64| -> f64 {
        (da * da * covariance[0][0] + 2.0 * da * dt * covariance[0][1] + dt * dt * covariance[1][1])
            .max(0.0)
            .sqrt()
    };
    let residual_rms = (points
        .iter()
        .map(|p| (p.g - a * (-p.t / tau).exp() - 1.0).powi(2))
        .sum::<f64>()
        / points.len() as f64)
        .sqrt();
    Ok(EnvelopeFit {
        amplitude: a,
        amplitude_err: covariance[0][0].sqrt(),
        tau_eff: tau,
        tau_eff_err: covariance[1][1].sqrt(),
        p_h_mean: inv.p_h_mean,
        p_h_mean_err: propagate(-1.0 / (1.0 + a).powi(2), 0.0),
        t_hole: inv.t_hole,
        t_hole_err: propagate(-tau / (a * a), (1.0 + a) / a),
        gamma: inv.gamma,
        gamma_err: propagate(-1.0 / ((1.0 + a).powi(2) * tau), -1.0 / ((1.0 + a) * tau * tau)),
        covariance,
        residual_rms,
        chi2: cost,
        dof,
        iterations,
        points: points.len(),
    })
}

/// Per-peak alternative to rebinning: peak areas divided by the mean of the
/// reference peaks, one point per pulse delay `k·rep_period` (s).
pub fn envelope_from_peaks(peaks: &PeakSeries, rep_period: f64, reference: ReferencePeaks) -> Result<G2Curve> {
    let refs: Vec<f64> = peaks
        .peaks
        .iter()
        .filter(|p| p.index.unsigned_abs() > reference.k_min)
        .map(|p| p.area)
        .collect();
    if refs.len() < ReferencePeaks::MIN_PEAKS {
        return Err(Error::Degenerate(format!("only {} reference peaks", refs.len())));
    }
    let mean = refs.iter().sum::<f64>() / refs.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::Degenerate("reference peaks are empty".into()));
    }
    let mut sorted = peaks.peaks.clone();
    sorted.sort_by_key(|p| p.index);
    G2Curve::new(
        sorted.iter().map(|p| p.index as f64 * rep_period).collect(),
        sorted.iter().map(|p| p.area / mean).collect(),
        sorted.iter().map(|p| p.area_err / mean).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrightnessInput {
    /// Detected count rate, 1/s.
    #[serde(rename = "count_rate_hz")]
    pub count_rate: f64,
    #[serde(rename = "rep_rate_hz")]
    pub rep_rate: f64,
    pub setup_transmission: f64,
    pub detector_efficiency: f64,
}

impl BrightnessInput {
    pub fn validate(&self) -> Result<()> {
        if !(self.count_rate >= 0.0) || !self.count_rate.is_finite() {
            return Err(Error::param("count_rate", "must be finite and >= 0"));
        }
        if !(self.rep_rate > 0.0) || !self.rep_rate.is_finite() {
            return Err(Error::param("rep_rate", "must be > 0"));
        }
        for (name, v) in [
            ("setup_transmission", self.setup_transmission),
            ("detector_efficiency", self.detector_efficiency),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::param(name, format!("must be in (0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Photons per pulse at the first lens, `C / (f·T·η)`.
pub fn brightness(input: &BrightnessInput) -> Result<f64> {
    input.validate()?;
    let b = input.count_rate / (input.rep_rate * input.setup_transmission * input.detector_efficiency);
    if b > 1.0 {
        return Err(Error::Domain(format!(
            "brightness {b} exceeds one photon per pulse: inconsistent calibration"
        )));
    }
    Ok(b)
}

/// Brightness expected at a given pulse area, `s_π·sin²(θ/2)·<P_h>`.
pub fn brightness_slope_model(pulse_area: f64, s_pi: f64, p_h_mean: f64) -> f64 {
    s_pi * (pulse_area / 2.0).sin().powi(2) * p_h_mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn curve(values: Vec<f64>) -> G2Curve {
        let n = values.len();
        G2Curve::new((0..n).map(|i| i as f64).collect(), values, vec![0.01; n]).unwrap()
    }

    fn synthetic(a: f64, tau: f64, n: usize, span: f64) -> G2Curve {
        let delays: Vec<f64> = (0..n)
            .map(|i| -span + 2.0 * span * (i as f64 + 0.5) / n as f64)
            .collect();
        let values = delays.iter().map(|t| a * (-t.abs() / tau).exp() + 1.0).collect();
        G2Curve::new(delays, values, vec![0.0; n]).unwrap()
    }

    #[test]
    fn unit_pqd_is_identity() {
        let g = curve(vec![0.1, 1.3, 0.9]);
        assert_eq!(correct_background(&g, 1.0).unwrap(), g);
        assert!(correct_background(&g, 0.0).is_err());
        assert!(correct_background(&g, -0.5).is_err());
        assert!(correct_background(&g, 1.5).is_err());
    }

    #[test]
    fn flat_correlation_stays_flat() {
        let g = curve(vec![1.0; 5]);
        for p in [0.3, 0.8, 0.99] {
            let c = correct_background(&g, p).unwrap();
            assert!(c.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
            assert!(c.stderr.iter().all(|e| (e - 0.01 / (p * p)).abs() < 1e-15));
        }
    }

    #[test]
    fn mixing_inverts_correction() {
        let g = curve(vec![0.02, 1.5, 1.17, 0.98]);
        let back = mix_background(&correct_background(&g, 0.87).unwrap(), 0.87).unwrap();
        for (a, b) in g.values.iter().zip(&back.values) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn pqd_estimator() {
        assert_eq!(estimate_pqd(99.0, 1.0).unwrap(), 0.99);
        assert_eq!(estimate_pqd(0.0, 3.0).unwrap(), 0.0);
        assert!(estimate_pqd(0.0, 0.0).is_err());
        assert!(estimate_pqd(-1.0, 2.0).is_err());
    }

    #[test]
    fn noiseless_envelope_recovers_parameters() {
        let a = 1.0 / 0.85 - 1.0;
        let g = synthetic(a, 3e-6, 200, 30e-6);
        let fit = fit_envelope(&g, &FitOptions::default()).unwrap();
        assert!(((fit.p_h_mean - 0.85) / 0.85).abs() < 1e-6);
        assert!(((fit.tau_eff - 3e-6) / 3e-6).abs() < 1e-6);
        assert!(((fit.t_hole - 20e-6) / 20e-6).abs() < 1e-6);
        assert!(fit.residual_rms < 1e-9);
        assert!(fit.model(0.0) > 1.17);
    }

    #[test]
    fn exclusion_drops_central_points() {
        let g = synthetic(0.5, 1e-6, 40, 8e-6);
        let fit = fit_envelope(&g, &FitOptions::excluding(0.9e-6)).unwrap();
        assert_eq!(fit.points, 36);
        assert!(fit_envelope(&g, &FitOptions::excluding(7.5e-6)).is_err());
    }

    #[test]
    fn flat_curve_has_no_bunching() {
        let g = curve(vec![1.0; 20]);
        assert!(matches!(
            fit_envelope(&g, &FitOptions::default()),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            fit_envelope(&curve(vec![1.5; 5]), &FitOptions::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn zero_count_points_get_floor_weight() {
        // values are counts·scale, stderr √counts·scale with scale 0.01
        let mut g = synthetic(1.0, 2.0, 30, 10.0);
        g.stderr = g.values.iter().map(|v| (v / 0.01f64).sqrt() * 0.01).collect();
        g.values[0] = 0.0;
        g.stderr[0] = 0.0;
        assert!((one_count_stderr(&g).unwrap() - 0.01).abs() < 1e-12);
        fit_envelope(&g, &FitOptions::default()).unwrap();
    }

    #[test]
    fn brightness_arithmetic() {
        let input = |c: f64, t: f64, eta: f64| BrightnessInput {
            count_rate: c,
            rep_rate: 82e6,
            setup_transmission: t,
            detector_efficiency: eta,
        };
        assert_eq!(brightness(&input(82e6, 1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(brightness(&input(0.0, 0.5, 0.3)).unwrap(), 0.0);
        let b = brightness(&input(0.21 * 82e6 * 0.1 * 0.3, 0.1, 0.3)).unwrap();
        assert!((b - 0.21).abs() < 1e-12);
        assert!(brightness(&input(9e7, 1.0, 1.0)).is_err());
        assert!(brightness(&input(1e6, 0.0, 1.0)).is_err());
    }

    #[test]
    fn slope_model_values() {
        assert!((brightness_slope_model(PI, 0.262, 0.85) - 0.2227).abs() < 1e-4);
        assert_eq!(brightness_slope_model(PI, 0.3, 0.0), 0.0);
        assert!((brightness_slope_model(PI / 2.0, 0.262, 1.0) - 0.131).abs() < 1e-12);
    }
}
