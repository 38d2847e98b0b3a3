//! Polarized photoluminescence of neutral and charged excitons in an
//! in-plane magnetic field, and charge-state identification from the line
//! pattern.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bohr magneton, eV/T.
pub const MU_B: f64 = 57.883_818_060e-6;
/// Planck constant times speed of light, eV·nm.
pub const HC: f64 = 1_239.841_984;

pub fn wavelength_to_energy(nm: f64) -> f64 {
    HC / nm
}

pub fn energy_to_wavelength(ev: f64) -> f64 {
    HC / ev
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Exciton,
    Trion,
    X2plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeemanModelParams {
    /// Transition energy at zero field, eV.
    #[serde(rename = "e0_ev", default = "default_e0")]
    pub e0: f64,
    /// Exciton fine-structure splitting, eV.
    #[serde(rename = "fss_ev", default = "default_fss")]
    pub fss: f64,
    #[serde(default = "default_ge")]
    pub g_electron: f64,
    #[serde(default = "default_gh")]
    pub g_hole: f64,
    /// Diamagnetic coefficient, eV/T².
    #[serde(rename = "kappa_ev_per_t2", default = "default_kappa")]
    pub kappa: f64,
    /// Lorentzian FWHM, eV.
    #[serde(rename = "linewidth_ev", default = "default_linewidth")]
    pub linewidth: f64,
    #[serde(default = "default_species")]
    pub species: Species,
    /// Outer-to-inner intensity ratio of the X²⁺ quadruplet.
    #[serde(default = "default_x2plus_ratio")]
    pub x2plus_ratio: f64,
}

fn default_e0() -> f64 {
    HC / 925.1
}
fn default_fss() -> f64 {
    20e-6
}
fn default_ge() -> f64 {
    0.4
}
fn default_gh() -> f64 {
    0.25
}
fn default_kappa() -> f64 {
    5e-6
}
fn default_linewidth() -> f64 {
    1e-6
}
fn default_species() -> Species {
    Species::Trion
}
fn default_x2plus_ratio() -> f64 {
    2.0
}

impl Default for ZeemanModelParams {
    fn default() -> Self {
        Self {
            e0: default_e0(),
            fss: default_fss(),
            g_electron: default_ge(),
            g_hole: default_gh(),
            kappa: default_kappa(),
            linewidth: default_linewidth(),
            species: default_species(),
            x2plus_ratio: default_x2plus_ratio(),
        }
    }
}

impl ZeemanModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e0 > 0.0) {
            return Err(Error::param("e0", "must be > 0"));
        }
        if !(self.linewidth > 0.0) {
            return Err(Error::param("linewidth", "must be > 0"));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::param("kappa", "must be >= 0"));
        }
        if !(self.fss >= 0.0) {
            return Err(Error::param("fss", "must be >= 0"));
        }
        if !(self.x2plus_ratio > 0.0) {
            return Err(Error::param("x2plus_ratio", "must be > 0"));
        }
        if !self.g_electron.is_finite() || !self.g_hole.is_finite() {
            return Err(Error::param("g", "g-factors must be finite"));
        }
        Ok(())
    }

    /// Line centroid including the diamagnetic shift.
    pub fn center(&self, b_field: f64) -> f64 {
        self.e0 + self.kappa * b_field * b_field
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    /// eV
    pub energy: f64,
    pub relative_intensity: f64,
    pub polarization: Polarization,
}

/// Transition energies and polarizations in a Voigt-geometry field.
///
/// Exciton: an H/V doublet split by `√(fss² + (μ_B·B·(g_e + g_h))²)`.
/// Trion and X²⁺: four lines at `±(Δe ± Δh)/2`, the outer pair H and the
/// inner pair V; the X²⁺ inner lines are weaker by `x2plus_ratio`.
pub fn line_energies(params: &ZeemanModelParams, b_field: f64) -> Result<Vec<SpectralLine>> {
    params.validate()?;
    if !(b_field >= 0.0) || !b_field.is_finite() {
        return Err(Error::param("b_field", format!("must be >= 0, got {b_field}")));
    }
    let c = params.center(b_field);
    let line = |energy, relative_intensity, polarization| SpectralLine {
        energy,
        relative_intensity,
        polarization,
    };
    let lines = match params.species {
        Species::Exciton => {
            let zeeman = MU_B * b_field * (params.g_electron + params.g_hole);
            let split = params.fss.hypot(zeeman);
            vec![
                line(c - split / 2.0, 1.0, Polarization::H),
                line(c + split / 2.0, 1.0, Polarization::V),
            ]
        }
        Species::Trion | Species::X2plus => {
            let de = params.g_electron * MU_B * b_field;
            let dh = params.g_hole * MU_B * b_field;
            let outer = (de + dh).abs() / 2.0;
            let inner = (de - dh).abs() / 2.0;
            let inner_intensity = match params.species {
                Species::X2plus => 1.0 / params.x2plus_ratio,
                _ => 1.0,
            };
            vec![
                line(c - outer, 1.0, Polarization::H),
                line(c - inner, inner_intensity, Polarization::V),
                line(c + inner, inner_intensity, Polarization::V),
                line(c + outer, 1.0, Polarization::H),
            ]
        }
    };
    Ok(lines)
}

/// Polarization-resolved spectrum on a strictly increasing wavelength grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// nm
    pub wavelengths: Vec<f64>,
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

impl Spectrum {
    pub fn new(wavelengths: Vec<f64>, h: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != h.len() || wavelengths.len() != v.len() {
            return Err(Error::Data("spectrum columns differ in length".into()));
        }
        if wavelengths.is_empty() {
            return Err(Error::Data("empty spectrum".into()));
        }
        if !(wavelengths[0] > 0.0) || wavelengths.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Data(
                "wavelengths must be positive and strictly increasing".into(),
            ));
        }
        if h.iter().chain(&v).any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::Data("intensities must be finite and >= 0".into()));
        }
        Ok(Self { wavelengths, h, v })
    }

    pub fn channel(&self, p: Polarization) -> &[f64] {
        match p {
            Polarization::H => &self.h,
            Polarization::V => &self.v,
        }
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    /// Centered moving average over `2·half_window + 1` samples, shortened
    /// at the edges. Suppresses isolated noise maxima before peak search.
    pub fn smoothed(&self, half_window: usize) -> Self {
        let avg = |y: &[f64]| -> Vec<f64> {
            (0..y.len())
                .map(|i| {
                    let lo = i.saturating_sub(half_window);
                    let hi = (i + half_window).min(y.len() - 1);
                    y[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
                })
                .collect()
        };
        Self {
            wavelengths: self.wavelengths.clone(),
            h: avg(&self.h),
            v: avg(&self.v),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }
}

/// Wavelengths (increasing) for energies `center ± half_span` in steps of
/// `step`, all in eV.
pub fn energy_grid(center: f64, half_span: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && half_span > 0.0 && center > half_span) {
        return Err(Error::param("grid", "need 0 < step, 0 < half_span < center"));
    }
    let n = (2.0 * half_span / step).round() as usize;
    Ok((0..=n)
        .rev()
        .map(|i| energy_to_wavelength(center - half_span + i as f64 * step))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthOptions {
    /// Lorentzian FWHM, eV.
    #[serde(rename = "linewidth_ev")]
    pub linewidth: f64,
    /// Peak height of a line with unit relative intensity, counts.
    pub peak_counts: f64,
    /// Mean background per sample, counts. Zero gives a noiseless spectrum;
    /// otherwise every sample is Poisson distributed.
    pub noise_level: f64,
    /// Gaussian spectrometer response FWHM, eV.
    #[serde(rename = "instrument_fwhm_ev", default)]
    pub instrument_fwhm: Option<f64>,
    pub seed: u64,
}

/// Spectrometer resolution used when broadening is requested without a value, eV.
pub const DEFAULT_INSTRUMENT_FWHM: f64 = 25e-6;

impl SynthOptions {
    pub fn noiseless(linewidth: f64, peak_counts: f64) -> Self {
        Self {
            linewidth,
            peak_counts,
            noise_level: 0.0,
            instrument_fwhm: None,
            seed: 0,
        }
    }

    /// Peak height set to `snr·√noise_level`.
    pub fn with_snr(linewidth: f64, snr: f64, noise_level: f64, seed: u64) -> Self {
        Self {
            linewidth,
            peak_counts: snr * noise_level.sqrt(),
            noise_level,
            instrument_fwhm: None,
            seed,
        }
    }
}

/// Voigt profile by the Thompson–Cox–Hastings pseudo-Voigt approximation,
/// normalized to unit area.
fn pseudo_voigt(x: f64, lorentz_fwhm: f64, gauss_fwhm: f64) -> f64 {
    let (l, g) = (lorentz_fwhm, gauss_fwhm);
    let f = (g.powi(5)
        + 2.69269 * g.powi(4) * l
        + 2.42843 * g.powi(3) * l.powi(2)
        + 4.47163 * g.powi(2) * l.powi(3)
        + 0.07842 * g * l.powi(4)
        + l.powi(5))
    .powf(0.2);
    let r = l / f;
    let eta = 1.36603 * r - 0.47719 * r * r + 0.11116 * r.powi(3);
    let lor = (f / (2.0 * PI)) / (x * x + f * f / 4.0);
    let sigma = f / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let gau = (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
    eta * lor + (1.0 - eta) * gau
}

/// Renders lines as Lorentzians (optionally convolved with the instrument
/// response) on their polarization channels, plus Poisson noise.
pub fn synth_spectrum(lines: &[SpectralLine], wavelengths: &[f64], options: &SynthOptions) -> Result<Spectrum> {
    if !(options.linewidth > 0.0) {
        return Err(Error::param("linewidth", "must be > 0"));
    }
    if !(options.peak_counts >= 0.0) || !(options.noise_level >= 0.0) {
        return Err(Error::param("counts", "peak_counts and noise_level must be >= 0"));
    }
    if let Some(w) = options.instrument_fwhm {
        if !(w > 0.0) {
            return Err(Error::param("instrument_fwhm", "must be > 0"));
        }
    }
    let grid = Spectrum::new(
        wavelengths.to_vec(),
        vec![0.0; wavelengths.len()],
        vec![0.0; wavelengths.len()],
    )?;
    let (lo, hi) = (grid.wavelengths[0], grid.wavelengths[grid.len() - 1]);
    for l in lines {
        let w = energy_to_wavelength(l.energy);
        if !(lo..=hi).contains(&w) {
            return Err(Error::Domain(format!(
                "line at {w:.4} nm outside the grid {lo:.4}..{hi:.4} nm"
            )));
        }
        if !(l.relative_intensity >= 0.0) {
            return Err(Error::param("relative_intensity", "must be >= 0"));
        }
    }
    let gamma = options.linewidth;
    // unit-height Lorentzian, or the convolved profile with the same area
    let profile = |de: f64| match options.instrument_fwhm {
        None => 1.0 / (1.0 + (2.0 * de / gamma).powi(2)),
        Some(g) => pseudo_voigt(de, gamma, g) * PI * gamma / 2.0,
    };
    let mut h = vec![options.noise_level; grid.len()];
    let mut v = h.clone();
    for (i, &w) in grid.wavelengths.iter().enumerate() {
        let e = wavelength_to_energy(w);
        for l in lines {
            let y = options.peak_counts * l.relative_intensity * profile(e - l.energy);
            match l.polarization {
                Polarization::H => h[i] += y,
                Polarization::V => v[i] += y,
            }
        }
    }
    if options.noise_level > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        for x in h.iter_mut().chain(v.iter_mut()) {
            *x = Poisson::new(*x).expect("positive mean").sample(&mut rng);
        }
    }
    Spectrum::new(grid.wavelengths, h, v)
}

fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Height of `y[i]` above the higher of the two lowest points separating it
/// from taller samples on either side.
fn prominence(y: &[f64], i: usize) -> f64 {
    let mut left_min = y[i];
    for j in (0..i).rev() {
        if y[j] > y[i] {
            break;
        }
        left_min = left_min.min(y[j]);
    }
    let mut right_min = y[i];
    for &yj in &y[i + 1..] {
        if yj > y[i] {
            break;
        }
        right_min = right_min.min(yj);
    }
    y[i] - left_min.max(right_min)
}

/// Local maxima of each channel whose prominence reaches `min_prominence`.
///
/// Peak positions come from a parabola through the maximum and its two
/// neighbours; intensities are heights above the channel median. Lines are
/// returned in order of increasing energy.
pub fn detect_peaks(spectrum: &Spectrum, min_prominence: f64) -> Vec<SpectralLine> {
    let mut lines = Vec::new();
    for pol in [Polarization::H, Polarization::V] {
        let y = spectrum.channel(pol);
        let x = &spectrum.wavelengths;
        let base = median(y);
        for i in 1..y.len().saturating_sub(1) {
            // first sample of a plateau counts as the maximum
            if !(y[i] > y[i - 1] && y[i] >= y[i + 1]) || prominence(y, i) < min_prominence {
                continue;
            }
            let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
            let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
            let d0 = (y1 - y0) / (x1 - x0);
            let d1 = (y2 - y1) / (x2 - x1);
            let curv = (d1 - d0) / (x2 - x0);
            let (xp, yp) = if curv < 0.0 {
                let xp = ((x0 + x1) / 2.0 - d0 / (2.0 * curv)).clamp(x0, x2);
                (xp, y1 + d0 * (xp - x1) + curv * (xp - x0) * (xp - x1))
            } else {
                (x1, y1)
            };
            lines.push(SpectralLine {
                energy: wavelength_to_energy(xp),
                relative_intensity: (yp - base).max(0.0),
                polarization: pol,
            });
        }
    }
    lines.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    lines
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Exciton,
    Trion,
    X2plus,
    Unknown,
}

impl From<Species> for Verdict {
    fn from(s: Species) -> Self {
        match s {
            Species::Exciton => Verdict::Exciton,
            Species::Trion => Verdict::Trion,
            Species::X2plus => Verdict::X2plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineClassification {
    pub verdict: Verdict,
    /// Quality of the pattern match in `[0, 1]`; zero for `Unknown`.
    pub confidence: f64,
    pub matched: Vec<SpectralLine>,
    /// Distance of the inner-pair midpoint from the outer-pair midpoint, eV.
    pub symmetry_error: Option<f64>,
    /// Outer-to-inner intensity ratio of a quadruplet.
    pub asymmetry: Option<f64>,
}

/// Outer-to-inner intensity ratio separating X²⁺ from the trion.
pub const ASYMMETRY_THRESHOLD: f64 = 1.5;

fn unknown(peaks: &[SpectralLine]) -> LineClassification {
    LineClassification {
        verdict: Verdict::Unknown,
        confidence: 0.0,
        matched: peaks.to_vec(),
        symmetry_error: None,
        asymmetry: None,
    }
}

/// Identifies the emitter from one group of lines.
///
/// Two orthogonally polarized lines split by more than `tolerance` are an
/// exciton. Four lines polarized H, V, V, H in energy order whose inner and
/// outer pairs share a midpoint within `tolerance` are a trion, or X²⁺ when
/// the outer lines are at least 1.5× brighter than the inner ones.
pub fn classify(peaks: &[SpectralLine], tolerance: f64) -> LineClassification {
    let mut lines = peaks.to_vec();
    lines.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    match lines.len() {
        2 if lines[0].polarization != lines[1].polarization && lines[1].energy - lines[0].energy > tolerance => {
            LineClassification {
                verdict: Verdict::Exciton,
                confidence: 1.0,
                matched: lines,
                symmetry_error: None,
                asymmetry: None,
            }
        }
        4 => {
            use Polarization::{H, V};
            let expected = [H, V, V, H];
            let agreement = lines.iter().zip(expected).filter(|(l, p)| l.polarization == *p).count() as f64 / 4.0;
            let err = ((lines[0].energy + lines[3].energy) - (lines[1].energy + lines[2].energy)).abs() / 2.0;
            if agreement < 1.0 || err > tolerance {
                return unknown(&lines);
            }
            let outer = lines[0].relative_intensity + lines[3].relative_intensity;
            let inner = lines[1].relative_intensity + lines[2].relative_intensity;
            let asymmetry = if inner > 0.0 { outer / inner } else { f64::INFINITY };
            let confidence = if tolerance > 0.0 {
                (-(err / tolerance).powi(2)).exp()
            } else {
                1.0
            } * agreement;
            LineClassification {
                verdict: if asymmetry < ASYMMETRY_THRESHOLD {
                    Verdict::Trion
                } else {
                    Verdict::X2plus
                },
                confidence,
                matched: lines,
                symmetry_error: Some(err),
                asymmetry: Some(asymmetry),
            }
        }
        _ => unknown(&lines),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SpectrumRow {
    wavelength_nm: f64,
    #[serde(rename = "intensity_H")]
    intensity_h: f64,
    #[serde(rename = "intensity_V")]
    intensity_v: f64,
}

pub fn write_spectrum_csv<W: Write>(w: W, s: &Spectrum) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for i in 0..s.len() {
        wtr.serialize(SpectrumRow {
            wavelength_nm: s.wavelengths[i],
            intensity_h: s.h[i],
            intensity_v: s.v[i],
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_spectrum_csv<R: Read>(r: R) -> Result<Spectrum> {
    let mut rdr = csv::Reader::from_reader(r);
    let (mut w, mut h, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for row in rdr.deserialize() {
        let row: SpectrumRow = row?;
        w.push(row.wavelength_nm);
        h.push(row.intensity_h);
        v.push(row.intensity_v);
    }
    Spectrum::new(w, h, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(species: Species) -> ZeemanModelParams {
        ZeemanModelParams {
            species,
            ..Default::default()
        }
    }

    fn spectrum_for(p: &ZeemanModelParams, b: f64, opts: &SynthOptions) -> Spectrum {
        let lines = line_energies(p, b).unwrap();
        let grid = energy_grid(p.center(b), 300e-6, 0.2e-6).unwrap();
        synth_spectrum(&lines, &grid, opts).unwrap()
    }

    #[test]
    fn trion_degenerate_at_zero_field() {
        let lines = line_energies(&params(Species::Trion), 0.0).unwrap();
        assert_eq!(lines.len(), 4);
        assert!(lines.iter().all(|l| l.energy == default_e0()));
    }

    #[test]
    fn trion_offsets_at_four_tesla() {
        let p = ZeemanModelParams {
            g_electron: 0.4,
            g_hole: 0.2,
            ..params(Species::Trion)
        };
        let lines = line_energies(&p, 4.0).unwrap();
        let c = p.center(4.0);
        let off: Vec<f64> = lines.iter().map(|l| (l.energy - c) * 1e6).collect();
        for (o, e) in off.iter().zip([-69.46, -23.15, 23.15, 69.46]) {
            assert!((o - e).abs() < 0.01, "{off:?}");
        }
        let pols: Vec<_> = lines.iter().map(|l| l.polarization).collect();
        assert_eq!(
            pols,
            [Polarization::H, Polarization::V, Polarization::V, Polarization::H]
        );
    }

    #[test]
    fn exciton_without_fss_splits_by_zeeman() {
        let p = ZeemanModelParams {
            fss: 0.0,
            ..params(Species::Exciton)
        };
        let lines = line_energies(&p, 3.0).unwrap();
        let split = lines[1].energy - lines[0].energy;
        assert!((split - MU_B * 3.0 * 0.65).abs() < 1e-15);
        assert_ne!(lines[0].polarization, lines[1].polarization);
        assert!(line_energies(&p, -1.0).is_err());
    }

    #[test]
    fn single_noiseless_line_is_lorentzian() {
        let e = default_e0();
        let line = SpectralLine {
            energy: e,
            relative_intensity: 1.0,
            polarization: Polarization::V,
        };
        let grid = energy_grid(e, 20e-6, 0.05e-6).unwrap();
        let s = synth_spectrum(&[line], &grid, &SynthOptions::noiseless(2e-6, 100.0)).unwrap();
        assert!(s.h.iter().all(|&x| x == 0.0));
        let (imax, &vmax) = s.v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((vmax - 100.0).abs() < 1e-9);
        // half maximum at ±linewidth/2
        let half = energy_to_wavelength(e - 1e-6);
        let j = s.wavelengths.partition_point(|&w| w < half);
        assert!((s.v[j] - 50.0).abs() < 1.0);
        let peaks = detect_peaks(&s, 10.0);
        assert_eq!(peaks.len(), 1);
        let step = s.wavelengths[imax + 1] - s.wavelengths[imax];
        assert!((energy_to_wavelength(peaks[0].energy) - energy_to_wavelength(e)).abs() < step / 2.0);
    }

    #[test]
    fn grid_must_cover_lines() {
        let line = SpectralLine {
            energy: 1.0,
            relative_intensity: 1.0,
            polarization: Polarization::H,
        };
        let grid = energy_grid(1.3, 1e-3, 1e-5).unwrap();
        assert!(synth_spectrum(&[line], &grid, &SynthOptions::noiseless(1e-6, 1.0)).is_err());
    }

    #[test]
    fn empty_line_list_is_noise_floor() {
        let grid = energy_grid(1.34, 1e-4, 1e-6).unwrap();
        let s = synth_spectrum(&[], &grid, &SynthOptions::with_snr(1e-6, 20.0, 100.0, 4)).unwrap();
        let mean = s.h.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 100.0).abs() < 5.0);
        let flat = synth_spectrum(&[], &grid, &SynthOptions::noiseless(1e-6, 1.0)).unwrap();
        assert!(detect_peaks(&flat, 1e-9).is_empty());
    }

    #[test]
    fn instrument_broadening_preserves_area() {
        let e = default_e0();
        let line = SpectralLine {
            energy: e,
            relative_intensity: 1.0,
            polarization: Polarization::H,
        };
        let grid = energy_grid(e, 2e-3, 0.1e-6).unwrap();
        let sharp = synth_spectrum(&[line], &grid, &SynthOptions::noiseless(1e-6, 1.0)).unwrap();
        let opts = SynthOptions {
            instrument_fwhm: Some(DEFAULT_INSTRUMENT_FWHM),
            ..SynthOptions::noiseless(1e-6, 1.0)
        };
        let broad = synth_spectrum(&[line], &grid, &opts).unwrap();
        let (a, b): (f64, f64) = (sharp.h.iter().sum(), broad.h.iter().sum());
        // the Lorentzian tails beyond ±2 meV hold ~0.03% of the area
        assert!((a - b).abs() / a < 2e-3, "{a} {b}");
        assert!(broad.h.iter().cloned().fold(0.0, f64::max) < 0.1);
    }

    #[test]
    fn noiseless_round_trips() {
        for species in [Species::Exciton, Species::Trion, Species::X2plus] {
            let p = params(species);
            let s = spectrum_for(&p, 4.0, &SynthOptions::noiseless(p.linewidth, 1000.0));
            let peaks = detect_peaks(&s, 50.0);
            let c = classify(&peaks, 2e-6);
            assert_eq!(c.verdict, Verdict::from(species), "{c:?}");
            assert!(c.confidence > 0.9);
        }
    }

    #[test]
    fn trion_four_peaks_in_hvvh_order() {
        let p = params(Species::Trion);
        let s = spectrum_for(&p, 4.0, &SynthOptions::with_snr(p.linewidth, 50.0, 100.0, 7));
        let peaks = detect_peaks(&s.smoothed(2), 60.0);
        let pols: Vec<_> = peaks.iter().map(|l| l.polarization).collect();
        assert_eq!(
            pols,
            [Polarization::H, Polarization::V, Polarization::V, Polarization::H]
        );
        assert_eq!(classify(&peaks, 2e-6).verdict, Verdict::Trion);
    }

    #[test]
    fn zero_field_trion_is_not_an_exciton() {
        let p = params(Species::Trion);
        let s = spectrum_for(&p, 0.0, &SynthOptions::noiseless(p.linewidth, 1000.0));
        let peaks = detect_peaks(&s, 50.0);
        assert_eq!(peaks.len(), 2);
        assert_eq!(classify(&peaks, 2e-6).verdict, Verdict::Unknown);
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let s = Spectrum::new(vec![925.0, 925.1], vec![1.0, 2.0], vec![0.0, 3.5]).unwrap();
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &s).unwrap();
        assert!(std::str::from_utf8(&buf)
            .unwrap()
            .starts_with("wavelength_nm,intensity_H,intensity_V\n"));
        assert_eq!(read_spectrum_csv(&buf[..]).unwrap(), s);
    }
}
