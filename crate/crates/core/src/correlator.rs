//! Start-channel/stop-channel cross-correlation of timestamp streams.
//!
//! The histogram counts every pair `(t0 ∈ ch0, t1 ∈ ch1)` whose delay
//! `t1 − t0` falls in the window, not just the first stop after each start.
//! Bins are half-open, `[min_delay + b·w, min_delay + (b + 1)·w)`.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::TimestampStream;

/// Delay range and bin width of a coincidence histogram, in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayWindow {
    pub bin_width: u64,
    pub min_delay: i64,
    pub max_delay: i64,
}

impl DelayWindow {
    pub fn new(bin_width: u64, min_delay: i64, max_delay: i64) -> Result<Self> {
        if bin_width == 0 {
            return Err(Error::param("bin_width", "must be > 0"));
        }
        if max_delay <= min_delay {
            return Err(Error::param("max_delay", "must exceed min_delay"));
        }
        if !((max_delay - min_delay) as u64).is_multiple_of(bin_width) {
            return Err(Error::param(
                "max_delay",
                format!(
                    "range {}..{} ps is not a multiple of the {bin_width} ps bin",
                    min_delay, max_delay
                ),
            ));
        }
        Ok(Self {
            bin_width,
            min_delay,
            max_delay,
        })
    }

    /// `[-max_delay, max_delay)`.
    pub fn symmetric(bin_width: u64, max_delay: u64) -> Result<Self> {
        if bin_width == 0 || !max_delay.is_multiple_of(bin_width) {
            return Err(Error::param(
                "max_delay",
                format!("{max_delay} ps is not a multiple of the {bin_width} ps bin"),
            ));
        }
        Self::new(bin_width, -(max_delay as i64), max_delay as i64)
    }

    /// Layout for pulsed light: base bins one repetition period wide and
    /// centered on the peaks `k·T_R`, arranged so that groups of `group`
    /// bins can be merged by [`rebin`] with one group straddling zero.
    ///
    /// The histogram spans `2·half_groups + 1` groups. The base bin width is
    /// the period rounded to the picosecond; the residual drift stays below
    /// half a bin for the first `T_R / (2·|T_R − w|)` peaks.
    pub fn pulse_aligned(rep_period_ps: f64, group: usize, half_groups: usize) -> Result<Self> {
        if !(rep_period_ps >= 2.0) {
            return Err(Error::param("rep_period", format!("{rep_period_ps} ps too short")));
        }
        if group == 0 {
            return Err(Error::param("group", "must be >= 1"));
        }
        let w = rep_period_ps.round() as i64;
        let drift = (rep_period_ps - w as f64).abs();
        let k_lo = -((group * half_groups + group / 2) as i64);
        let bins = (group * (2 * half_groups + 1)) as i64;
        if drift > 0.0 && (k_lo.unsigned_abs() as f64) * drift >= w as f64 / 2.0 {
            return Err(Error::param(
                "half_groups",
                "window too long: peaks drift out of their period-rounded bins",
            ));
        }
        let min_delay = k_lo * w - w / 2;
        Self::new(w as u64, min_delay, min_delay + bins * w)
    }

    pub fn bin_count(&self) -> usize {
        ((self.max_delay - self.min_delay) as u64 / self.bin_width) as usize
    }

    pub fn bin_center_ps(&self, b: usize) -> f64 {
        self.min_delay as f64 + (b as f64 + 0.5) * self.bin_width as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub window: DelayWindow,
    pub counts: Vec<u64>,
    pub total_starts: u64,
    pub total_stops: u64,
    /// Acquisition length, s.
    pub duration: f64,
}

impl CoincidenceHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_centers_ps(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.counts.len()).map(|b| self.window.bin_center_ps(b))
    }
}

fn check_sorted(name: &str, ts: &[u64]) -> Result<()> {
    match ts.windows(2).position(|w| w[1] < w[0]) {
        Some(i) => Err(Error::Data(format!("{name} not sorted at index {}", i + 1))),
        None => Ok(()),
    }
}

/// Sweeps the starts in `starts` against all of `stops`.
fn sweep(starts: &[u64], stops: &[u64], window: &DelayWindow, counts: &mut [u64]) {
    let w = window.bin_width as i64;
    let Some(&first) = starts.first() else { return };
    // first stop that can pair with the first start
    let mut lo = stops.partition_point(|&t1| (t1 as i64 - first as i64) < window.min_delay);
    for &t0 in starts {
        let t0 = t0 as i64;
        while lo < stops.len() && (stops[lo] as i64 - t0) < window.min_delay {
            lo += 1;
        }
        for &t1 in &stops[lo..] {
            let d = t1 as i64 - t0;
            if d >= window.max_delay {
                break;
            }
            counts[((d - window.min_delay) / w) as usize] += 1;
        }
    }
}

const PARALLEL_CHUNK: usize = 1 << 16;

/// Histogram of pair delays between two sorted time lists.
///
/// Cost is `O(n0 + n1 + pairs)`. Long start lists are split into chunks that
/// are swept concurrently and summed.
pub fn coincidence_counts(starts: &[u64], stops: &[u64], window: &DelayWindow) -> Result<Vec<u64>> {
    check_sorted("start channel", starts)?;
    check_sorted("stop channel", stops)?;
    let bins = window.bin_count();
    if starts.len() <= PARALLEL_CHUNK {
        let mut counts = vec![0u64; bins];
        sweep(starts, stops, window, &mut counts);
        return Ok(counts);
    }
    Ok(starts
        .par_chunks(PARALLEL_CHUNK)
        .map(|chunk| {
            let mut counts = vec![0u64; bins];
            sweep(chunk, stops, window, &mut counts);
            counts
        })
        .reduce(
            || vec![0u64; bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        ))
}

/// Cross-correlation of two streams in a symmetric `±max_delay` window.
pub fn coincidences(
    ch0: &TimestampStream,
    ch1: &TimestampStream,
    bin_width: u64,
    max_delay: u64,
) -> Result<CoincidenceHistogram> {
    coincidences_in(ch0, ch1, DelayWindow::symmetric(bin_width, max_delay)?)
}

pub fn coincidences_in(
    ch0: &TimestampStream,
    ch1: &TimestampStream,
    window: DelayWindow,
) -> Result<CoincidenceHistogram> {
    let counts = coincidence_counts(ch0.timestamps(), ch1.timestamps(), &window)?;
    Ok(CoincidenceHistogram {
        window,
        counts,
        total_starts: ch0.len() as u64,
        total_stops: ch1.len() as u64,
        duration: ch0.duration_s().max(ch1.duration_s()),
    })
}

/// Sums groups of `factor` adjacent bins.
pub fn rebin(hist: &CoincidenceHistogram, factor: usize) -> Result<CoincidenceHistogram> {
    if factor == 0 || !hist.counts.len().is_multiple_of(factor) {
        return Err(Error::param(
            "factor",
            format!("{factor} does not divide the {} bins", hist.counts.len()),
        ));
    }
    let window = DelayWindow::new(
        hist.window.bin_width * factor as u64,
        hist.window.min_delay,
        hist.window.max_delay,
    )?;
    Ok(CoincidenceHistogram {
        window,
        counts: hist.counts.chunks(factor).map(|c| c.iter().sum()).collect(),
        ..hist.clone()
    })
}

/// Normalized intensity correlation with Poisson standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Curve {
    /// Bin centers, s.
    pub delays: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl G2Curve {
    pub fn new(delays: Vec<f64>, values: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        if delays.len() != values.len() || delays.len() != stderr.len() {
            return Err(Error::Data("g2 columns differ in length".into()));
        }
        if delays.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Data("g2 delays not strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("g2 values must be finite".into()));
        }
        if stderr.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::Data("g2 errors must be finite and >= 0".into()));
        }
        Ok(Self { delays, values, stderr })
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }
}

/// `g²(τ_b) = counts_b · T / (N_start · N_stop · Δτ)`.
pub fn normalize(hist: &CoincidenceHistogram) -> Result<G2Curve> {
    if hist.total_starts == 0 || hist.total_stops == 0 {
        return Err(Error::Degenerate("a channel has no events, g2 is undefined".into()));
    }
    if !(hist.duration > 0.0) {
        return Err(Error::Degenerate("histogram has zero duration".into()));
    }
    let bin_s = hist.window.bin_width as f64 / crate::PS_PER_S;
    let scale = hist.duration / (hist.total_starts as f64 * hist.total_stops as f64 * bin_s);
    G2Curve::new(
        hist.bin_centers_ps().map(|d| d / crate::PS_PER_S).collect(),
        hist.counts.iter().map(|&c| c as f64 * scale).collect(),
        hist.counts.iter().map(|&c| (c as f64).sqrt() * scale).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: i64,
    pub area: f64,
    pub area_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSeries {
    pub peaks: Vec<Peak>,
}

impl PeakSeries {
    /// Builds a series with Poisson errors from `(k, area)` pairs.
    pub fn from_areas(areas: impl IntoIterator<Item = (i64, f64)>) -> Self {
        Self {
            peaks: areas
                .into_iter()
                .map(|(index, area)| Peak {
                    index,
                    area,
                    area_err: area.max(0.0).sqrt(),
                })
                .collect(),
        }
    }

    pub fn get(&self, k: i64) -> Option<&Peak> {
        self.peaks.iter().find(|p| p.index == k)
    }
}

/// Integrated counts of the pulsed peaks at `k·rep_period`, summing the bins
/// whose centers lie within `±window/2` of each peak. Only peaks whose whole
/// window fits inside the histogram are reported.
pub fn peak_areas(hist: &CoincidenceHistogram, rep_period_ps: f64, window_ps: f64) -> Result<PeakSeries> {
    let w = hist.window.bin_width as f64;
    if !(rep_period_ps >= 2.0 * w) {
        return Err(Error::param(
            "rep_period",
            format!("{rep_period_ps} ps period unresolvable with {w} ps bins"),
        ));
    }
    if !(window_ps > 0.0 && window_ps <= rep_period_ps) {
        return Err(Error::param(
            "window",
            format!("must be in (0, rep_period], got {window_ps}"),
        ));
    }
    let (lo, hi) = (hist.window.min_delay as f64, hist.window.max_delay as f64);
    let half = window_ps / 2.0;
    let k_min = ((lo + half) / rep_period_ps).ceil() as i64;
    let k_max = ((hi - half) / rep_period_ps).floor() as i64;
    let peaks = (k_min..=k_max)
        .map(|k| {
            let center = k as f64 * rep_period_ps;
            let b_lo = (((center - half - lo) / w) - 0.5).ceil().max(0.0) as usize;
            let b_hi = ((((center + half - lo) / w) - 0.5).floor() as usize).min(hist.counts.len() - 1);
            let area: u64 = if b_lo <= b_hi {
                hist.counts[b_lo..=b_hi].iter().sum()
            } else {
                0
            };
            Peak {
                index: k,
                area: area as f64,
                area_err: (area as f64).sqrt(),
            }
        })
        .collect();
    Ok(PeakSeries { peaks })
}

/// Which side peaks serve as the uncorrelated reference: those with `|k| > k_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferencePeaks {
    pub k_min: u64,
}

impl ReferencePeaks {
    pub const MIN_PEAKS: usize = 4;

    pub fn excluding(k_min: u64) -> Self {
        Self { k_min }
    }

    /// Excludes side peaks closer than five blinking correlation times.
    pub fn for_blinking(tau_eff: f64, rep_period: f64) -> Self {
        Self {
            k_min: (5.0 * tau_eff / rep_period).ceil() as u64,
        }
    }

    /// Blinking time unknown: skip the first twenty side peaks.
    pub fn hbt_default() -> Self {
        Self { k_min: 20 }
    }

    /// HOM reference `|k| >= 2`; the ±1 peaks are suppressed by the
    /// unbalanced-interferometer topology.
    pub fn hom_default() -> Self {
        Self { k_min: 1 }
    }

    fn mean_area(&self, peaks: &PeakSeries) -> Result<(f64, f64)> {
        let refs: Vec<&Peak> = peaks
            .peaks
            .iter()
            .filter(|p| p.index.unsigned_abs() > self.k_min)
            .collect();
        if refs.len() < Self::MIN_PEAKS {
            return Err(Error::Degenerate(format!(
                "only {} reference peaks beyond |k| = {} (need {})",
                refs.len(),
                self.k_min,
                Self::MIN_PEAKS
            )));
        }
        let n = refs.len() as f64;
        let mean = refs.iter().map(|p| p.area).sum::<f64>() / n;
        let err = refs.iter().map(|p| p.area_err.powi(2)).sum::<f64>().sqrt() / n;
        if !(mean > 0.0) {
            return Err(Error::Degenerate("reference peaks are empty".into()));
        }
        Ok((mean, err))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

fn zero_peak_ratio(peaks: &PeakSeries, reference: ReferencePeaks) -> Result<Estimate> {
    let zero = peaks
        .get(0)
        .ok_or_else(|| Error::Degenerate("no zero-delay peak".into()))?;
    let (mean, mean_err) = reference.mean_area(peaks)?;
    let value = zero.area / mean;
    let err = ((zero.area_err / mean).powi(2) + (value * mean_err / mean).powi(2)).sqrt();
    Ok(Estimate { value, err })
}

/// Single-photon purity `area(0) / <area(k)>` over the reference peaks.
pub fn g2_zero(peaks: &PeakSeries, reference: ReferencePeaks) -> Result<Estimate> {
    zero_peak_ratio(peaks, reference)
}

/// Raw HOM visibility `1 − 2·area(0) / <area(k)>`.
pub fn hom_visibility(peaks: &PeakSeries, reference: ReferencePeaks) -> Result<Estimate> {
    let r = zero_peak_ratio(
        peaks,
        ReferencePeaks {
            k_min: reference.k_min.max(1),
        },
    )?;
    Ok(Estimate {
        value: 1.0 - 2.0 * r.value,
        err: 2.0 * r.err,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct HistRow {
    delay_ps: f64,
    counts: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct G2Row {
    delay_s: f64,
    g2: f64,
    stderr: f64,
}

/// `delay_ps,counts` with the bin center as delay.
pub fn write_histogram_csv<W: Write>(w: W, hist: &CoincidenceHistogram) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for (delay_ps, &counts) in hist.bin_centers_ps().zip(&hist.counts) {
        wtr.serialize(HistRow { delay_ps, counts })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_g2_csv<W: Write>(w: W, g2: &G2Curve) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for i in 0..g2.len() {
        wtr.serialize(G2Row {
            delay_s: g2.delays[i],
            g2: g2.values[i],
            stderr: g2.stderr[i],
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_g2_csv<R: Read>(r: R) -> Result<G2Curve> {
    let mut rdr = csv::Reader::from_reader(r);
    let (mut d, mut v, mut e) = (Vec::new(), Vec::new(), Vec::new());
    for row in rdr.deserialize() {
        let row: G2Row = row?;
        d.push(row.delay_s);
        v.push(row.g2);
        e.push(row.stderr);
    }
    G2Curve::new(d, v, e)
}
