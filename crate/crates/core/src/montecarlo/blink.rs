//! Intensity time traces and the bright/dark split of their count histogram.

use crate::error::{Error, Result};
use crate::stream::TimestampStream;

/// Counts per contiguous bin of width `bin` seconds. Only complete bins are
/// returned; a trailing partial bin would bias the histogram low.
pub fn time_trace(stream: &TimestampStream, bin: f64) -> Result<Vec<u32>> {
    if !(bin > 0.0) || !bin.is_finite() {
        return Err(Error::param("bin", format!("must be > 0, got {bin}")));
    }
    let bin_ps = (bin * crate::PS_PER_S).round().max(1.0) as u64;
    let n_bins = (stream.duration_ps() / bin_ps) as usize;
    let mut trace = vec![0u32; n_bins];
    for &t in stream.timestamps() {
        if let Some(c) = trace.get_mut((t / bin_ps) as usize) {
            *c += 1;
        }
    }
    Ok(trace)
}

/// Sum of the traces of several detector channels.
pub fn time_trace_combined(streams: &[TimestampStream], bin: f64) -> Result<Vec<u32>> {
    let mut total: Vec<u32> = Vec::new();
    for s in streams {
        let trace = time_trace(s, bin)?;
        if total.len() < trace.len() {
            total.resize(trace.len(), 0);
        }
        for (acc, c) in total.iter_mut().zip(trace) {
            *acc += c;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlinkAnalysis {
    /// `histogram[n]` = number of bins with `n` counts.
    pub histogram: Vec<u64>,
    /// Bins with at least this many counts are classed as bright.
    pub threshold: u32,
    pub occupancy_estimate: f64,
    pub bright_mean: f64,
    pub bright_sigma: f64,
}

/// Three-point moving average, shortened at the edges.
fn smooth(h: &[u64]) -> Vec<f64> {
    (0..h.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(h.len() - 1);
            h[lo..=hi].iter().sum::<u64>() as f64 / (hi - lo + 1) as f64
        })
        .collect()
}

const FALLBACK_THRESHOLD: u32 = 2;

/// Splits a blinking trace into dark and bright bins.
///
/// The threshold is the minimum of the smoothed histogram between the dark
/// mode and the bright mode. Bins with a single count are mostly background,
/// so the threshold never drops below two.
pub fn blink_histogram(trace: &[u32]) -> Result<BlinkAnalysis> {
    if trace.is_empty() {
        return Err(Error::Data("empty time trace".into()));
    }
    let max = *trace.iter().max().expect("non-empty") as usize;
    let mut histogram = vec![0u64; max + 1];
    for &c in trace {
        histogram[c as usize] += 1;
    }
    if max == 0 {
        return Ok(BlinkAnalysis {
            histogram,
            threshold: FALLBACK_THRESHOLD,
            occupancy_estimate: 0.0,
            bright_mean: 0.0,
            bright_sigma: 0.0,
        });
    }

    let s = smooth(&histogram);
    // dark mode: first local maximum from the left
    let dark = (0..s.len())
        .find(|&i| s[i] > 0.0 && (i + 1 == s.len() || s[i] >= s[i + 1]))
        .expect("histogram has a non-zero entry");
    // descend from the dark mode to the first rise; the valley is the lowest
    // point on that slope
    let mut end = dark;
    while end + 1 < s.len() && s[end + 1] <= s[end] {
        end += 1;
    }
    let valley = (dark..=end)
        .min_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)))
        .expect("non-empty range");
    let bright = (valley + 1..s.len())
        .max_by(|&a, &b| s[a].total_cmp(&s[b]).then(b.cmp(&a)))
        .filter(|&b| s[b] > s[valley])
        .ok_or_else(|| Error::Degenerate("count histogram is unimodal (no bright mode)".into()))?;
    let threshold = (valley as u32).max(FALLBACK_THRESHOLD);
    if threshold as usize >= bright {
        return Err(Error::Degenerate(format!(
            "bright mode at {bright} counts is not separated from the background threshold"
        )));
    }

    let bright_bins: Vec<f64> = trace.iter().filter(|&&c| c >= threshold).map(|&c| c as f64).collect();
    let n = bright_bins.len() as f64;
    let mean = bright_bins.iter().sum::<f64>() / n;
    let var = bright_bins.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(BlinkAnalysis {
        histogram,
        threshold,
        occupancy_estimate: n / trace.len() as f64,
        bright_mean: mean,
        bright_sigma: var.sqrt(),
    })
}
