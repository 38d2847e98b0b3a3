use std::path::PathBuf;

use clap::Args;
use qdot_core::correlator::{self, CoincidenceHistogram, DelayWindow, ReferencePeaks};
use qdot_core::stream::{self, TimestampStream};

use crate::config::{self, CorrelatorSection};
use crate::error::{CliError, Result};
use crate::manifest::Staged;

const DEFAULT_BIN_PS: u64 = 100;
const DEFAULT_MAX_DELAY_PS: u64 = 500_000;
const DEFAULT_REP_RATE_HZ: f64 = 82e6;

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// QDTS or CSV stream files holding exactly two channels in total.
    #[arg(required = true)]
    pub streams: Vec<PathBuf>,
    /// Config whose [correlator] section supplies defaults for the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bin_ps: Option<u64>,
    #[arg(long)]
    pub max_delay_ps: Option<u64>,
    /// `N` merges N bins; `NTR` bins per pulse and merges N repetition periods.
    #[arg(long)]
    pub rebin: Option<String>,
    #[arg(long)]
    pub rep_rate_hz: Option<f64>,
    /// Acquisition length; defaults to the last timestamp.
    #[arg(long)]
    pub duration_s: Option<f64>,
    /// Integrate pulsed peaks and report the HBT g²(0).
    #[arg(long)]
    pub purity: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Rebin {
    None,
    Bins(usize),
    Periods(usize),
}

fn parse_rebin(text: Option<&str>) -> Result<Rebin> {
    let Some(text) = text else { return Ok(Rebin::None) };
    let bad = || CliError::Config(format!("--rebin expects N or NTR with N >= 1, got `{text}`"));
    let (digits, periods) = match text.strip_suffix("TR") {
        Some(d) => (d, true),
        None => (text, false),
    };
    let n: usize = digits.parse().map_err(|_| bad())?;
    match (n, periods) {
        (0, _) => Err(bad()),
        (n, true) => Ok(Rebin::Periods(n)),
        (n, false) => Ok(Rebin::Bins(n)),
    }
}

fn read_streams(paths: &[PathBuf], duration_ps: Option<u64>, staged: &mut Staged) -> Result<Vec<TimestampStream>> {
    let mut streams = Vec::new();
    for path in paths {
        let bytes = crate::read_input(path)?;
        staged.input(path, &bytes);
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let parsed = if is_csv {
            stream::read_csv(bytes.as_slice(), duration_ps)
        } else {
            stream::read_qdts(bytes.as_slice(), duration_ps)
        };
        streams.extend(parsed.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?);
    }
    if streams.len() != 2 {
        return Err(CliError::Data(format!(
            "need exactly two channels, found {}",
            streams.len()
        )));
    }
    let duration = streams
        .iter()
        .map(TimestampStream::duration_ps)
        .max()
        .unwrap_or(0)
        .max(1);
    streams
        .into_iter()
        .map(|s| s.with_duration(duration).map_err(CliError::from))
        .collect()
}

fn histogram_rows(hist: &CoincidenceHistogram) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    correlator::write_histogram_csv(&mut buf, hist)?;
    Ok(buf)
}

pub fn run(args: &CorrelateArgs) -> Result<Vec<PathBuf>> {
    let (section, bytes, out_cfg) = match &args.config {
        Some(path) => {
            let loaded = config::load(path)?;
            let section = loaded.config.correlator.clone().unwrap_or_default();
            let rep = loaded.config.pulses.map(|p| p.rep_rate);
            let section = CorrelatorSection {
                rep_rate_hz: section.rep_rate_hz.or(rep),
                ..section
            };
            (section, loaded.bytes, loaded.config.output_dir)
        }
        None => (CorrelatorSection::default(), Vec::new(), None),
    };
    let dir = crate::output_dir(&args.out, out_cfg.as_deref())?;
    let bin_ps = args.bin_ps.or(section.bin_ps).unwrap_or(DEFAULT_BIN_PS);
    let max_delay_ps = args
        .max_delay_ps
        .or(section.max_delay_ps)
        .unwrap_or(DEFAULT_MAX_DELAY_PS);
    let rebin = parse_rebin(args.rebin.as_deref().or(section.rebin.as_deref()))?;
    let rep_rate = args.rep_rate_hz.or(section.rep_rate_hz).unwrap_or(DEFAULT_REP_RATE_HZ);
    if !(rep_rate > 0.0) || !rep_rate.is_finite() {
        return Err(CliError::Config(format!("rep_rate_hz must be > 0, got {rep_rate}")));
    }
    let duration_ps = match args.duration_s {
        Some(d) if d > 0.0 && d.is_finite() => Some((d * qdot_core::PS_PER_S).round() as u64),
        Some(d) => return Err(CliError::Config(format!("--duration-s must be > 0, got {d}"))),
        None => None,
    };
    let period_ps = qdot_core::PS_PER_S / rep_rate;
    let window = match rebin {
        Rebin::Periods(n) => {
            let half_groups = (max_delay_ps as f64 / (n as f64 * period_ps)).ceil().max(1.0) as usize;
            DelayWindow::pulse_aligned(period_ps, n, half_groups)
        }
        _ => DelayWindow::symmetric(bin_ps, max_delay_ps),
    }
    .map_err(|e| CliError::in_section("correlator", e))?;

    let canonical = format!(
        "correlate bin_ps={bin_ps} max_delay_ps={max_delay_ps} rebin={rebin:?} rep_rate_hz={rep_rate} duration_ps={duration_ps:?} purity={}",
        args.purity
    );
    let config_bytes = if bytes.is_empty() {
        canonical.into_bytes()
    } else {
        [bytes, canonical.into_bytes()].concat()
    };
    let mut staged = Staged::new("correlate", &config_bytes, None);
    let streams = read_streams(&args.streams, duration_ps, &mut staged)?;

    let hist = correlator::coincidences_in(&streams[0], &streams[1], window)?;
    staged.file("histogram.csv", histogram_rows(&hist)?);
    let final_hist = match rebin {
        Rebin::None => hist.clone(),
        Rebin::Bins(n) | Rebin::Periods(n) => {
            let coarse = correlator::rebin(&hist, n)?;
            staged.file("histogram_rebinned.csv", histogram_rows(&coarse)?);
            coarse
        }
    };
    let g2 = correlator::normalize(&final_hist)?;
    let mut buf = Vec::new();
    correlator::write_g2_csv(&mut buf, &g2)?;
    staged.file("g2.csv", buf);

    staged.summary("events_ch0", streams[0].len() as i64);
    staged.summary("events_ch1", streams[1].len() as i64);
    staged.summary("duration_s", streams[0].duration_s());
    staged.summary("coincidences", hist.total() as i64);
    if args.purity {
        let peaks = correlator::peak_areas(&hist, period_ps, period_ps / 2.0)?;
        let g0 = correlator::g2_zero(&peaks, ReferencePeaks::hbt_default())?;
        let rows = peaks
            .peaks
            .iter()
            .map(|p| vec![p.index.to_string(), p.area.to_string(), p.area_err.to_string()]);
        staged.file(
            "peaks.csv",
            crate::csv_table(&["peak_index", "area", "area_err"], rows)?,
        );
        staged.summary("g2_zero", g0.value);
        staged.summary("g2_zero_err", g0.err);
        println!("g2(0) = {:.4} ± {:.4}", g0.value, g0.err);
    }
    staged.commit(&dir)
}
