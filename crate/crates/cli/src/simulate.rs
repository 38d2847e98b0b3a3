use std::path::{Path, PathBuf};

use qdot_core::charge;
use qdot_core::montecarlo::{blink_histogram, simulate_detection, simulate_trajectory, time_trace_combined};
use qdot_core::stream;

use crate::config::{self, require};
use crate::error::{CliError, Result};
use crate::manifest::Staged;

pub fn run(config_path: &Path, out: &Option<PathBuf>) -> Result<Vec<PathBuf>> {
    let loaded = config::load(config_path)?;
    let cfg = &loaded.config;
    let dir = crate::output_dir(out, cfg.output_dir.as_deref())?;

    let params = require(&cfg.charge, "charge")?.params()?;
    let pulses = *require(&cfg.pulses, "pulses")?;
    pulses.validate().map_err(|e| CliError::in_section("pulses", e))?;
    let detection = *require(&cfg.detection, "detection")?;
    detection.validate().map_err(|e| CliError::in_section("detection", e))?;
    if let Some(trace) = &cfg.trace {
        if !(trace.bin_s > 0.0) || !(trace.bin_s < pulses.duration) {
            return Err(CliError::Config(format!(
                "[trace] bin_s must be in (0, duration_s), got {}",
                trace.bin_s
            )));
        }
    }

    let traj = simulate_trajectory(&params, pulses.duration, cfg.seed)?;
    let det = simulate_detection(&traj, &pulses, &detection, cfg.seed)?;

    let mut staged = Staged::new("simulate", &loaded.bytes, Some(cfg.seed));
    for ch in &det.channels {
        let mut buf = Vec::new();
        stream::write_qdts(&mut buf, &[ch])?;
        staged.file(format!("ch{}.qdts", ch.channel()), buf);
    }
    staged.summary("duration_s", pulses.duration);
    staged.summary("duration_ps", det.channels[0].duration_ps() as i64);
    staged.summary("events_ch0", det.channels[0].len() as i64);
    staged.summary("events_ch1", det.channels[1].len() as i64);
    staged.summary("signal_counts", det.signal_counts.iter().sum::<u64>() as i64);
    staged.summary("background_counts", det.background_counts.iter().sum::<u64>() as i64);
    staged.summary("source_fraction", det.source_fraction());
    if params.two_hole.is_none() {
        let ss = charge::steady_state(&params)?;
        staged.summary("p_h_mean", ss.p_h_mean);
        staged.summary("tau_eff_s", ss.tau_eff);
    }

    if let Some(trace) = &cfg.trace {
        let counts = time_trace_combined(&det.channels, trace.bin_s)?;
        let rows = counts
            .iter()
            .enumerate()
            .map(|(i, n)| vec![(i as f64 * trace.bin_s).to_string(), n.to_string()]);
        staged.file("trace.csv", crate::csv_table(&["bin_start_s", "counts"], rows)?);

        let blink = blink_histogram(&counts)?;
        let rows = blink
            .histogram
            .iter()
            .enumerate()
            .map(|(n, bins)| vec![n.to_string(), bins.to_string()]);
        staged.file(
            "blink_histogram.csv",
            crate::csv_table(&["counts_per_bin", "bins"], rows)?,
        );
        staged.summary("blink_threshold", blink.threshold as i64);
        staged.summary("blink_occupancy", blink.occupancy_estimate);
        staged.summary("blink_bright_mean", blink.bright_mean);
        staged.summary("blink_bright_sigma", blink.bright_sigma);
    }
    staged.commit(&dir)
}
