use std::path::{Path, PathBuf};

use clap::Subcommand;
use qdot_core::zeeman::{self, LineClassification, SpectralLine, SynthOptions, Verdict};
use serde::Serialize;

use crate::config::{self, ZeemanSection};
use crate::error::{CliError, Result};
use crate::manifest::Staged;

#[derive(Debug, Subcommand)]
pub enum ZeemanAction {
    /// Write one polarization-resolved spectrum per magnetic field.
    Synth {
        config: PathBuf,
        /// Field in tesla; repeatable. Overrides `b_fields_t`.
        #[arg(long = "b-field")]
        b_fields: Vec<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Detect lines in spectrum CSVs and name the emitting species.
    Classify {
        #[arg(required = true)]
        spectra: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        tolerance_ev: Option<f64>,
        #[arg(long)]
        min_prominence: Option<f64>,
        /// Moving-average half window applied before peak search.
        #[arg(long)]
        smooth: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize)]
struct Entry {
    file: String,
    verdict: Verdict,
    confidence: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    symmetry_error_ev: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    asymmetry: Option<f64>,
    peaks: Vec<SpectralLine>,
}

#[derive(Debug, Serialize)]
struct Report {
    spectra: Vec<Entry>,
}

fn section_from(path: &Option<PathBuf>) -> Result<(ZeemanSection, Vec<u8>, u64, Option<PathBuf>)> {
    match path {
        Some(p) => {
            let loaded = config::load(p)?;
            let section = loaded.config.zeeman.clone().unwrap_or_default();
            Ok((section, loaded.bytes, loaded.config.seed, loaded.config.output_dir))
        }
        None => Ok((ZeemanSection::default(), Vec::new(), 0, None)),
    }
}

pub fn run(action: &ZeemanAction) -> Result<Vec<PathBuf>> {
    match action {
        ZeemanAction::Synth { config, b_fields, out } => synth(config, b_fields, out),
        ZeemanAction::Classify {
            spectra,
            config,
            tolerance_ev,
            min_prominence,
            smooth,
            out,
        } => {
            let (mut section, bytes, _, out_cfg) = section_from(config)?;
            section.tolerance_ev = tolerance_ev.unwrap_or(section.tolerance_ev);
            section.min_prominence = min_prominence.unwrap_or(section.min_prominence);
            section.smoothing_half_window = smooth.unwrap_or(section.smoothing_half_window);
            section.validate()?;
            let dir = crate::output_dir(out, out_cfg.as_deref())?;
            let canonical = format!(
                "zeeman classify tolerance_ev={} min_prominence={} smooth={}",
                section.tolerance_ev, section.min_prominence, section.smoothing_half_window
            );
            let mut staged = Staged::new("zeeman classify", &[bytes, canonical.into_bytes()].concat(), None);
            let mut report = Report { spectra: Vec::new() };
            for path in spectra {
                let input = crate::read_input(path)?;
                staged.input(path, &input);
                let spectrum = zeeman::read_spectrum_csv(input.as_slice())
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                let spectrum = spectrum.smoothed(section.smoothing_half_window);
                let peaks = zeeman::detect_peaks(&spectrum, section.min_prominence);
                let LineClassification {
                    verdict,
                    confidence,
                    matched,
                    symmetry_error,
                    asymmetry,
                } = zeeman::classify(&peaks, section.tolerance_ev);
                println!(
                    "{}: {verdict:?} ({} lines, confidence {confidence:.2})",
                    path.display(),
                    matched.len()
                );
                report.spectra.push(Entry {
                    file: path.display().to_string(),
                    verdict,
                    confidence,
                    symmetry_error_ev: symmetry_error,
                    asymmetry,
                    peaks: matched,
                });
            }
            let text = toml::to_string(&report).map_err(|e| CliError::Data(e.to_string()))?;
            staged.file("classification.toml", text.into_bytes());
            staged.commit(&dir)
        }
    }
}

fn synth(config: &Path, b_fields: &[f64], out: &Option<PathBuf>) -> Result<Vec<PathBuf>> {
    let loaded = config::load(config)?;
    let dir = crate::output_dir(out, loaded.config.output_dir.as_deref())?;
    let mut section = loaded.config.zeeman.clone().unwrap_or_default();
    if !b_fields.is_empty() {
        section.b_fields_t = b_fields.to_vec();
    }
    section.validate()?;
    let seed = loaded.config.seed;
    let canonical = format!("zeeman synth b_fields_t={:?}", section.b_fields_t);
    let mut staged = Staged::new(
        "zeeman synth",
        &[loaded.bytes, canonical.into_bytes()].concat(),
        Some(seed),
    );
    for (i, &b) in section.b_fields_t.iter().enumerate() {
        let lines = zeeman::line_energies(&section.model, b).map_err(|e| CliError::in_section("zeeman", e))?;
        let energies = zeeman::energy_grid(section.model.center(b), section.half_span_ev, section.step_ev)
            .map_err(|e| CliError::in_section("zeeman", e))?;
        let options = SynthOptions {
            linewidth: section.model.linewidth,
            peak_counts: section.peak_counts,
            noise_level: section.noise_level,
            instrument_fwhm: section.instrument_fwhm_ev,
            seed: seed.wrapping_add(i as u64),
        };
        let spectrum =
            zeeman::synth_spectrum(&lines, &energies, &options).map_err(|e| CliError::in_section("zeeman", e))?;
        let mut buf = Vec::new();
        zeeman::write_spectrum_csv(&mut buf, &spectrum)?;
        staged.file(format!("spectrum_{b}T.csv"), buf);
    }
    staged.summary("species", format!("{:?}", section.model.species));
    staged.commit(&dir)
}
