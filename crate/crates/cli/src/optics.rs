use std::path::{Path, PathBuf};

use clap::Subcommand;
use qdot_core::tmm::{self, LayerStack};

use crate::config::{self, require, TmmSection};
use crate::error::{CliError, Result};
use crate::manifest::Staged;

#[derive(Debug, Subcommand)]
pub enum TmmAction {
    /// Reflectivity spectrum of the stack.
    Reflectivity {
        config: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Standing-wave intensity through the stack, at resonance by default.
    Field {
        config: PathBuf,
        #[arg(long)]
        wavelength_nm: Option<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Cavity resonance, quality factor and top-mirror outcoupling.
    Mode {
        config: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

struct Prepared {
    section: TmmSection,
    stack: LayerStack,
    staged: Staged,
    dir: PathBuf,
}

fn prepare(name: &str, path: &Path, out: &Option<PathBuf>) -> Result<Prepared> {
    let loaded = config::load(path)?;
    let dir = crate::output_dir(out, loaded.config.output_dir.as_deref())?;
    let section = require(&loaded.config.tmm, "tmm")?.clone();
    if section.scan_points < 2 || !(section.field_resolution_nm > 0.0) {
        return Err(CliError::Config(
            "[tmm] need scan_points >= 2 and field_resolution_nm > 0".into(),
        ));
    }
    let stack =
        tmm::build_stack(&section.stack, &section.material_table()).map_err(|e| CliError::in_section("tmm", e))?;
    Ok(Prepared {
        section,
        stack,
        staged: Staged::new(name, &loaded.bytes, None),
        dir,
    })
}

pub fn run(action: &TmmAction) -> Result<Vec<PathBuf>> {
    match action {
        TmmAction::Reflectivity { config, out } => {
            let mut p = prepare("tmm reflectivity", config, out)?;
            let lambda = p.stack.design_wavelength;
            let start = p.section.scan_start_nm.unwrap_or(lambda - 60.0);
            let stop = p.section.scan_stop_nm.unwrap_or(lambda + 60.0);
            let grid =
                tmm::wavelength_grid(start, stop, p.section.scan_points).map_err(|e| CliError::in_section("tmm", e))?;
            let refl = tmm::reflectivity(&p.stack, &grid)?;
            let mut buf = Vec::new();
            tmm::write_reflectivity_csv(&mut buf, &grid, &refl)?;
            p.staged.file("reflectivity.csv", buf);
            p.staged.commit(&p.dir)
        }
        TmmAction::Field {
            config,
            wavelength_nm,
            out,
        } => {
            let mut p = prepare("tmm field", config, out)?;
            let w = match wavelength_nm {
                Some(w) => *w,
                None => tmm::cavity_mode(&p.stack)?.resonance,
            };
            let profile = tmm::field_profile(&p.stack, w, p.section.field_resolution_nm)?;
            let mut buf = Vec::new();
            tmm::write_field_csv(&mut buf, &profile)?;
            p.staged.file("field.csv", buf);
            p.staged.summary("wavelength_nm", w);
            if let Some(z) = p.stack.emitter_depth {
                p.staged.summary("emitter_depth_nm", z);
            }
            p.staged.commit(&p.dir)
        }
        TmmAction::Mode { config, out } => {
            let mut p = prepare("tmm mode", config, out)?;
            let mode = tmm::cavity_mode(&p.stack)?;
            println!(
                "resonance {:.3} nm, Q {:.0}, eta_top {:.3} (R_top {:.5}, R_bottom {:.5})",
                mode.resonance, mode.quality_factor, mode.eta_top, mode.r_top, mode.r_bottom
            );
            let report = toml::to_string(&mode).map_err(|e| CliError::Data(e.to_string()))?;
            p.staged.file("mode.toml", report.into_bytes());
            p.staged.commit(&p.dir)
        }
    }
}
