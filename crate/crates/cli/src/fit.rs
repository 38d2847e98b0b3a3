use std::path::PathBuf;

use clap::Args;
use qdot_core::correlator;
use qdot_core::fitting;

use crate::config::{self, FitSection};
use crate::error::{CliError, Result};
use crate::manifest::Staged;

#[derive(Debug, Args)]
pub struct FitArgs {
    /// g² CSV with columns delay_s,g2,stderr.
    pub g2: PathBuf,
    /// Config whose [fit] section supplies defaults for the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fraction of detected photons originating from the dot; applies the
    /// background correction before fitting.
    #[arg(long)]
    pub pqd: Option<f64>,
    /// Leave out points with |delay| below this, s.
    #[arg(long)]
    pub exclude_within_s: Option<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &FitArgs) -> Result<Vec<PathBuf>> {
    let (section, bytes, out_cfg) = match &args.config {
        Some(path) => {
            let loaded = config::load(path)?;
            (
                loaded.config.fit.clone().unwrap_or_default(),
                loaded.bytes,
                loaded.config.output_dir,
            )
        }
        None => (FitSection::default(), Vec::new(), None),
    };
    let dir = crate::output_dir(&args.out, out_cfg.as_deref())?;
    let mut options = section.options();
    if let Some(x) = args.exclude_within_s {
        options.exclude_within = x;
    }
    if !(options.exclude_within >= 0.0) || !(options.tolerance > 0.0) || options.max_iterations == 0 {
        return Err(CliError::Config(format!("invalid fit options {options:?}")));
    }
    let p_qd = args.pqd.or(section.p_qd);
    if let Some(p) = p_qd {
        if !(p > 0.0 && p <= 1.0) {
            return Err(CliError::Config(format!("p_qd must be in (0, 1], got {p}")));
        }
    }

    let canonical = format!("fit p_qd={p_qd:?} options={options:?}");
    let mut staged = Staged::new("fit", &[bytes, canonical.into_bytes()].concat(), None);
    let input = crate::read_input(&args.g2)?;
    staged.input(&args.g2, &input);
    let raw =
        correlator::read_g2_csv(input.as_slice()).map_err(|e| CliError::Data(format!("{}: {e}", args.g2.display())))?;
    let g2 = match p_qd {
        Some(p) => fitting::correct_background(&raw, p)?,
        None => raw,
    };
    let fit = fitting::fit_envelope(&g2, &options)?;

    let rows = g2
        .delays
        .iter()
        .zip(&g2.values)
        .zip(&g2.stderr)
        .map(|((t, g), e)| vec![t.to_string(), g.to_string(), e.to_string(), fit.model(*t).to_string()]);
    staged.file(
        "fit_curve.csv",
        crate::csv_table(&["delay_s", "g2", "stderr", "model"], rows)?,
    );
    let report = toml::to_string(&fit).map_err(|e| CliError::Data(e.to_string()))?;
    staged.file("fit_report.toml", report.into_bytes());
    println!(
        "<P_h> = {:.4} ± {:.4}, T_h = {:.4e} ± {:.1e} s, gamma = {:.4e} ± {:.1e} 1/s (chi2/dof {:.2})",
        fit.p_h_mean,
        fit.p_h_mean_err,
        fit.t_hole,
        fit.t_hole_err,
        fit.gamma,
        fit.gamma_err,
        fit.chi2 / fit.dof.max(1) as f64
    );
    staged.summary("p_h_mean", fit.p_h_mean);
    staged.summary("t_hole_s", fit.t_hole);
    staged.commit(&dir)
}
