//! `tcfilm fit`: asymptotic fits on the `series.csv` of a run directory.

use std::path::Path;

use clap::ValueEnum;

use tcfilm_core::asymptotics::{
    extinction_window, fit_extinction, fit_spiral, manifold_ratio, FitReport, SpiralConvention,
};
use tcfilm_core::models::{ModelSpec, Variant};

use crate::artifacts::{read_series, to_json};
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitTarget {
    Extinction,
    Spiral,
    Manifold,
}

impl FitTarget {
    fn name(self) -> &'static str {
        match self {
            FitTarget::Extinction => "extinction",
            FitTarget::Spiral => "spiral",
            FitTarget::Manifold => "manifold",
        }
    }
}

/// Argument of the constitutive function setting the drift speed `c psi(.)`.
fn drift_argument(spec: &ModelSpec) -> f64 {
    match spec.variant {
        Variant::GeneralCase1 { beta_tilde } | Variant::PowerlawCase1 { beta_tilde } => beta_tilde,
        Variant::NewtonianPv1 { c_shear, .. } => c_shear,
        _ => 0.0,
    }
}

/// Fits the run in `dir`. The default window is the last decade of the run,
/// or for extinction the decade before the energy reaches the tolerance.
pub fn fit_run(
    dir: &Path,
    target: FitTarget,
    convention: SpiralConvention,
    window: (Option<f64>, Option<f64>),
) -> Result<FitReport, CliError> {
    let (cfg, _) = RunConfig::load(&dir.join("config.toml"))?;
    let series = read_series(&dir.join("series.csv"))?;
    let t_last = *series.energy.t.last().expect("at least two rows");
    let last_decade = (t_last / 10.0, t_last);
    let pick = |default: (f64, f64)| (window.0.unwrap_or(default.0), window.1.unwrap_or(default.1));
    let spec = &cfg.model;
    let c = cfg.initial.c;

    let report = match target {
        FitTarget::Extinction => {
            let alpha = spec.law.alpha();
            if !(alpha < 1.0) {
                return Err(CliError::Config(format!(
                    "extinction fits need a shear-thinning law (p > 1), run has p = {}",
                    spec.law.p()
                )));
            }
            let default = extinction_window(&series.energy, cfg.solver.tol_extinction).unwrap_or(last_decade);
            fit_extinction(&series.energy, alpha, pick(default))?
        }
        FitTarget::Spiral => fit_spiral(&series.a1, c, &spec.law, drift_argument(spec), convention, pick(last_decade))?,
        FitTarget::Manifold => {
            let Some(beta_tilde) = spec.beta_tilde() else {
                return Err(CliError::Config(format!("manifold fits need a case-1 model, run is {}", spec.name())));
            };
            manifold_ratio(&series.a1, &series.a2, c, &spec.law, beta_tilde, pick(last_decade))?
        }
    };
    let out = dir.join(format!("fit_{}.json", target.name()));
    std::fs::write(&out, to_json(&report)).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    Ok(report)
}
