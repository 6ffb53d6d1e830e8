//! `tcfilm`: run, sweep, fit and classify thin-film simulations.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 touchdown,
//! 4 blowup, 5 insufficient data for a fit, 6 unsupported regime.

mod artifacts;
mod config;
mod error;
mod fit;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tcfilm_core::asymptotics::SpiralConvention;
use tcfilm_core::scaling::{nondimensionalize_with, Regime};

use crate::config::{key_line, parse_toml, read_source, RegimeConfig, RunConfig};
use crate::error::CliError;
use crate::fit::FitTarget;

#[derive(Debug, Parser)]
#[command(name = "tcfilm", version, about = "Thin-film interface dynamics in Taylor-Couette flow")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Convention {
    PsiPrime,
    PowerLaw,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Integrate one configuration and write its artifacts.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        /// Output directory; defaults to `output.dir` of the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run every point of the `[grid]` section.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Fit asymptotic laws to the series of a run directory.
    Fit {
        #[arg(long, value_enum)]
        kind: FitTarget,
        dir: PathBuf,
        /// Normalisation of the predicted spiral constants.
        #[arg(long, value_enum, default_value = "psi-prime")]
        convention: Convention,
        /// Start of the fit window.
        #[arg(long)]
        from: Option<f64>,
        /// End of the fit window.
        #[arg(long)]
        to: Option<f64>,
    },
    /// Print the dimensionless groups and regime of a physical setup.
    Regime {
        #[arg(short, long)]
        config: PathBuf,
    },
}

fn out_dir(out: Option<PathBuf>, cfg: &RunConfig, config: &Path) -> Result<PathBuf, CliError> {
    out.or_else(|| cfg.output.dir.clone())
        .ok_or_else(|| CliError::Config(format!("{}: no output directory (use -o or output.dir)", config.display())))
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> Result<u8, CliError> {
    let (cfg, src) = RunConfig::load(config)?;
    let dir = out_dir(out, &cfg, config)?;
    let (summary, _) = artifacts::execute(&cfg, &src, &dir)?;
    eprintln!("{}: {} steps, status {:?}", dir.display(), summary.steps, summary.status);
    Ok(summary.status.exit_code())
}

fn cmd_sweep(config: &Path, out: Option<PathBuf>) -> Result<u8, CliError> {
    let (cfg, _) = RunConfig::load(config)?;
    let dir = out_dir(out, &cfg, config)?;
    let rows = sweep::sweep(config, &dir)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    eprintln!("{}: {} runs, {failed} failed", dir.display(), rows.len());
    Ok(0)
}

fn cmd_fit(kind: FitTarget, dir: &Path, convention: Convention, from: Option<f64>, to: Option<f64>) -> Result<u8, CliError> {
    let convention = match convention {
        Convention::PsiPrime => SpiralConvention::PsiPrime,
        Convention::PowerLaw => SpiralConvention::PowerLaw,
    };
    let report = fit::fit_run(dir, kind, convention, (from, to))?;
    print!("{}", artifacts::to_json(&report));
    Ok(0)
}

fn cmd_regime(config: &Path) -> Result<u8, CliError> {
    let src = read_source(config)?;
    let rc: RegimeConfig = parse_toml(config, &src)?;
    let thresholds = rc.thresholds.unwrap_or_default();
    let report = nondimensionalize_with(&rc.physical, &thresholds).map_err(|e| match e {
        tcfilm_core::Error::Validation(msgs) => {
            let field = msgs.first().and_then(|m| m.split_whitespace().next()).unwrap_or("");
            let anchor = key_line(&src, None, field).map(|l| format!(":{l}")).unwrap_or_default();
            CliError::Config(format!("{}{anchor}: {}", config.display(), msgs.join(", ")))
        }
        other => other.into(),
    })?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", artifacts::to_json(&report));
    Ok(if report.regime == Regime::Case3Unsupported { 6 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { config, out } => cmd_run(&config, out),
        Cmd::Sweep { config, out } => cmd_sweep(&config, out),
        Cmd::Fit { kind, dir, convention, from, to } => cmd_fit(kind, &dir, convention, from, to),
        Cmd::Regime { config } => cmd_regime(&config),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
