//! `tcfilm sweep`: one run per point of the `[grid]` product.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use tcfilm_core::asymptotics::{fit_spiral, SpiralConvention, TimeSeries};
use tcfilm_core::models::Variant;
use tcfilm_core::rheology::ConstitutiveLaw;
use tcfilm_core::stepping::{EventKind, Trajectory};

use crate::artifacts::{execute, extinction_time, Status};
use crate::config::{key_line, RunConfig};
use crate::error::CliError;

pub const THREADS_ENV: &str = "TCFILM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub p: Option<f64>,
    pub beta_tilde: Option<f64>,
    pub c: Option<f64>,
    pub amplitude: Option<f64>,
}

/// Grid points in row-major order, the last axis varying fastest.
pub fn grid_points(cfg: &RunConfig) -> Vec<Point> {
    let Some(grid) = &cfg.grid else { return Vec::new() };
    let axis = |v: &[f64]| -> Vec<Option<f64>> {
        if v.is_empty() {
            vec![None]
        } else {
            v.iter().copied().map(Some).collect()
        }
    };
    if grid.p.is_empty() && grid.beta_tilde.is_empty() && grid.c.is_empty() && grid.amplitude.is_empty() {
        return Vec::new();
    }
    let mut points = Vec::new();
    for &p in &axis(&grid.p) {
        for &beta_tilde in &axis(&grid.beta_tilde) {
            for &c in &axis(&grid.c) {
                for &amplitude in &axis(&grid.amplitude) {
                    points.push(Point { p, beta_tilde, c, amplitude });
                }
            }
        }
    }
    points
}

/// The base configuration with the point's values substituted.
pub fn apply(base: &RunConfig, pt: &Point) -> Result<RunConfig, String> {
    let mut cfg = base.clone();
    cfg.grid = None;
    cfg.output.dir = None;
    if let Some(p) = pt.p {
        if matches!(cfg.model.variant, Variant::NewtonianPv1 { .. }) {
            if p != 1.0 {
                return Err(format!("newtonian_pv1 cannot take p = {p}"));
            }
        } else {
            cfg.model.law = ConstitutiveLaw::power_law(p).map_err(|e| e.to_string())?;
            if let Variant::Mollified { cutoff, .. } = &mut cfg.model.variant {
                cutoff.alpha = 1.0 / p;
            }
        }
    }
    if let Some(b) = pt.beta_tilde {
        match &mut cfg.model.variant {
            Variant::GeneralCase1 { beta_tilde } | Variant::PowerlawCase1 { beta_tilde } => *beta_tilde = b,
            _ => return Err("beta_tilde can only be swept for case-1 models".into()),
        }
    }
    if let Some(c) = pt.c {
        cfg.initial.c = c;
    }
    if let Some(a) = pt.amplitude {
        match cfg.initial.modes.first_mut() {
            Some(m) => m.amplitude = a,
            None => return Err("amplitude sweeps need at least one initial mode".into()),
        }
    }
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct Row {
    pub dir: String,
    pub p: f64,
    pub beta_tilde: Option<f64>,
    pub c: f64,
    pub amplitude: Option<f64>,
    pub status: String,
    pub events: Vec<EventKind>,
    pub t_star: Option<f64>,
    pub k_fit: Option<f64>,
    pub error: Option<String>,
}

pub const SUMMARY_HEADER: &str = "run,p,beta_tilde,c,amplitude,status,event,events,t_star,K_fit,error";

fn event_name(k: EventKind) -> &'static str {
    match k {
        EventKind::Extinction => "extinction",
        EventKind::Touchdown => "touchdown",
        EventKind::TEnd => "t_end",
    }
}

impl Row {
    fn csv(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        let last = self.events.last().map(|&k| event_name(k)).unwrap_or(self.status.as_str());
        let events: Vec<&str> = self.events.iter().map(|&k| event_name(k)).collect();
        let error = self.error.as_deref().unwrap_or("").replace(['"', '\n'], " ");
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},\"{}\"",
            self.dir,
            f(Some(self.p)),
            f(self.beta_tilde),
            f(Some(self.c)),
            f(self.amplitude),
            self.status,
            last,
            events.join(";"),
            f(self.t_star),
            f(self.k_fit),
            error
        )
        .expect("write to string");
        s
    }
}

/// Spiral amplitude over the last decade of a case-1 run.
fn spiral_k(cfg: &RunConfig, traj: &Trajectory) -> Option<f64> {
    let beta = cfg.model.beta_tilde()?;
    let d = &traj.diagnostics;
    let a1 = TimeSeries::new(d.t.clone(), d.a1.clone()).ok()?;
    let t_end = *d.t.last()?;
    fit_spiral(&a1, cfg.initial.c, &cfg.model.law, beta, SpiralConvention::PsiPrime, (t_end / 10.0, t_end))
        .ok()?
        .param("K_fit")
}

fn run_point(base: &RunConfig, pt: &Point, name: String, out: &Path) -> Row {
    let mut row = Row {
        dir: name.clone(),
        p: pt.p.unwrap_or(base.model.law.p()),
        beta_tilde: pt.beta_tilde.or(base.model.beta_tilde()),
        c: pt.c.unwrap_or(base.initial.c),
        amplitude: pt.amplitude.or(base.initial.modes.first().map(|m| m.amplitude)),
        status: "error".into(),
        events: Vec::new(),
        t_star: None,
        k_fit: None,
        error: None,
    };
    let dir = out.join(&name);
    let result = apply(base, pt).map_err(CliError::Config).and_then(|cfg| {
        let src = toml::to_string(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate(&dir.join("config.toml"), &src)?;
        let (summary, traj) = execute(&cfg, &src, &dir)?;
        Ok((cfg, summary, traj))
    });
    match result {
        Ok((cfg, summary, traj)) => {
            row.status = match summary.status {
                Status::Completed => "completed",
                Status::Touchdown => "touchdown",
                Status::Blowup => "blowup",
            }
            .into();
            row.events = summary.events.iter().map(|e| e.kind).collect();
            row.t_star = extinction_time(&summary.events);
            row.k_fit = traj.as_ref().and_then(|t| spiral_k(&cfg, t));
        }
        Err(e) => {
            // keep the directory so the failure can be inspected
            let _ = fs::create_dir_all(&dir);
            let _ = fs::write(dir.join("error.txt"), format!("{e}\n"));
            row.error = Some(e.to_string());
        }
    }
    row
}

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn sweep(config: &Path, out: &Path) -> Result<Vec<Row>, CliError> {
    let (base, src) = RunConfig::load(config)?;
    let points = grid_points(&base);
    if points.is_empty() {
        let line = key_line(&src, Some("grid"), "");
        return Err(CliError::Config(match line {
            Some(l) => format!("{}:{l}: the grid has no points", config.display()),
            None => format!("{}: no [grid] section", config.display()),
        }));
    }
    let cap = thread_cap()?;
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let width = (points.len() - 1).to_string().len().max(4);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cap {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    let rows: Vec<Row> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, pt)| run_point(&base, pt, format!("run_{i:0width$}"), out))
            .collect()
    });
    let mut csv = String::from(SUMMARY_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv());
        csv.push('\n');
    }
    let path = out.join("sweep_summary.csv");
    fs::write(&path, csv).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(rows)
}
