//! Executing one run and writing its directory: `config.toml`, `series.csv`,
//! `snapshots/*.csv` and `summary.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tcfilm_core::asymptotics::TimeSeries;
use tcfilm_core::diagnostics::energy_balance_residual;
use tcfilm_core::stepping::{advance, Event, EventKind, Scheme, Trajectory};
use tcfilm_core::Error;

use crate::config::RunConfig;
use crate::error::CliError;

pub const SERIES_HEADER: &str = "t,mass,energy,diss_cum,min_h,re_a1,im_a1,re_a2,im_a2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    Touchdown,
    Blowup,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Completed => 0,
            Status::Touchdown => 3,
            Status::Blowup => 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub status: Status,
    pub model: String,
    pub scheme: Scheme,
    pub n_grid: usize,
    pub steps: usize,
    pub events: Vec<Event>,
    pub final_time: Option<f64>,
    pub final_mass: Option<f64>,
    pub final_energy: Option<f64>,
    pub max_balance_residual: Option<f64>,
}

pub fn config_hash(src: &str) -> String {
    format!("{:x}", Sha256::digest(src.as_bytes()))
}

fn num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("write to string");
}

fn series_csv(traj: &Trajectory, stride: usize) -> String {
    let d = &traj.diagnostics;
    let mut out = String::with_capacity(200 * (d.len() / stride + 1));
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for i in (0..d.len()).step_by(stride) {
        let cols = [
            d.t[i], d.mass[i], d.energy[i], d.diss_cum[i], d.min_h[i], d.a1[i].re, d.a1[i].im, d.a2[i].re, d.a2[i].im,
        ];
        for (j, v) in cols.into_iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            num(&mut out, v);
        }
        out.push('\n');
    }
    out
}

fn snapshot_csv(h: &tcfilm_core::spectral::PeriodicField) -> String {
    let mut out = String::from("theta,h\n");
    for (j, v) in h.values().iter().enumerate() {
        num(&mut out, h.theta(j));
        out.push(',');
        num(&mut out, *v);
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs `cfg` and writes every artifact into `dir`. `src` is the config text
/// that is copied into the directory and hashed.
pub fn execute(cfg: &RunConfig, src: &str, dir: &Path) -> Result<(Summary, Option<Trajectory>), CliError> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir).map_err(|e| CliError::Io(format!("{}: {e}", snap_dir.display())))?;
    write(&dir.join("config.toml"), src)?;

    let h0 = cfg.initial_field()?;
    let solver = cfg.solver_config();
    let mut summary = Summary {
        config_hash: config_hash(src),
        status: Status::Completed,
        model: cfg.model.name().to_string(),
        scheme: solver.scheme,
        n_grid: h0.len(),
        steps: 0,
        events: Vec::new(),
        final_time: None,
        final_mass: None,
        final_energy: None,
        max_balance_residual: None,
    };
    let traj = match advance(&cfg.model, &h0, &solver) {
        Ok(traj) => traj,
        Err(Error::Blowup { t }) => {
            summary.status = Status::Blowup;
            summary.final_time = Some(t);
            write(&dir.join("summary.json"), &to_json(&summary))?;
            return Ok((summary, None));
        }
        Err(e) => return Err(e.into()),
    };

    write(&dir.join("series.csv"), &series_csv(&traj, solver.output_stride))?;
    for snap in &traj.snapshots {
        write(&snap_dir.join(format!("step_{:08}.csv", snap.step)), &snapshot_csv(&snap.h))?;
    }
    let d = &traj.diagnostics;
    if traj.touched_down() {
        summary.status = Status::Touchdown;
    }
    summary.steps = traj.steps();
    summary.events = traj.events.clone();
    summary.final_time = d.t.last().copied();
    summary.final_mass = d.mass.last().copied();
    summary.final_energy = d.energy.last().copied();
    summary.max_balance_residual = Some(energy_balance_residual(d));
    write(&dir.join("summary.json"), &to_json(&summary))?;
    Ok((summary, Some(traj)))
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

/// Columns of `series.csv` needed by the fits.
pub struct Series {
    pub energy: TimeSeries<f64>,
    pub a1: TimeSeries<Complex64>,
    pub a2: TimeSeries<Complex64>,
}

pub fn read_series(path: &Path) -> Result<Series, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(SERIES_HEADER) {
        return Err(CliError::Config(format!("{}:1: unexpected header", path.display())));
    }
    let (mut t, mut e, mut a1, mut a2) = (vec![], vec![], vec![], vec![]);
    for (i, line) in lines.enumerate() {
        let cols: Vec<f64> = line
            .split(',')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|err| CliError::Config(format!("{}:{}: {err}", path.display(), i + 2)))?;
        if cols.len() != 9 {
            return Err(CliError::Config(format!("{}:{}: expected 9 columns", path.display(), i + 2)));
        }
        t.push(cols[0]);
        e.push(cols[2]);
        a1.push(Complex64::new(cols[5], cols[6]));
        a2.push(Complex64::new(cols[7], cols[8]));
    }
    if t.len() < 2 {
        return Err(CliError::InsufficientData(format!("{} has {} rows", path.display(), t.len())));
    }
    Ok(Series {
        energy: TimeSeries::new(t.clone(), e)?,
        a1: TimeSeries::new(t.clone(), a1)?,
        a2: TimeSeries::new(t, a2)?,
    })
}

/// Extinction time of a run, if one was recorded.
pub fn extinction_time(events: &[Event]) -> Option<f64> {
    events.iter().find(|e| e.kind == EventKind::Extinction).map(|e| e.time)
}
