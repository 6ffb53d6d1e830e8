//! Run configuration: TOML schema, defaults, validation and initial data.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use tcfilm_core::models::ModelSpec;
use tcfilm_core::scaling::{PhysicalSetup, Thresholds};
use tcfilm_core::spectral::PeriodicField;
use tcfilm_core::stepping::{Scheme, SolverConfig, DEFAULT_DT0};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub initial: Initial,
    pub solver: SolverSection,
    #[serde(default)]
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
}

/// `h0 = c + sum amplitude cos(n theta + phase)`, plus an optional random
/// tail on modes `1..=tail_modes` when `tail_amplitude > 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    pub c: f64,
    #[serde(default)]
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tail_amplitude: f64,
    #[serde(default = "default_tail_modes")]
    pub tail_modes: u32,
    #[serde(default = "default_n_grid")]
    pub n_grid: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub n: u32,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Defaults to the recommended scheme for the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default = "default_dt0")]
    pub dt0: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_end: f64,
    #[serde(default = "default_tol_extinction")]
    pub tol_extinction: f64,
    #[serde(default = "default_h_min")]
    pub h_min: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

impl Default for Output {
    fn default() -> Self {
        Self { dir: None, stride: default_stride() }
    }
}

/// Sweep axes. An empty axis is not varied.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub beta_tilde: Vec<f64>,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub amplitude: Vec<f64>,
}

fn default_tail_modes() -> u32 {
    8
}
fn default_n_grid() -> usize {
    128
}
fn default_dt0() -> f64 {
    DEFAULT_DT0
}
fn default_cfl() -> f64 {
    0.5
}
fn default_tol_extinction() -> f64 {
    1e-12
}
fn default_h_min() -> f64 {
    1e-6
}
fn default_stride() -> usize {
    1
}

/// 1-based line of `key` inside `[section]` (top level when `None`).
pub fn key_line(src: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.trim_start_matches('[').split(']').next().unwrap_or("").trim();
            current = Some(name.to_string());
            if section == Some(name) && key.is_empty() {
                return Some(i + 1);
            }
            continue;
        }
        if current.as_deref() != section {
            continue;
        }
        if let Some(rest) = line.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    None
}

fn anchored(path: &Path, line: Option<usize>, msg: impl std::fmt::Display) -> CliError {
    match line {
        Some(l) => CliError::Config(format!("{}:{l}: {msg}", path.display())),
        None => CliError::Config(format!("{}: {msg}", path.display())),
    }
}

/// Parses TOML, mapping syntax and schema errors to line-anchored messages.
pub fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path, src: &str) -> Result<T, CliError> {
    toml::from_str(src).map_err(|e| {
        let line = e.span().map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1);
        anchored(path, line, e.message())
    })
}

pub fn read_source(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let src = read_source(path)?;
        let cfg: RunConfig = parse_toml(path, &src)?;
        cfg.validate(path, &src)?;
        Ok((cfg, src))
    }

    pub fn validate(&self, path: &Path, src: &str) -> Result<(), CliError> {
        self.model.validate().map_err(|e| anchored(path, key_line(src, Some("model"), ""), e))?;
        self.solver_config()
            .validate()
            .map_err(|e| anchored(path, key_line(src, Some("solver"), ""), e))?;
        if self.output.stride == 0 {
            return Err(anchored(path, key_line(src, Some("output"), "stride"), "stride must be at least 1"));
        }
        let init = &self.initial;
        let initial_line = |key| key_line(src, Some("initial"), key);
        if !init.c.is_finite() {
            return Err(anchored(path, initial_line("c"), "c must be finite"));
        }
        if !(init.tail_amplitude.is_finite() && init.tail_amplitude >= 0.0) {
            return Err(anchored(path, initial_line("tail_amplitude"), "tail_amplitude must be non-negative"));
        }
        if init.n_grid < 16 || init.n_grid % 2 == 1 {
            return Err(anchored(path, initial_line("n_grid"), format!("n_grid must be even and >= 16, got {}", init.n_grid)));
        }
        for m in &init.modes {
            if 2 * m.n as usize >= init.n_grid {
                return Err(anchored(path, initial_line("modes"), format!("mode {} is not resolved on {} points", m.n, init.n_grid)));
            }
            if !(m.amplitude.is_finite() && m.phase.is_finite()) {
                return Err(anchored(path, initial_line("modes"), "mode amplitudes and phases must be finite"));
            }
        }
        if self.model.requires_positivity() {
            let floor = init.c - self.tail().iter().chain(&init.modes).map(|m| m.amplitude.abs()).sum::<f64>();
            if !(floor > 0.0) {
                return Err(anchored(
                    path,
                    initial_line("c"),
                    format!("initial thickness may reach {floor}: c - sum |amplitude| must be positive"),
                ));
            }
        }
        Ok(())
    }

    pub fn scheme(&self) -> Scheme {
        self.solver.scheme.unwrap_or_else(|| Scheme::recommended(&self.model))
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            scheme: self.scheme(),
            dt0: s.dt0,
            cfl: s.cfl,
            t_end: s.t_end,
            tol_extinction: s.tol_extinction,
            h_min: s.h_min,
            output_stride: self.output.stride,
        }
    }

    /// Random tail modes drawn from `seed`.
    fn tail(&self) -> Vec<Mode> {
        let init = &self.initial;
        if init.tail_amplitude == 0.0 {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
        let top = (init.tail_modes as usize).min(init.n_grid / 2 - 1) as u32;
        (1..=top)
            .map(|n| Mode {
                n,
                amplitude: init.tail_amplitude * rng.random_range(-1.0..1.0),
                phase: rng.random_range(0.0..2.0 * PI),
            })
            .collect()
    }

    pub fn initial_field(&self) -> Result<PeriodicField, CliError> {
        let modes: Vec<Mode> = self.initial.modes.iter().cloned().chain(self.tail()).collect();
        let c = self.initial.c;
        PeriodicField::from_fn(self.initial.n_grid, |t| {
            c + modes.iter().map(|m| m.amplitude * (m.n as f64 * t + m.phase).cos()).sum::<f64>()
        })
        .map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Physical setup for `regime`, with optional classification thresholds.
#[derive(Debug, Clone, Deserialize)]
pub struct RegimeConfig {
    #[serde(flatten)]
    pub physical: PhysicalSetup,
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
}
