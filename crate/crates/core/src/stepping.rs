//! Time integration: exponential (ETDRK2), linearly implicit (ROS2) and
//! explicit (RK4) steppers, and the event-tracking driver [`advance`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{dissipation_rate, DiagnosticsSeries};
use crate::error::{Error, Result};
use crate::models::{frozen_mobility, linear_symbol, max_mobility, rhs, JacobianCache, ModelSpec, Variant};
use crate::spectral::{forward, inverse_real, wavenumber, PeriodicField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Etdrk2,
    Rk4,
    Ros2,
}

impl Scheme {
    /// ROS2 for the degenerate fluxes, ETDRK2 otherwise.
    pub fn recommended(spec: &ModelSpec) -> Self {
        match spec.variant {
            Variant::PowerlawBeta0 | Variant::Mollified { .. } => Scheme::Ros2,
            _ => Scheme::Etdrk2,
        }
    }
}

/// Step used when a configuration does not set one.
pub const DEFAULT_DT0: f64 = 1e-4;

/// Consecutive sub-tolerance steps needed before extinction is declared.
pub const EXTINCTION_STREAK: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub dt0: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub tol_extinction: f64,
    pub h_min: f64,
    pub output_stride: usize,
}

impl SolverConfig {
    pub fn new(scheme: Scheme, dt0: f64, t_end: f64) -> Self {
        Self {
            scheme,
            dt0,
            cfl: 0.5,
            t_end,
            tol_extinction: 1e-12,
            h_min: 1e-6,
            output_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("dt0", self.dt0), ("cfl", self.cfl), ("t_end", self.t_end), ("h_min", self.h_min)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.tol_extinction.is_finite() && self.tol_extinction >= 0.0) {
            return Err(Error::Config(format!(
                "tol_extinction must be non-negative, got {}",
                self.tol_extinction
            )));
        }
        if self.output_stride == 0 {
            return Err(Error::Config("output_stride must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Extinction,
    Touchdown,
    TEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub step: usize,
    pub h: PeriodicField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Times of every accepted step, starting at 0.
    pub times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: DiagnosticsSeries,
    pub events: Vec<Event>,
    pub final_state: PeriodicField,
}

impl Trajectory {
    pub fn event(&self, kind: EventKind) -> Option<f64> {
        self.events.iter().find(|e| e.kind == kind).map(|e| e.time)
    }

    pub fn touched_down(&self) -> bool {
        self.event(EventKind::Touchdown).is_some()
    }

    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }
}

const PHI_SERIES_RADIUS: f64 = 0.1;
const PHI_SERIES_TERMS: usize = 14;

/// `(exp(z), phi1(z), phi2(z))` with `phi1 = (e^z - 1)/z`,
/// `phi2 = (e^z - 1 - z)/z^2`; power series near the origin.
pub fn phi_functions(z: Complex64) -> (Complex64, Complex64, Complex64) {
    let e = z.exp();
    if z.norm() < PHI_SERIES_RADIUS {
        let mut p1 = Complex64::new(0.0, 0.0);
        let mut p2 = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        let mut fact = 1.0;
        for j in 0..PHI_SERIES_TERMS {
            // term = z^j; fact = (j+1)!
            fact *= (j + 1) as f64;
            p1 += term / fact;
            p2 += term / (fact * (j + 2) as f64);
            term *= z;
        }
        (e, p1, p2)
    } else {
        let one = Complex64::new(1.0, 0.0);
        (e, (e - one) / z, (e - one - z) / (z * z))
    }
}

/// Per-mode exponential weights for a fixed `dt`.
#[derive(Debug, Clone)]
struct ExpWeights {
    lambda: Vec<Complex64>,
    e: Vec<Complex64>,
    p1: Vec<Complex64>,
    p2: Vec<Complex64>,
    dt: f64,
}

impl ExpWeights {
    fn new(lambda: Vec<Complex64>, dt: f64) -> Self {
        let mut e = Vec::with_capacity(lambda.len());
        let mut p1 = Vec::with_capacity(lambda.len());
        let mut p2 = Vec::with_capacity(lambda.len());
        for &l in &lambda {
            let (a, b, c) = phi_functions(l * dt);
            e.push(a);
            p1.push(b * dt);
            p2.push(c * dt);
        }
        Self { lambda, e, p1, p2, dt }
    }
}

/// Cox-Matthews ETDRK2 for `u' = L u + N(u)`, `N = f - L`.
fn etdrk2_core(
    u: &PeriodicField,
    w: &ExpWeights,
    f: &dyn Fn(&PeriodicField) -> Result<PeriodicField>,
) -> Result<PeriodicField> {
    let uh = forward(u.values());
    let fu = forward(f(u)?.values());
    let nu: Vec<Complex64> = fu.iter().zip(&uh).zip(&w.lambda).map(|((f, u), l)| f - l * u).collect();
    let ah: Vec<Complex64> = (0..uh.len()).map(|i| w.e[i] * uh[i] + w.p1[i] * nu[i]).collect();
    let a = PeriodicField::from_raw(inverse_real(&ah));
    let fa = forward(f(&a)?.values());
    let out: Vec<Complex64> = (0..uh.len())
        .map(|i| {
            let na = fa[i] - w.lambda[i] * ah[i];
            ah[i] + w.p2[i] * (na - nu[i])
        })
        .collect();
    finite(PeriodicField::from_raw(inverse_real(&out)))
}

fn finite(h: PeriodicField) -> Result<PeriodicField> {
    if h.is_finite() {
        Ok(h)
    } else {
        Err(Error::Blowup { t: f64::NAN })
    }
}

/// Linear part used by ETDRK2 about the mean thickness `c_ref`. Case-1
/// variants keep the full symbol (transport and damping); the others keep
/// only the real damping, with a frozen mobility for degenerate fluxes.
fn linear_part(spec: &ModelSpec, h: &PeriodicField, c_ref: f64) -> Result<Vec<Complex64>> {
    let n = h.len();
    let frozen = match spec.variant {
        Variant::PowerlawBeta0 | Variant::Mollified { .. } => Some(frozen_mobility(spec, h)?),
        _ => None,
    };
    (0..n)
        .map(|idx| {
            let k = wavenumber(idx, n);
            let kf = k as f64;
            let nyquist = 2 * k.unsigned_abs() as usize == n;
            Ok(match frozen {
                Some(a0) => Complex64::new(a0 * (kf * kf - kf.powi(4)), 0.0),
                None => {
                    let l = linear_symbol(spec, c_ref, k)?;
                    if spec.is_case1() && !nyquist {
                        l
                    } else {
                        Complex64::new(l.re, 0.0)
                    }
                }
            })
        })
        .collect()
}

/// One ETDRK2 step about the mean thickness `c_ref`.
pub fn step_etdrk2(spec: &ModelSpec, h: &PeriodicField, dt: f64, c_ref: f64) -> Result<PeriodicField> {
    let w = ExpWeights::new(linear_part(spec, h, c_ref)?, dt);
    etdrk2_core(h, &w, &|u| rhs(spec, u))
}

/// One classical RK4 step on the full right-hand side.
pub fn step_rk4(spec: &ModelSpec, h: &PeriodicField, dt: f64) -> Result<PeriodicField> {
    let k1 = rhs(spec, h)?;
    let k2 = rhs(spec, &h.axpy(0.5 * dt, &k1))?;
    let k3 = rhs(spec, &h.axpy(0.5 * dt, &k2))?;
    let k4 = rhs(spec, &h.axpy(dt, &k3))?;
    let out: Vec<f64> = (0..h.len())
        .map(|i| {
            h.values()[i]
                + dt / 6.0 * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i])
        })
        .collect();
    finite(PeriodicField::from_raw(out))
}

const ROS2_GAMMA: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;

/// One step of the second-order Rosenbrock W-method (ROS2) with the exact
/// Jacobian of the discrete right-hand side.
pub fn step_ros2(spec: &ModelSpec, h: &PeriodicField, dt: f64, cache: &JacobianCache) -> Result<PeriodicField> {
    let n = h.len();
    let j = cache.jacobian(spec, h)?;
    let w = DMatrix::identity(n, n) - j * (ROS2_GAMMA * dt);
    let lu = w.lu();
    let singular = || Error::Domain("singular ROS2 stage matrix".into());
    let f0 = DVector::from_column_slice(rhs(spec, h)?.values());
    let k1 = lu.solve(&f0).ok_or_else(singular)?;
    let y1: Vec<f64> = h.values().iter().zip(k1.iter()).map(|(y, k)| y + dt * k).collect();
    let y1 = finite(PeriodicField::from_raw(y1))?;
    let f1 = DVector::from_column_slice(rhs(spec, &y1)?.values());
    let k2 = lu.solve(&(f1 - &k1 * 2.0)).ok_or_else(singular)?;
    let out: Vec<f64> = (0..n)
        .map(|i| h.values()[i] + dt * (1.5 * k1[i] + 0.5 * k2[i]))
        .collect();
    finite(PeriodicField::from_raw(out))
}

/// Explicit stability bound `cfl * 2 / (M k_max^4)`, `k_max = n/3`.
pub fn stability_dt(spec: &ModelSpec, h: &PeriodicField, cfl: f64) -> Result<f64> {
    let m = max_mobility(spec, h)?;
    let k_max = (h.len() / 3) as f64;
    Ok(cfl * 2.0 / (m * k_max.powi(4)))
}

struct Stepper<'a> {
    spec: &'a ModelSpec,
    cfg: &'a SolverConfig,
    c_ref: f64,
    weights: Option<ExpWeights>,
    jac: Option<JacobianCache>,
}

impl<'a> Stepper<'a> {
    fn new(spec: &'a ModelSpec, cfg: &'a SolverConfig, h0: &PeriodicField) -> Self {
        let jac = (cfg.scheme == Scheme::Ros2).then(|| JacobianCache::new(spec, h0.len()));
        Self { spec, cfg, c_ref: h0.mean(), weights: None, jac }
    }

    fn step(&mut self, h: &PeriodicField, dt: f64) -> Result<PeriodicField> {
        match self.cfg.scheme {
            Scheme::Rk4 => step_rk4(self.spec, h, dt),
            Scheme::Ros2 => step_ros2(self.spec, h, dt, self.jac.as_ref().expect("cache built for ros2")),
            Scheme::Etdrk2 => {
                let frozen = matches!(self.spec.variant, Variant::PowerlawBeta0 | Variant::Mollified { .. });
                if frozen {
                    return step_etdrk2(self.spec, h, dt, self.c_ref);
                }
                let stale = self.weights.as_ref().is_none_or(|w| w.dt != dt);
                if stale {
                    self.weights = Some(ExpWeights::new(linear_part(self.spec, h, self.c_ref)?, dt));
                }
                let spec = self.spec;
                etdrk2_core(h, self.weights.as_ref().expect("weights set"), &|u| rhs(spec, u))
            }
        }
    }
}

/// Integrates from `h0` to `cfg.t_end`. Extinction is recorded and the run
/// continues; touchdown is recorded and the run stops with the partial
/// trajectory. A non-finite state is an error.
pub fn advance(spec: &ModelSpec, h0: &PeriodicField, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    spec.validate()?;
    if !h0.is_finite() {
        return Err(Error::Config("initial thickness is not finite".into()));
    }
    if spec.requires_positivity() && h0.min() <= 0.0 {
        return Err(Error::Positivity { min_h: h0.min() });
    }
    if cfg.scheme == Scheme::Rk4 {
        let bound = stability_dt(spec, h0, cfg.cfl)?;
        if cfg.dt0 > bound {
            return Err(Error::Config(format!(
                "dt0 = {:e} exceeds the explicit stability bound {bound:e}",
                cfg.dt0
            )));
        }
    }

    let mut stepper = Stepper::new(spec, cfg, h0);
    let mut h = h0.clone();
    let mut t = 0.0;
    let mut diagnostics = DiagnosticsSeries::default();
    diagnostics.push(0.0, &h, dissipation_rate(spec, &h)?);
    let mut times = vec![0.0];
    let mut snapshots = vec![Snapshot { t: 0.0, step: 0, h: h.clone() }];
    let mut events = Vec::new();
    let mut streak = 0usize;
    let mut streak_start = 0.0;
    let mut extinct = false;
    let mut step = 0usize;
    let done = |t: f64| t >= cfg.t_end * (1.0 - 1e-12);
    let mut touched = false;

    // a film that starts on a circle has nothing to extinguish
    if diagnostics.energy[0] <= cfg.tol_extinction {
        extinct = true;
    }

    while !done(t) {
        let mut dt = cfg.dt0.min(cfg.t_end - t);
        if cfg.scheme == Scheme::Rk4 {
            dt = dt.min(stability_dt(spec, &h, cfg.cfl)?);
        }
        let next = match stepper.step(&h, dt) {
            Ok(next) => next,
            Err(Error::Positivity { .. }) => {
                events.push(Event { kind: EventKind::Touchdown, time: t });
                touched = true;
                break;
            }
            Err(Error::Blowup { .. }) => return Err(Error::Blowup { t: t + dt }),
            Err(e) => return Err(e),
        };
        let t_next = if done(t + dt) { cfg.t_end } else { t + dt };
        let rate = match dissipation_rate(spec, &next) {
            Ok(r) => r,
            Err(Error::Positivity { .. }) => {
                events.push(Event { kind: EventKind::Touchdown, time: t_next });
                touched = true;
                break;
            }
            Err(e) => return Err(e),
        };
        h = next;
        t = t_next;
        step += 1;
        diagnostics.push(t, &h, rate);
        times.push(t);
        if step % cfg.output_stride == 0 {
            snapshots.push(Snapshot { t, step, h: h.clone() });
        }
        if h.min() < cfg.h_min {
            events.push(Event { kind: EventKind::Touchdown, time: t });
            touched = true;
            break;
        }
        let e = *diagnostics.energy.last().expect("pushed");
        if e <= cfg.tol_extinction {
            if streak == 0 {
                streak_start = t;
            }
            streak += 1;
            if streak >= EXTINCTION_STREAK && !extinct {
                extinct = true;
                events.push(Event { kind: EventKind::Extinction, time: streak_start });
            }
        } else {
            streak = 0;
        }
    }
    if !touched {
        events.push(Event { kind: EventKind::TEnd, time: t });
    }
    Ok(Trajectory { times, snapshots, diagnostics, events, final_state: h })
}
