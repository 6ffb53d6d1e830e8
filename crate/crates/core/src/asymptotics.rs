//! Late-time fits: finite-time extinction of the energy, the logarithmic
//! spiral of the first Fourier mode, and the quadratic slaving of mode 2.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rheology::ConstitutiveLaw;
use crate::spectral::{shift_phase, PeriodicField};
use crate::stepping::{Snapshot, Trajectory};

/// Samples `v(t)` at increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries<T> {
    pub t: Vec<f64>,
    pub v: Vec<T>,
}

impl<T: Copy> TimeSeries<T> {
    pub fn new(t: Vec<f64>, v: Vec<T>) -> Result<Self> {
        if t.len() != v.len() {
            return Err(Error::Config(format!("{} times but {} values", t.len(), v.len())));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("times must be strictly increasing".into()));
        }
        Ok(Self { t, v })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Samples with `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> TimeSeries<T> {
        let (t, v) = self
            .t
            .iter()
            .zip(&self.v)
            .filter(|(&t, _)| t >= lo && t <= hi)
            .map(|(&t, &v)| (t, v))
            .unzip();
        TimeSeries { t, v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Extinction,
    Spiral,
    ManifoldRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub kind: FitKind,
    pub params: BTreeMap<String, f64>,
    pub predicted: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub window: [f64; 2],
    pub r_squared: f64,
}

impl FitReport {
    fn new(kind: FitKind, window: [f64; 2]) -> Self {
        Self {
            kind,
            params: BTreeMap::new(),
            predicted: BTreeMap::new(),
            flags: BTreeMap::new(),
            window,
            r_squared: 0.0,
        }
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }
}

/// Least-squares line `y = a + b x`; returns `(a, b, r^2)`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    (a, b, r2)
}

pub const MIN_EXTINCTION_SAMPLES: usize = 10;

/// Linear fit of `E^((1-alpha)/2)` against `t` over `window`. The slope
/// magnitude is `C_alpha` and the zero crossing is `t_star`; a non-negative
/// slope reports `t_star = inf` and `extinguishing = false`.
pub fn fit_extinction(e: &TimeSeries<f64>, alpha: f64, window: (f64, f64)) -> Result<FitReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("extinction fits need 0 < alpha < 1, got {alpha}")));
    }
    let w = e.window(window.0, window.1);
    if w.len() < MIN_EXTINCTION_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples in [{}, {}], need {MIN_EXTINCTION_SAMPLES}",
            w.len(),
            window.0,
            window.1
        )));
    }
    if let Some(bad) = w.v.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("energy {bad} is not positive in the fit window")));
    }
    let exponent = 0.5 * (1.0 - alpha);
    let y: Vec<f64> = w.v.iter().map(|v| v.powf(exponent)).collect();
    let (a, b, r2) = line_fit(&w.t, &y);
    let mut rep = FitReport::new(FitKind::Extinction, [w.t[0], *w.t.last().expect("non-empty")]);
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let span = rep.window[1] - rep.window[0];
    let extinguishing = b < -1e-12 * scale / span.max(f64::MIN_POSITIVE);
    let c_alpha = if extinguishing { -b } else { 0.0 };
    rep.params.insert("C_alpha".into(), c_alpha);
    rep.params.insert("t_star".into(), if extinguishing { a / c_alpha } else { f64::INFINITY });
    rep.params.insert("intercept".into(), a);
    rep.predicted.insert("exponent".into(), exponent);
    rep.flags.insert("extinguishing".into(), extinguishing);
    rep.r_squared = r2;
    Ok(rep)
}

/// Default extinction window: the last decade in time before the energy
/// first drops to `100 * tol`, i.e. `[t_e/10, t_e]`.
pub fn extinction_window(e: &TimeSeries<f64>, tol: f64) -> Option<(f64, f64)> {
    let idx = e.v.iter().position(|&v| v <= 100.0 * tol)?;
    if idx == 0 {
        return None;
    }
    let t_e = e.t[idx - 1];
    Some((0.1 * t_e, t_e))
}

/// Which normalisation of the spiral constants is predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpiralConvention {
    /// From `psi(beta~)` and `psi'(beta~)`, any rheology.
    PsiPrime,
    /// Power-law closed form in `beta`.
    PowerLaw,
}

/// Predicted `(K, K~)` for a film of mean thickness `c`.
pub fn predicted_spiral(c: f64, law: &ConstitutiveLaw, beta: f64, convention: SpiralConvention) -> Result<(f64, f64)> {
    match convention {
        SpiralConvention::PsiPrime => {
            let psi = law.psi(beta);
            let dpsi = law.psi_prime(beta)?;
            if psi == 0.0 {
                return Err(Error::Domain("psi(beta~) = 0: no drift, no spiral".into()));
            }
            Ok(((2.0 * c.powi(3) * dpsi / psi).sqrt(), c * c * dpsi / (2.0 * psi)))
        }
        SpiralConvention::PowerLaw => {
            let p = law.p();
            if !(beta > 0.0) {
                return Err(Error::Domain(format!("the power-law convention needs beta > 0, got {beta}")));
            }
            Ok((
                (c.powi(3) / (p * beta.powf(1.0 / p + 1.0))).sqrt(),
                (2.0 * p + 1.0) / (p * p) * (c * c / beta),
            ))
        }
    }
}

/// Phase increments at or beyond this are treated as ambiguous.
const UNWRAP_LIMIT: f64 = 0.9 * PI;

/// Nearest-branch phase continuation.
pub fn unwrap_phase(z: &[Complex64]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::with_capacity(z.len());
    for (i, w) in z.iter().enumerate() {
        let raw = w.arg();
        match out.last() {
            None => out.push(raw),
            Some(&prev) => {
                let mut d = raw - prev.rem_euclid(2.0 * PI);
                d -= 2.0 * PI * (d / (2.0 * PI)).round();
                if d.abs() >= UNWRAP_LIMIT {
                    return Err(Error::SamplingTooCoarse(format!(
                        "phase moves by {d:.3} rad between samples {} and {i}",
                        i - 1
                    )));
                }
                out.push(prev + d);
            }
        }
    }
    Ok(out)
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Mode amplitudes below this fraction of the mean thickness are round-off.
pub const SIGNAL_FLOOR: f64 = 1e-12;

/// Fits `a1(t) ~ (K/sqrt t) exp(i(K~ log t + C0))` in the frame rotating
/// with the drift `c psi(beta)`. `a1` is given in the laboratory frame.
pub fn fit_spiral(
    a1: &TimeSeries<Complex64>,
    c: f64,
    law: &ConstitutiveLaw,
    beta_like: f64,
    convention: SpiralConvention,
    window: (f64, f64),
) -> Result<FitReport> {
    let w = a1.window(window.0, window.1);
    if w.len() < 3 {
        return Err(Error::InsufficientData(format!("{} samples in the spiral window", w.len())));
    }
    if w.t[0] <= 0.0 {
        return Err(Error::Domain("spiral window must start after t = 0".into()));
    }
    let scale = w.v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if scale <= SIGNAL_FLOOR * c.abs() || w.v.iter().any(|z| !(z.norm() > 1e-14 * scale)) {
        return Err(Error::InsufficientData("no mode-1 signal in the window".into()));
    }
    let speed = c * law.psi(beta_like);
    let rotated: Vec<Complex64> = w.t.iter().zip(&w.v).map(|(&t, &z)| z * shift_phase(-1, speed * t)).collect();
    let amp: Vec<f64> = w.t.iter().zip(&rotated).map(|(t, z)| z.norm() * t.sqrt()).collect();
    let k_fit = amp.iter().sum::<f64>() / amp.len() as f64;
    let (lo, hi) = amp.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let phase = unwrap_phase(&rotated)?;
    let logt: Vec<f64> = w.t.iter().map(|t| t.ln()).collect();
    let (c0, kt, r2) = line_fit(&logt, &phase);
    let amp_log: Vec<f64> = rotated.iter().map(|z| z.norm().ln()).collect();
    let (_, decay, _) = line_fit(&logt, &amp_log);

    let mut rep = FitReport::new(FitKind::Spiral, [w.t[0], *w.t.last().expect("non-empty")]);
    rep.params.insert("K_fit".into(), k_fit);
    rep.params.insert("K_tilde_fit".into(), kt);
    rep.params.insert("C0".into(), wrap_angle(c0));
    rep.params.insert("drift".into(), (hi - lo) / k_fit);
    rep.params.insert("decay_exponent".into(), decay);
    rep.params.insert("speed".into(), speed);
    if let Ok((k, ktilde)) = predicted_spiral(c, law, beta_like, convention) {
        rep.predicted.insert("K".into(), k);
        rep.predicted.insert("K_tilde".into(), ktilde);
    }
    rep.r_squared = r2;
    Ok(rep)
}

/// Candidate slaving coefficients `|a2| / |a1|^2`.
pub fn manifold_candidates(c: f64, law: &ConstitutiveLaw, beta_tilde: f64) -> Result<(f64, f64)> {
    let r_a = law.psi(beta_tilde) / (8.0 * c.powi(3) * law.psi_prime(beta_tilde)?);
    let r_b = law.p() * beta_tilde / (4.0 * c.powi(3));
    Ok((r_a, r_b))
}

/// Median of `|a2| / |a1|^2` over `window`, with both candidate
/// coefficients and the closer one flagged.
pub fn manifold_ratio(
    a1: &TimeSeries<Complex64>,
    a2: &TimeSeries<Complex64>,
    c: f64,
    law: &ConstitutiveLaw,
    beta_tilde: f64,
    window: (f64, f64),
) -> Result<FitReport> {
    if a1.t != a2.t {
        return Err(Error::Config("mode series must share their sample times".into()));
    }
    let w1 = a1.window(window.0, window.1);
    let w2 = a2.window(window.0, window.1);
    if w1.is_empty() {
        return Err(Error::InsufficientData("empty manifold window".into()));
    }
    let scale = w1.v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if scale <= SIGNAL_FLOOR * c.abs() || w1.v.iter().any(|z| !(z.norm() > 1e-14 * scale)) {
        return Err(Error::InsufficientData("mode 1 vanishes in the manifold window".into()));
    }
    let mut ratios: Vec<f64> = w1.v.iter().zip(&w2.v).map(|(a, b)| b.norm() / a.norm_sqr()).collect();
    ratios.sort_by(f64::total_cmp);
    let m = ratios.len();
    let median = if m % 2 == 1 { ratios[m / 2] } else { 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]) };
    let spread = (ratios[m - 1] - ratios[0]) / median;

    let mut rep = FitReport::new(FitKind::ManifoldRatio, [w1.t[0], *w1.t.last().expect("non-empty")]);
    rep.params.insert("ratio".into(), median);
    rep.params.insert("spread".into(), spread);
    let (r_a, r_b) = manifold_candidates(c, law, beta_tilde)?;
    rep.predicted.insert("psi_prime".into(), r_a);
    rep.predicted.insert("power_law".into(), r_b);
    let closer_a = (median - r_a).abs() <= (median - r_b).abs();
    rep.flags.insert("matches_psi_prime".into(), closer_a);
    rep.flags.insert("matches_power_law".into(), !closer_a);
    rep.r_squared = 1.0;
    Ok(rep)
}

/// Multiplies `a_k` samples by `exp(i k speed t)`: the mode seen in the
/// frame rotating with angular velocity `speed`.
pub fn rotate_modes(series: &TimeSeries<Complex64>, k: i64, speed: f64) -> TimeSeries<Complex64> {
    TimeSeries {
        t: series.t.clone(),
        v: series.t.iter().zip(&series.v).map(|(&t, &z)| z * shift_phase(-k, speed * t)).collect(),
    }
}

fn rotate(h: &PeriodicField, angle: f64) -> PeriodicField {
    if angle == 0.0 {
        h.clone()
    } else {
        h.shift(-angle)
    }
}

/// Re-expresses a trajectory in the frame rotating with `speed`:
/// `h_rot(theta, t) = h(theta + speed t, t)`.
pub fn rotating_frame(traj: &Trajectory, speed: f64) -> Trajectory {
    let mut out = traj.clone();
    out.snapshots = traj
        .snapshots
        .iter()
        .map(|s| Snapshot { t: s.t, step: s.step, h: rotate(&s.h, speed * s.t) })
        .collect();
    let d = &mut out.diagnostics;
    for (i, &t) in traj.diagnostics.t.iter().enumerate() {
        d.a1[i] = traj.diagnostics.a1[i] * shift_phase(-1, speed * t);
        d.a2[i] = traj.diagnostics.a2[i] * shift_phase(-2, speed * t);
    }
    let t_last = traj.times.last().copied().unwrap_or(0.0);
    out.final_state = rotate(&traj.final_state, speed * t_last);
    out
}
