//! Mass, energy, dissipation and low Fourier modes along a run.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{flux_and_q, ModelSpec};
use crate::spectral::{derivative, integrate, to_spectrum, PeriodicField};

/// `integral h dtheta = 2 pi a_0`.
pub fn mass(h: &PeriodicField) -> f64 {
    integrate(h.values())
}

/// `E[v] = 1/2 integral (v'^2 - v^2) = pi sum (k^2 - 1)|v_k|^2`. Callers pass
/// `h - mean(h)`.
pub fn energy(v: &PeriodicField) -> f64 {
    PI * to_spectrum(v)
        .modes()
        .map(|(k, a)| ((k * k - 1) as f64) * a.norm_sqr())
        .sum::<f64>()
}

/// Energy of the fluctuation `h - mean(h)`.
pub fn fluctuation_energy(h: &PeriodicField) -> f64 {
    let m = h.mean();
    energy(&h.map(|x| x - m))
}

/// Grid-quadrature form of [`energy`].
pub fn energy_quadrature(v: &PeriodicField) -> Result<f64> {
    let dv = derivative(v, 1)?;
    let integrand: Vec<f64> = dv.values().iter().zip(v.values()).map(|(d, x)| d * d - x * x).collect();
    Ok(0.5 * integrate(&integrand))
}

/// `integral F[h] Q[h]`, so that `dE/dt = -rate` for the semi-discrete flow.
pub fn dissipation_rate(spec: &ModelSpec, h: &PeriodicField) -> Result<f64> {
    let (f, q) = flux_and_q(spec, h)?;
    let prod: Vec<f64> = f.values().iter().zip(q.values()).map(|(a, b)| a * b).collect();
    Ok(integrate(&prod))
}

/// Coefficient `a_k`, `|k| <= n/2`.
pub fn fourier_mode(h: &PeriodicField, k: i64) -> Result<Complex64> {
    let n = h.len() as i64;
    if k.abs() > n / 2 {
        return Err(Error::Domain(format!("mode {k} beyond the Nyquist limit of an {n}-point grid")));
    }
    let s = to_spectrum(h);
    Ok(if k == n / 2 {
        s.coeff(-k)
    } else if k < 0 {
        s.coeff(-k).conj()
    } else {
        s.coeff(k)
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub t: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    pub diss_cum: Vec<f64>,
    pub min_h: Vec<f64>,
    pub a0: Vec<Complex64>,
    pub a1: Vec<Complex64>,
    pub a2: Vec<Complex64>,
    /// Dissipation rate at each sample; feeds the trapezoid for `diss_cum`.
    pub rate: Vec<f64>,
}

impl DiagnosticsSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Appends the state `h` at time `t`; `rate` is its dissipation rate.
    pub fn push(&mut self, t: f64, h: &PeriodicField, rate: f64) {
        let s = to_spectrum(h);
        let a0 = s.coeff(0);
        let mut e = 0.0;
        for (k, a) in s.modes() {
            if k != 0 {
                e += ((k * k - 1) as f64) * a.norm_sqr();
            }
        }
        let cum = match (self.t.last(), self.rate.last(), self.diss_cum.last()) {
            (Some(&t0), Some(&r0), Some(&d0)) => d0 + 0.5 * (t - t0) * (r0 + rate),
            _ => 0.0,
        };
        self.t.push(t);
        self.mass.push(2.0 * PI * a0.re);
        self.energy.push(PI * e);
        self.diss_cum.push(cum);
        self.min_h.push(h.min());
        self.a0.push(a0);
        self.a1.push(s.coeff(1));
        self.a2.push(s.coeff(2));
        self.rate.push(rate);
    }

    /// `|E(t) + D(t) - E(0)|` at every sample.
    pub fn balance(&self) -> Vec<f64> {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        self.energy.iter().zip(&self.diss_cum).map(|(e, d)| (e + d - e0).abs()).collect()
    }
}

/// `max_t |E(t) + D(t) - E(0)|`.
pub fn energy_balance_residual(series: &DiagnosticsSeries) -> f64 {
    series.balance().into_iter().fold(0.0, f64::max)
}
