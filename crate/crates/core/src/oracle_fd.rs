//! Conservative finite-difference discretisation of the same models, used
//! to cross-check the spectral solver on short runs.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, Variant};
use crate::spectral::{from_spectrum, to_spectrum, PeriodicField};

/// Uniform grid of `n_fd` nodes on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FdGrid {
    pub n_fd: usize,
}

impl FdGrid {
    pub fn new(n_fd: usize) -> Result<Self> {
        if n_fd < 8 {
            return Err(Error::Config(format!("finite-difference grid needs at least 8 nodes, got {n_fd}")));
        }
        Ok(Self { n_fd })
    }

    /// Grid fine enough to check a spectral run on `n` points.
    pub fn for_comparison(n_fd: usize, n: usize) -> Result<Self> {
        if n_fd < 4 * n {
            return Err(Error::Config(format!("n_fd = {n_fd} is below 4 n = {}", 4 * n)));
        }
        Self::new(n_fd)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n_fd as f64
    }

    /// Trigonometric interpolant of `h` sampled on this grid.
    pub fn sample(&self, h: &PeriodicField) -> Result<PeriodicField> {
        if h.len() > self.n_fd {
            return Err(Error::Config("cannot sample onto a coarser grid".into()));
        }
        from_spectrum(&to_spectrum(h), self.n_fd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdScheme {
    ForwardEuler,
    /// Backward Euler with Newton iterations; needed when the mobility is
    /// unbounded (`beta = 0`, `p > 1`).
    BackwardEuler,
    /// Two-step backward differentiation, started with one backward Euler
    /// step.
    Bdf2,
}

fn check(spec: &ModelSpec, h: &PeriodicField) -> Result<()> {
    if matches!(spec.variant, Variant::Mollified { .. }) {
        return Err(Error::Config("the finite-difference oracle has no mollified variant".into()));
    }
    if h.len() < 8 {
        return Err(Error::Config("finite-difference grid needs at least 8 nodes".into()));
    }
    if spec.requires_positivity() && h.min() <= 0.0 {
        return Err(Error::Positivity { min_h: h.min() });
    }
    Ok(())
}

/// Face values `(h_{j+1/2}, Q_{j+1/2})`.
fn faces(h: &[f64], dx: f64) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let at = |j: usize, o: isize| h[(j as isize + o).rem_euclid(n as isize) as usize];
    let hf = (0..n).map(|j| 0.5 * (at(j, 0) + at(j, 1))).collect();
    let qf = (0..n)
        .map(|j| {
            let d1 = (at(j, 1) - at(j, 0)) / dx;
            let d3 = (at(j, 2) - 3.0 * at(j, 1) + 3.0 * at(j, 0) - at(j, -1)) / dx.powi(3);
            d1 + d3
        })
        .collect();
    (hf, qf)
}

/// `-(F_{j+1/2} - F_{j-1/2}) / dx`, with the flux evaluated at faces from
/// the averaged thickness and a centred `Q`.
pub fn rhs_fd(spec: &ModelSpec, h: &PeriodicField) -> Result<PeriodicField> {
    check(spec, h)?;
    let n = h.len();
    let dx = 2.0 * PI / n as f64;
    let (hf, qf) = faces(h.values(), dx);
    let f: Vec<f64> = hf.iter().zip(&qf).map(|(&a, &b)| spec.pointwise_flux(a, b)).collect::<Result<_>>()?;
    let out = (0..n).map(|j| -(f[j] - f[(j + n - 1) % n]) / dx).collect();
    PeriodicField::new(out)
}

fn rhs_jacobian(spec: &ModelSpec, h: &[f64]) -> Result<DMatrix<f64>> {
    let n = h.len();
    let dx = 2.0 * PI / n as f64;
    let (hf, qf) = faces(h, dx);
    let d3 = dx.powi(3);
    // dF_{j+1/2}/dh_{j+o}, o = -1..=2
    let stencil_q = [-1.0 / d3, -1.0 / dx + 3.0 / d3, 1.0 / dx - 3.0 / d3, 1.0 / d3];
    let mut jf = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let (fh, fq) = spec.pointwise_partials(hf[j], qf[j])?;
        for (i, o) in (-1isize..=2).enumerate() {
            let col = (j as isize + o).rem_euclid(n as isize) as usize;
            let dh = if o == 0 || o == 1 { 0.5 } else { 0.0 };
            jf[(j, col)] += fh * dh + fq * stencil_q[i];
        }
    }
    let mut jr = DMatrix::zeros(n, n);
    for j in 0..n {
        let jm = (j + n - 1) % n;
        for c in 0..n {
            let v = -(jf[(j, c)] - jf[(jm, c)]) / dx;
            if v != 0.0 {
                jr[(j, c)] = v;
            }
        }
    }
    Ok(jr)
}

/// Largest `|dF/dQ|` over the faces.
pub fn max_face_mobility(spec: &ModelSpec, h: &PeriodicField) -> Result<f64> {
    check(spec, h)?;
    let dx = 2.0 * PI / h.len() as f64;
    let (hf, qf) = faces(h.values(), dx);
    hf.iter()
        .zip(&qf)
        .map(|(&a, &b)| spec.effective_mobility(a, b))
        .try_fold(0.0f64, |m, v| Ok(m.max(v?)))
}

const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX: usize = 60;
const LINE_SEARCH_HALVINGS: usize = 30;
/// Accepted residual once Newton stalls at the kinks of the flux.
const STALL_TOL: f64 = 1e-8;

/// Solves `u - base - gdt * rhs_fd(u) = 0` by Newton with backtracking on
/// the residual. Plain Newton cycles on the `|Q|^(alpha-1) Q` flux when
/// `alpha < 1`.
fn implicit_solve(spec: &ModelSpec, base: &PeriodicField, guess: &PeriodicField, gdt: f64, t: f64) -> Result<PeriodicField> {
    let n = base.len();
    let scale = 1.0 + base.max_abs();
    let residual = |u: &PeriodicField| -> Result<DVector<f64>> {
        let r = rhs_fd(spec, u)?;
        Ok(DVector::from_fn(n, |i, _| u.values()[i] - base.values()[i] - gdt * r.values()[i]))
    };
    let mut u = guess.clone();
    let mut g = residual(&u)?;
    for _ in 0..NEWTON_MAX {
        let gnorm = g.amax();
        if gnorm <= NEWTON_TOL * scale {
            return Ok(u);
        }
        let mut jac = rhs_jacobian(spec, u.values())? * (-gdt);
        for i in 0..n {
            jac[(i, i)] += 1.0;
        }
        let delta = jac.lu().solve(&g).ok_or(Error::Blowup { t })?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..LINE_SEARCH_HALVINGS {
            let trial: Vec<f64> = u.values().iter().zip(delta.iter()).map(|(a, d)| a - lambda * d).collect();
            if let Ok(trial) = PeriodicField::new(trial) {
                if !spec.requires_positivity() || trial.min() > 0.0 {
                    let gt = residual(&trial)?;
                    if gt.amax() < gnorm {
                        accepted = Some((trial, gt));
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        let Some((next, gt)) = accepted else {
            break;
        };
        u = next;
        g = gt;
    }
    if g.amax() <= STALL_TOL * scale {
        Ok(u)
    } else {
        Err(Error::Blowup { t })
    }
}

/// Forward Euler on raw vectors; the inner loop avoids allocation and
/// modular indexing.
fn forward_euler(spec: &ModelSpec, h0: &PeriodicField, t_end: f64, dt: f64) -> Result<PeriodicField> {
    let n = h0.len();
    let dx = 2.0 * PI / n as f64;
    let inv_dx3 = 1.0 / dx.powi(3);
    // two ghost cells on the right, one on the left
    let mut h = vec![0.0; n + 3];
    h[1..=n].copy_from_slice(h0.values());
    let mut flux = vec![0.0; n + 1];
    let mut t = 0.0;
    while t < t_end {
        let step = dt.min(t_end - t);
        if step <= 1e-14 * t_end {
            break;
        }
        h[0] = h[n];
        h[n + 1] = h[1];
        h[n + 2] = h[2];
        for j in 1..=n {
            let q = (h[j + 1] - h[j]) / dx + (h[j + 2] - 3.0 * h[j + 1] + 3.0 * h[j] - h[j - 1]) * inv_dx3;
            flux[j] = spec.pointwise_flux(0.5 * (h[j] + h[j + 1]), q)?;
        }
        flux[0] = flux[n];
        let r = step / dx;
        for j in 1..=n {
            h[j] -= r * (flux[j] - flux[j - 1]);
        }
        t += step;
        if !h[1..=n].iter().all(|v| v.is_finite()) {
            return Err(Error::Blowup { t });
        }
        if spec.requires_positivity() {
            let m = h[1..=n].iter().copied().fold(f64::INFINITY, f64::min);
            if m <= 0.0 {
                return Err(Error::Positivity { min_h: m });
            }
        }
    }
    PeriodicField::new(h[1..=n].to_vec())
}

/// Integrates `h0` to `t_end` with fixed steps `dt` (the last one shortened).
/// Forward Euler requires `dt <= spacing^4 / (8 M)` with `M` the largest face
/// mobility of `h0`.
pub fn run_fd(spec: &ModelSpec, h0: &PeriodicField, t_end: f64, dt: f64, scheme: FdScheme) -> Result<PeriodicField> {
    check(spec, h0)?;
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::Config(format!("need dt > 0 and t_end >= 0, got {dt}, {t_end}")));
    }
    if scheme == FdScheme::ForwardEuler {
        let dx = 2.0 * PI / h0.len() as f64;
        let bound = 0.125 * dx.powi(4) / max_face_mobility(spec, h0)?.max(1e-300);
        if dt > bound {
            return Err(Error::Config(format!("dt = {dt:e} exceeds the explicit bound {bound:e}")));
        }
        return forward_euler(spec, h0, t_end, dt);
    }
    let mut h = h0.clone();
    let mut t = 0.0;
    let mut prev: Option<PeriodicField> = None;
    while t < t_end {
        let step = dt.min(t_end - t);
        if step <= 1e-14 * t_end {
            break;
        }
        let next = match prev.as_ref() {
            Some(old) if scheme == FdScheme::Bdf2 && step == dt => {
                let base = h.zip_map(old, |a, b| (4.0 * a - b) / 3.0);
                let guess = h.zip_map(old, |a, b| 2.0 * a - b);
                implicit_solve(spec, &base, &guess, 2.0 * step / 3.0, t + step)?
            }
            _ => implicit_solve(spec, &h, &h, step, t + step)?,
        };
        prev = Some(std::mem::replace(&mut h, next));
        t += step;
        if spec.requires_positivity() && h.min() <= 0.0 {
            return Err(Error::Positivity { min_h: h.min() });
        }
    }
    Ok(h)
}
