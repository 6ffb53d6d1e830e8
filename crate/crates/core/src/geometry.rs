//! Interface curve `r = 1 + eps h(theta)` and algebraic circle fits.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::asymptotics::TimeSeries;
use crate::error::{Error, Result};
use crate::spectral::{from_spectrum, to_spectrum, PeriodicField};
use crate::stepping::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleFit {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
    pub rms: f64,
}

impl CircleFit {
    pub fn center_modulus(&self) -> f64 {
        self.cx.hypot(self.cy)
    }
}

/// `m` points of the interface, `h` evaluated by trigonometric interpolation.
pub fn interface_curve(h: &PeriodicField, eps_film: f64, m: usize) -> Result<Vec<(f64, f64)>> {
    if m == 0 {
        return Err(Error::Geometry("need at least one sample".into()));
    }
    let fine = from_spectrum(&to_spectrum(h), m.max(h.len()))?;
    let step = fine.len() / m;
    let exact_grid = fine.len() % m == 0;
    (0..m)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / m as f64;
            let hv = if exact_grid { fine.values()[j * step] } else { h.interpolate(th) };
            let r = 1.0 + eps_film * hv;
            if !(r > 0.0) {
                return Err(Error::Geometry(format!("radius {r} at theta = {th:.4}: the curve crosses the axis")));
            }
            Ok((r * th.cos(), r * th.sin()))
        })
        .collect()
}

/// Kasa fit: least squares on `x^2 + y^2 + D x + E y + F = 0`.
pub fn fit_circle(points: &[(f64, f64)]) -> Result<CircleFit> {
    let m = points.len();
    if m < 3 {
        return Err(Error::DegenerateFit(format!("{m} points")));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m as f64;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (u, v) = (x - mx, y - my);
        sxx += u * u;
        sxy += u * v;
        syy += v * v;
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    // smallest eigenvalue of the scatter matrix relative to the trace
    let lam_min = 0.5 * (tr - ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt());
    if !(tr > 0.0) || lam_min <= 1e-12 * tr || det <= 0.0 {
        return Err(Error::DegenerateFit("points are collinear".into()));
    }
    let a = DMatrix::from_fn(m, 3, |i, j| match j {
        0 => points[i].0 - mx,
        1 => points[i].1 - my,
        _ => 1.0,
    });
    let b = DVector::from_fn(m, |i, _| {
        let (u, v) = (points[i].0 - mx, points[i].1 - my);
        -(u * u + v * v)
    });
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let (d, e, f) = (sol[0], sol[1], sol[2]);
    let (ux, uy) = (-0.5 * d, -0.5 * e);
    let r2 = ux * ux + uy * uy - f;
    if !(r2 > 0.0) {
        return Err(Error::DegenerateFit(format!("negative squared radius {r2}")));
    }
    let r = r2.sqrt();
    let (cx, cy) = (ux + mx, uy + my);
    let rms = (points.iter().map(|&(x, y)| ((x - cx).hypot(y - cy) - r).powi(2)).sum::<f64>() / m as f64).sqrt();
    Ok(CircleFit { cx, cy, r, rms })
}

/// Circle fitted to every snapshot's interface.
pub fn center_trajectory(traj: &Trajectory, eps_film: f64) -> Result<TimeSeries<CircleFit>> {
    let mut t = Vec::with_capacity(traj.snapshots.len());
    let mut v = Vec::with_capacity(traj.snapshots.len());
    for s in &traj.snapshots {
        let pts = interface_curve(&s.h, eps_film, s.h.len().max(64))?;
        t.push(s.t);
        v.push(fit_circle(&pts)?);
    }
    Ok(TimeSeries { t, v })
}
