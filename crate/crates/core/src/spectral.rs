//! Uniform periodic grids on the circle and their Fourier view.
//!
//! Samples live at `theta_j = 2*pi*j/n`, `j = 0..n`. Coefficients follow the
//! normalisation `a_k = (1/2pi) * integral f(theta) exp(-i k theta)`, which on
//! the grid is the forward DFT divided by `n`. Spectra are stored in FFT
//! order; index `j` carries wavenumber `j` for `j < n/2` and `j - n`
//! otherwise, so the Nyquist slot is `k = -n/2`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Smallest grid accepted by [`PeriodicField::new`].
pub const MIN_GRID: usize = 16;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
}

/// Forward transform of real samples, normalised to Fourier coefficients.
pub(crate) fn forward(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, FftDirection::Forward).process(&mut buf);
    let inv = 1.0 / n as f64;
    for c in &mut buf {
        *c *= inv;
    }
    buf
}

/// Synthesis of a conjugate-symmetric coefficient array; the imaginary
/// round-off is discarded.
pub(crate) fn inverse_real(coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    plan(buf.len(), FftDirection::Inverse).process(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Wavenumber stored at FFT index `idx` of an `n`-point spectrum.
#[inline]
pub fn wavenumber(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// `true` when mode `k` survives the two-thirds rule on an `n`-point grid.
#[inline]
pub fn is_resolved(k: i64, n: usize) -> bool {
    3 * k.unsigned_abs() as usize <= n
}

fn check_grid(n: usize) -> Result<()> {
    if n < MIN_GRID || n % 2 != 0 {
        return Err(Error::Config(format!(
            "grid size must be even and at least {MIN_GRID}, got {n}"
        )));
    }
    Ok(())
}

/// Real samples of a periodic function on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_grid(values.len())?;
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {j}")));
        }
        Ok(Self { values })
    }

    /// Wraps samples produced by an internal operation on a valid field.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= MIN_GRID && values.len() % 2 == 0);
        Self { values }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        check_grid(n)?;
        Self::new((0..n).map(|j| f(grid_point(j, n))).collect())
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::from_fn(n, |_| c)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn theta(&self, j: usize) -> f64 {
        grid_point(j, self.len())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Grid mean, equal to the zeroth Fourier coefficient.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn max_diff(&self, other: &PeriodicField) -> f64 {
        assert_eq!(self.len(), other.len(), "grid mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PeriodicField {
        PeriodicField::from_raw(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &PeriodicField, f: impl Fn(f64, f64) -> f64) -> PeriodicField {
        assert_eq!(self.len(), other.len(), "grid mismatch");
        PeriodicField::from_raw(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &PeriodicField) -> PeriodicField {
        self.zip_map(other, |a, b| a + scale * b)
    }

    /// Rigid rotation: returns `g(theta) = f(theta - sigma)`.
    pub fn shift(&self, sigma: f64) -> PeriodicField {
        let n = self.len();
        let mut s = forward(&self.values);
        for (idx, c) in s.iter_mut().enumerate() {
            let k = wavenumber(idx, n);
            if 2 * k.unsigned_abs() as usize == n {
                // the Nyquist mode cannot be shifted by a real field
                *c = Complex64::new(c.re * (k as f64 * sigma).cos(), 0.0);
            } else {
                *c *= shift_phase(k, sigma);
            }
        }
        PeriodicField::from_raw(inverse_real(&s))
    }

    /// Trigonometric interpolant evaluated at an arbitrary angle.
    pub fn interpolate(&self, theta: f64) -> f64 {
        interpolate_spectrum(&to_spectrum(self), theta)
    }
}

/// Factor `exp(-i k sigma)` picked up by `a_k` under a rotation by `sigma`.
#[inline]
pub fn shift_phase(k: i64, sigma: f64) -> Complex64 {
    Complex64::from_polar(1.0, -(k as f64) * sigma)
}

pub(crate) fn interpolate_spectrum(s: &Spectrum, theta: f64) -> f64 {
    let n = s.len();
    let mut acc = s.coeffs[0].re;
    for idx in 1..n / 2 {
        let k = idx as f64;
        acc += 2.0 * (s.coeffs[idx] * Complex64::from_polar(1.0, k * theta)).re;
    }
    // split Nyquist symmetrically so the interpolant stays real
    acc += s.coeffs[n / 2].re * ((n / 2) as f64 * theta).cos();
    acc
}

#[inline]
pub fn grid_point(j: usize, n: usize) -> f64 {
    2.0 * PI * j as f64 / n as f64
}

/// Fourier coefficients in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        check_grid(coeffs.len())?;
        Ok(Self { coeffs })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of wavenumber `k`, `-n/2 <= k < n/2`.
    pub fn coeff(&self, k: i64) -> Complex64 {
        self.coeffs[self.index(k)]
    }

    pub fn set(&mut self, k: i64, value: Complex64) {
        let idx = self.index(k);
        self.coeffs[idx] = value;
    }

    fn index(&self, k: i64) -> usize {
        let n = self.len() as i64;
        assert!(
            (-n / 2..n / 2).contains(&k),
            "wavenumber {k} outside the {n}-point spectrum"
        );
        k.rem_euclid(n) as usize
    }

    /// Iterates `(k, a_k)` in storage order.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n = self.len();
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(idx, &c)| (wavenumber(idx, n), c))
    }
}

pub fn to_spectrum(f: &PeriodicField) -> Spectrum {
    Spectrum {
        coeffs: forward(f.values()),
    }
}

/// Synthesises `s` on an `n`-point grid. When `n` differs from the spectrum
/// length the coefficients are zero-padded or truncated (band-limited
/// resampling).
pub fn from_spectrum(s: &Spectrum, n: usize) -> Result<PeriodicField> {
    check_grid(n)?;
    let m = s.len();
    if n == m {
        return Ok(PeriodicField::from_raw(inverse_real(&s.coeffs)));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let keep = (m.min(n) / 2) as i64;
    for (k, c) in s.modes() {
        if k.abs() < keep {
            out[k.rem_euclid(n as i64) as usize] = c;
        } else if k.abs() == keep && n > m {
            // source Nyquist split evenly over +-k on the finer grid
            let half = Complex64::new(0.5 * c.re, 0.0);
            out[keep as usize] = half;
            out[n - keep as usize] = half;
        }
    }
    Ok(PeriodicField::from_raw(inverse_real(&out)))
}

/// Applies a Fourier multiplier `m(k)` to a real field. Odd multipliers are
/// expected to vanish at the Nyquist mode.
pub(crate) fn apply_multiplier(f: &PeriodicField, m: impl Fn(i64) -> Complex64) -> PeriodicField {
    let n = f.len();
    let mut s = forward(f.values());
    for (idx, c) in s.iter_mut().enumerate() {
        *c *= m(wavenumber(idx, n));
    }
    PeriodicField::from_raw(inverse_real(&s))
}

fn is_nyquist(k: i64, n: usize) -> bool {
    2 * k.unsigned_abs() as usize == n
}

/// Spectral derivative of order 1..=4, multiplier `(ik)^order`.
pub fn derivative(f: &PeriodicField, order: u32) -> Result<PeriodicField> {
    if !(1..=4).contains(&order) {
        return Err(Error::Config(format!(
            "derivative order must be 1..=4, got {order}"
        )));
    }
    let n = f.len();
    Ok(apply_multiplier(f, |k| {
        if order % 2 == 1 && is_nyquist(k, n) {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, k as f64).powu(order)
    }))
}

/// Symbol of `d/dtheta + d^3/dtheta^3`.
#[inline]
pub fn q_symbol(k: i64) -> Complex64 {
    let k = k as f64;
    Complex64::new(0.0, k - k * k * k)
}

/// `Q[f] = f' + f'''`, the surface-tension driver. Its kernel is spanned by
/// `1, cos, sin`.
///
/// Coefficients below `ROUNDOFF_FLOOR` times the largest one are treated as
/// transform noise and dropped before the cubic symbol amplifies them.
pub fn q_operator(f: &PeriodicField) -> PeriodicField {
    let n = f.len();
    let mut s = forward(f.values());
    let floor = ROUNDOFF_FLOOR * s.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for (idx, c) in s.iter_mut().enumerate() {
        let k = wavenumber(idx, n);
        *c = if is_nyquist(k, n) || c.norm() <= floor {
            Complex64::new(0.0, 0.0)
        } else {
            *c * q_symbol(k)
        };
    }
    PeriodicField::from_raw(inverse_real(&s))
}

const ROUNDOFF_FLOOR: f64 = 1e-14;

/// Gaussian smoothing multiplier; exactly 1 at `k = 0`.
#[inline]
pub fn mollifier_symbol(eps: f64, k: i64) -> f64 {
    if k == 0 || eps == 0.0 {
        1.0
    } else {
        let x = eps * k as f64;
        (-0.5 * x * x).exp()
    }
}

pub fn mollify(f: &PeriodicField, eps: f64) -> PeriodicField {
    if eps == 0.0 {
        return f.clone();
    }
    apply_multiplier(f, |k| Complex64::new(mollifier_symbol(eps, k), 0.0))
}

/// Mollification acting directly on coefficients.
pub fn mollify_spectrum(s: &Spectrum, eps: f64) -> Spectrum {
    let coeffs = s
        .modes()
        .map(|(k, c)| c * mollifier_symbol(eps, k))
        .collect();
    Spectrum { coeffs }
}

/// Two-thirds rule: zeroes every mode with `|k| > n/3`.
pub fn dealias(f: &PeriodicField) -> PeriodicField {
    let n = f.len();
    apply_multiplier(f, |k| {
        if is_resolved(k, n) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Trapezoid rule for `integral_0^{2pi} f`, exact for band-limited periodic
/// integrands.
pub fn integrate(values: &[f64]) -> f64 {
    2.0 * PI * values.iter().sum::<f64>() / values.len() as f64
}
