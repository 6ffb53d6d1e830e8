//! Power-law rheology: the inverse stress map `psi`, its regularisation,
//! the cut-off mobility of the mollified problem, and the depth-integrated
//! flux kernel `G(beta, q) = int_0^1 z psi(beta + z q) dz`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Flow behaviour of the inner film.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstitutiveLaw {
    PowerLaw { p: f64 },
    Newtonian,
}

impl ConstitutiveLaw {
    pub fn power_law(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Config(format!("flow exponent must be positive, got {p}")));
        }
        Ok(ConstitutiveLaw::PowerLaw { p })
    }

    /// Flow behaviour exponent; 1 for a Newtonian film.
    pub fn p(&self) -> f64 {
        match *self {
            ConstitutiveLaw::PowerLaw { p } => p,
            ConstitutiveLaw::Newtonian => 1.0,
        }
    }

    /// `alpha = 1/p`; shear thickening is `alpha < 1`.
    pub fn alpha(&self) -> f64 {
        1.0 / self.p()
    }

    pub fn validate(&self) -> Result<()> {
        if let ConstitutiveLaw::PowerLaw { p } = *self {
            Self::power_law(p)?;
        }
        Ok(())
    }

    /// `psi(s) = |s|^(1/p - 1) s` with `psi(0) = 0`.
    pub fn psi(&self, s: f64) -> f64 {
        signed_pow(s, self.alpha())
    }

    /// `psi'(s) = (1/p) |s|^(1/p - 1)`; singular at zero when `p > 1`.
    pub fn psi_prime(&self, s: f64) -> Result<f64> {
        let m = self.alpha();
        if s == 0.0 {
            return if m > 1.0 {
                Ok(0.0)
            } else if m == 1.0 {
                Ok(1.0)
            } else {
                Err(Error::Domain("psi' is singular at 0 for p > 1".into()))
            };
        }
        Ok(m * s.abs().powf(m - 1.0))
    }

    /// `psi''(s)`; only used away from zero.
    pub fn psi_second(&self, s: f64) -> f64 {
        let m = self.alpha();
        if m == 1.0 {
            return 0.0;
        }
        m * (m - 1.0) * s.abs().powf(m - 2.0) * s.signum()
    }

    pub fn psi_third(&self, s: f64) -> f64 {
        let m = self.alpha();
        if m == 1.0 || m == 2.0 {
            return 0.0;
        }
        m * (m - 1.0) * (m - 2.0) * s.abs().powf(m - 3.0)
    }
}

/// `|s|^(m-1) s`, zero at the origin for every `m > 0`.
#[inline]
pub(crate) fn signed_pow(s: f64, m: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if m == 1.0 {
        s
    } else {
        s.abs().powf(m - 1.0) * s
    }
}

/// Regularised nonlinearity `(s^2 + eps^2)^((alpha-1)/2) s`.
pub fn psi_eps(alpha: f64, eps: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    if alpha == 1.0 {
        return s;
    }
    (s * s + eps * eps).powf(0.5 * (alpha - 1.0)) * s
}

/// Derivative of [`psi_eps`] in `s`.
pub fn psi_eps_prime(alpha: f64, eps: f64, s: f64) -> f64 {
    if alpha == 1.0 {
        return 1.0;
    }
    let r = s * s + eps * eps;
    if r == 0.0 {
        return if alpha > 1.0 { 0.0 } else { f64::INFINITY };
    }
    r.powf(0.5 * (alpha - 1.0) - 1.0) * (alpha * s * s + eps * eps)
}

fn bump(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn bump_prime(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp() / (t * t)
    }
}

/// Start of the cut-off ramp as a fraction of `h_ref / 2`.
const RAMP_START: f64 = 0.5;

/// C-infinity smoothstep: 0 below `RAMP_START`, 1 above 1.
fn ramp(x: f64) -> f64 {
    let g = bump(x - RAMP_START);
    let q = bump(1.0 - x);
    if g + q == 0.0 {
        return if x >= 1.0 { 1.0 } else { 0.0 };
    }
    g / (g + q)
}

fn ramp_prime(x: f64) -> f64 {
    let g = bump(x - RAMP_START);
    let q = bump(1.0 - x);
    let d = g + q;
    if d == 0.0 || g == 0.0 || q == 0.0 {
        return 0.0;
    }
    let dg = bump_prime(x - RAMP_START);
    let dq = -bump_prime(1.0 - x);
    (dg * q - g * dq) / (d * d)
}

/// Cut-off mobility `m_eps`: equal to `|s|^(alpha+2)` once `|s| >= h_ref/2`,
/// smoothly switched off below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityCutoff {
    pub h_ref: f64,
    pub alpha: f64,
}

impl MobilityCutoff {
    pub fn new(h_ref: f64, alpha: f64) -> Result<Self> {
        let c = Self { h_ref, alpha };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_ref.is_finite() && self.h_ref > 0.0) {
            return Err(Error::Config(format!(
                "reference thickness must be positive, got {}",
                self.h_ref
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn mobility(&self, s: f64) -> f64 {
        let a = s.abs();
        let x = a / (0.5 * self.h_ref);
        if x >= 1.0 {
            a.powf(self.alpha + 2.0)
        } else {
            ramp(x) * a.powf(self.alpha + 2.0)
        }
    }

    pub fn mobility_prime(&self, s: f64) -> f64 {
        let a = s.abs();
        let half = 0.5 * self.h_ref;
        let x = a / half;
        let power = a.powf(self.alpha + 2.0);
        let dpower = (self.alpha + 2.0) * a.powf(self.alpha + 1.0);
        let d = if x >= 1.0 {
            dpower
        } else {
            ramp_prime(x) / half * power + ramp(x) * dpower
        };
        d * s.signum()
    }
}

/// Free-function form of [`MobilityCutoff::mobility`].
pub fn mobility(cutoff: &MobilityCutoff, s: f64) -> f64 {
    cutoff.mobility(s)
}

/// Below this ratio `|q| / |beta|` the kernel is evaluated from its Taylor
/// series; above it the closed form has no harmful cancellation.
const TAYLOR_RATIO: f64 = 2e-2;
const TAYLOR_TERMS: usize = 10;

/// `G(beta, q) = int_0^1 z psi(beta + z q) dz` in closed form.
pub fn flux_kernel(law: &ConstitutiveLaw, beta: f64, q: f64) -> Result<f64> {
    if !(beta.is_finite() && q.is_finite()) {
        return Err(Error::Domain(format!("non-finite kernel arguments ({beta}, {q})")));
    }
    let m = law.alpha();
    if m == 1.0 {
        return Ok(0.5 * beta + q / 3.0);
    }
    if q == 0.0 {
        return Ok(0.5 * law.psi(beta));
    }
    if q.abs() <= TAYLOR_RATIO * beta.abs() {
        // psi(beta + z q) = psi(beta) (1 + z x)^m with x = q / beta
        let x = q / beta;
        let mut binom = 1.0;
        let mut xj = 1.0;
        let mut sum = 0.5;
        for j in 1..TAYLOR_TERMS {
            binom *= (m - (j - 1) as f64) / j as f64;
            xj *= x;
            sum += binom * xj / (j + 2) as f64;
        }
        return Ok(law.psi(beta) * sum);
    }
    let f1 = |s: f64| s.abs().powf(m + 1.0) / (m + 1.0);
    let f2 = |s: f64| s.signum() * s.abs().powf(m + 2.0) / (m + 2.0);
    let end = beta + q;
    Ok(((f2(end) - f2(beta)) - beta * (f1(end) - f1(beta))) / (q * q))
}

/// `dG/dq = int_0^1 z^2 psi'(beta + z q) dz`, by central differences of the
/// closed form. Used for Jacobian assembly only.
pub(crate) fn flux_kernel_dq(law: &ConstitutiveLaw, beta: f64, q: f64) -> Result<f64> {
    if law.alpha() == 1.0 {
        return Ok(1.0 / 3.0);
    }
    let step = 1e-5 * (1.0 + beta.abs() + q.abs());
    Ok((flux_kernel(law, beta, q + step)? - flux_kernel(law, beta, q - step)?) / (2.0 * step))
}

/// Number of geometrically graded layers toward a kink.
const GRADED_LAYERS: usize = 40;
const GRADING_RATIO: f64 = 0.15;

/// `G(beta, q)` by composite Gauss-Legendre quadrature (32 nodes per panel).
/// The interval is split at the sign change `z0 = -beta/q` of the argument
/// and the panels are graded geometrically toward it, where `psi` is only
/// Hölder continuous.
pub fn flux_kernel_quadrature(law: &ConstitutiveLaw, beta: f64, q: f64) -> Result<f64> {
    if !(beta.is_finite() && q.is_finite()) {
        return Err(Error::Domain(format!("non-finite kernel arguments ({beta}, {q})")));
    }
    let rule = GaussLegendre::new(32);
    let f = |z: f64| z * law.psi(beta + z * q);
    let kink = if q != 0.0 { -beta / q } else { f64::NAN };
    let smooth = law.alpha() == 1.0 || !(kink > 0.0 && kink < 1.0);
    if smooth {
        // kink at an endpoint still needs grading
        if q != 0.0 && law.alpha() != 1.0 && (kink == 0.0 || kink == 1.0) {
            let span = if kink == 0.0 { 1.0 } else { -1.0 };
            return Ok(graded(&rule, &f, kink, span));
        }
        return Ok(rule.integrate(&f, 0.0, 1.0));
    }
    Ok(graded(&rule, &f, kink, 0.0 - kink) + graded(&rule, &f, kink, 1.0 - kink))
}

/// Integrates over `[kink, kink + span]` (span may be negative) with panels
/// shrinking geometrically toward `kink`.
fn graded(rule: &GaussLegendre, f: &impl Fn(f64) -> f64, kink: f64, span: f64) -> f64 {
    let mut total = 0.0;
    let mut outer = 1.0;
    for _ in 0..GRADED_LAYERS {
        let inner = outer * GRADING_RATIO;
        let a = kink + inner * span;
        let b = kink + outer * span;
        total += if span > 0.0 {
            rule.integrate(f, a, b)
        } else {
            -rule.integrate(f, b, a)
        };
        outer = inner;
    }
    // span > 0: integral over [kink, kink+span]; span < 0: over [kink+span, kink]
    if span > 0.0 {
        total
    } else {
        -total
    }
}
