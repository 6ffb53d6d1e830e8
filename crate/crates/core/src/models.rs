//! Evolution-equation variants in flux form, `h_t = -d/dtheta F[h]`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rheology::{
    flux_kernel, flux_kernel_dq, psi_eps, psi_eps_prime, signed_pow, ConstitutiveLaw, MobilityCutoff,
};
use crate::scaling::Regime;
use crate::spectral::{
    forward, inverse_real, is_resolved, mollifier_symbol, q_symbol, wavenumber, PeriodicField,
};

/// Floor used to keep `|Q|^(alpha-1)` finite when linearising `alpha < 1` fluxes.
pub const MOBILITY_EPS: f64 = 1e-10;

/// Which equation is integrated, with exactly the parameters it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Variant {
    /// `F = h^2 G(beta_tilde, h Q)`.
    GeneralCase1 { beta_tilde: f64 },
    /// Same flux, parametrised by the power-law exponent.
    PowerlawCase1 { beta_tilde: f64 },
    /// `F = h^(alpha+2) |Q|^(alpha-1) Q`.
    PowerlawBeta0,
    /// `F = c_shear h^2/2 + c_surf h^3 Q`.
    NewtonianPv1 { c_shear: f64, c_surf: f64 },
    /// `F = eta[m_eps(h) psi_eps(eta Q)]` with Gaussian smoothing `eta`.
    Mollified { eps_mol: f64, cutoff: MobilityCutoff },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub law: ConstitutiveLaw,
    #[serde(flatten)]
    pub variant: Variant,
}

impl ModelSpec {
    pub fn new(law: ConstitutiveLaw, variant: Variant) -> Result<Self> {
        let spec = Self { law, variant };
        spec.validate()?;
        Ok(spec)
    }

    pub fn general_case1(law: ConstitutiveLaw, beta_tilde: f64) -> Result<Self> {
        Self::new(law, Variant::GeneralCase1 { beta_tilde })
    }

    pub fn powerlaw_case1(p: f64, beta_tilde: f64) -> Result<Self> {
        Self::new(ConstitutiveLaw::power_law(p)?, Variant::PowerlawCase1 { beta_tilde })
    }

    pub fn powerlaw_beta0(p: f64) -> Result<Self> {
        Self::new(ConstitutiveLaw::power_law(p)?, Variant::PowerlawBeta0)
    }

    pub fn newtonian_pv1(c_shear: f64, c_surf: f64) -> Result<Self> {
        Self::new(ConstitutiveLaw::Newtonian, Variant::NewtonianPv1 { c_shear, c_surf })
    }

    pub fn mollified(p: f64, eps_mol: f64, h_ref: f64) -> Result<Self> {
        let law = ConstitutiveLaw::power_law(p)?;
        let cutoff = MobilityCutoff::new(h_ref, law.alpha())?;
        Self::new(law, Variant::Mollified { eps_mol, cutoff })
    }

    /// Case-1 model for a classified regime. Case II and the unsupported
    /// large-beta regime are rejected.
    pub fn from_regime(regime: Regime, law: ConstitutiveLaw, beta_tilde: f64) -> Result<Self> {
        match regime {
            Regime::Case1 => Self::general_case1(law, beta_tilde),
            Regime::Case2SmallB | Regime::Case2LargeB => Self::new(law, Variant::PowerlawBeta0),
            Regime::Case3Unsupported => Err(Error::UnsupportedRegime(
                "beta >> 1 is outside the modelled regimes".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite, got {v}")))
            }
        };
        match self.variant {
            Variant::GeneralCase1 { beta_tilde } | Variant::PowerlawCase1 { beta_tilde } => {
                finite("beta_tilde", beta_tilde)
            }
            Variant::PowerlawBeta0 => Ok(()),
            Variant::NewtonianPv1 { c_shear, c_surf } => {
                if self.law.p() != 1.0 {
                    return Err(Error::Config("newtonian_pv1 requires p = 1".into()));
                }
                finite("c_shear", c_shear)?;
                finite("c_surf", c_surf)
            }
            Variant::Mollified { eps_mol, cutoff } => {
                if !(eps_mol.is_finite() && eps_mol >= 0.0) {
                    return Err(Error::Config(format!("eps_mol must be >= 0, got {eps_mol}")));
                }
                cutoff.validate()?;
                if (cutoff.alpha - self.law.alpha()).abs() > 1e-15 * self.law.alpha() {
                    return Err(Error::Config("cutoff alpha must equal 1/p".into()));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            Variant::GeneralCase1 { .. } => "general_case1",
            Variant::PowerlawCase1 { .. } => "powerlaw_case1",
            Variant::PowerlawBeta0 => "powerlaw_beta0",
            Variant::NewtonianPv1 { .. } => "newtonian_pv1",
            Variant::Mollified { .. } => "mollified",
        }
    }

    pub fn requires_positivity(&self) -> bool {
        !matches!(self.variant, Variant::Mollified { .. })
    }

    pub fn beta_tilde(&self) -> Option<f64> {
        match self.variant {
            Variant::GeneralCase1 { beta_tilde } | Variant::PowerlawCase1 { beta_tilde } => Some(beta_tilde),
            _ => None,
        }
    }

    pub fn is_case1(&self) -> bool {
        self.beta_tilde().is_some()
    }

    /// Speed of the rigid rotation of a film of mean thickness `c`.
    pub fn drift_speed(&self, c: f64) -> f64 {
        match self.variant {
            Variant::GeneralCase1 { beta_tilde } | Variant::PowerlawCase1 { beta_tilde } => {
                c * self.law.psi(beta_tilde)
            }
            Variant::NewtonianPv1 { c_shear, .. } => c * c_shear,
            _ => 0.0,
        }
    }

    fn smoothing(&self) -> f64 {
        match self.variant {
            Variant::Mollified { eps_mol, .. } => eps_mol,
            _ => 0.0,
        }
    }

    pub(crate) fn pointwise_flux(&self, h: f64, q: f64) -> Result<f64> {
        Ok(match self.variant {
            Variant::GeneralCase1 { beta_tilde } | Variant::PowerlawCase1 { beta_tilde } => {
                h * h * flux_kernel(&self.law, beta_tilde, h * q)?
            }
            Variant::PowerlawBeta0 => {
                let a = self.law.alpha();
                if a == 1.0 {
                    h * h * h * q
                } else {
                    h.powf(a + 2.0) * signed_pow(q, a)
                }
            }
            Variant::NewtonianPv1 { c_shear, c_surf } => 0.5 * c_shear * h * h + c_surf * h * h * h * q,
            Variant::Mollified { eps_mol, cutoff } => {
                cutoff.mobility(h) * psi_eps(self.law.alpha(), eps_mol, q)
            }
        })
    }

    /// `(dF/dh, dF/dQ)` at one grid point.
    pub(crate) fn pointwise_partials(&self, h: f64, q: f64) -> Result<(f64, f64)> {
        Ok(match self.variant {
            Variant::GeneralCase1 { beta_tilde } | Variant::PowerlawCase1 { beta_tilde } => {
                let g = flux_kernel(&self.law, beta_tilde, h * q)?;
                let gq = flux_kernel_dq(&self.law, beta_tilde, h * q)?;
                (2.0 * h * g + h * h * q * gq, h * h * h * gq)
            }
            Variant::PowerlawBeta0 => {
                let a = self.law.alpha();
                let fh = (a + 2.0) * h.powf(a + 1.0) * signed_pow(q, a);
                let fq = if a == 1.0 {
                    h.powf(a + 2.0)
                } else {
                    a * h.powf(a + 2.0) * (q * q + MOBILITY_EPS * MOBILITY_EPS).powf(0.5 * (a - 1.0))
                };
                (fh, fq)
            }
            Variant::NewtonianPv1 { c_shear, c_surf } => {
                (c_shear * h + 3.0 * c_surf * h * h * q, c_surf * h * h * h)
            }
            Variant::Mollified { eps_mol, cutoff } => {
                let a = self.law.alpha();
                (
                    cutoff.mobility_prime(h) * psi_eps(a, eps_mol, q),
                    cutoff.mobility(h) * psi_eps_prime(a, eps_mol.max(MOBILITY_EPS), q),
                )
            }
        })
    }

    /// Effective fourth-order mobility `dF/dQ` at one grid point, clamped
    /// away from the `alpha < 1` singularity.
    pub fn effective_mobility(&self, h: f64, q: f64) -> Result<f64> {
        Ok(self.pointwise_partials(h, q)?.1.abs())
    }
}

/// Dealiased thickness and `Q` on the grid, from a single transform.
pub(crate) struct Resolved {
    pub h: Vec<f64>,
    pub q: Vec<f64>,
}

const ROUNDOFF_FLOOR: f64 = 1e-14;

pub(crate) fn resolve(spec: &ModelSpec, h: &PeriodicField) -> Result<Resolved> {
    if spec.requires_positivity() && h.min() <= 0.0 {
        return Err(Error::Positivity { min_h: h.min() });
    }
    let n = h.len();
    let s = forward(h.values());
    let floor = ROUNDOFF_FLOOR * s.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let eps = spec.smoothing();
    let zero = Complex64::new(0.0, 0.0);
    let mut hs = vec![zero; n];
    let mut qs = vec![zero; n];
    for (idx, c) in s.iter().enumerate() {
        let k = wavenumber(idx, n);
        if !is_resolved(k, n) {
            continue;
        }
        hs[idx] = *c;
        if c.norm() > floor {
            qs[idx] = *c * q_symbol(k) * mollifier_symbol(eps, k);
        }
    }
    let hd = inverse_real(&hs);
    if spec.requires_positivity() {
        let m = hd.iter().copied().fold(f64::INFINITY, f64::min);
        if m <= 0.0 {
            return Err(Error::Positivity { min_h: m });
        }
    }
    Ok(Resolved { h: hd, q: inverse_real(&qs) })
}

/// Flux on the grid, before the final smoothing and dealiasing.
fn raw_flux(spec: &ModelSpec, r: &Resolved) -> Result<Vec<f64>> {
    r.h.iter().zip(&r.q).map(|(&h, &q)| spec.pointwise_flux(h, q)).collect()
}

/// Dealiased (and, for the mollified problem, smoothed) flux together with
/// the unsmoothed `Q` it is paired with in the energy identity.
pub fn flux_and_q(spec: &ModelSpec, h: &PeriodicField) -> Result<(PeriodicField, PeriodicField)> {
    let r = resolve(spec, h)?;
    let f = raw_flux(spec, &r)?;
    let n = h.len();
    let eps = spec.smoothing();
    let mut fs = forward(&f);
    for (idx, c) in fs.iter_mut().enumerate() {
        let k = wavenumber(idx, n);
        *c = if is_resolved(k, n) { *c * mollifier_symbol(eps, k) } else { Complex64::new(0.0, 0.0) };
    }
    let q = if eps == 0.0 {
        r.q
    } else {
        // Q without smoothing for the pairing
        let s = forward(h.values());
        let floor = ROUNDOFF_FLOOR * s.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let qs: Vec<Complex64> = s
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let k = wavenumber(idx, n);
                if is_resolved(k, n) && c.norm() > floor {
                    *c * q_symbol(k)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        inverse_real(&qs)
    };
    Ok((PeriodicField::from_raw(inverse_real(&fs)), PeriodicField::from_raw(q)))
}

/// `-d/dtheta F[h]`; zero mean by construction.
pub fn rhs(spec: &ModelSpec, h: &PeriodicField) -> Result<PeriodicField> {
    let r = resolve(spec, h)?;
    let f = raw_flux(spec, &r)?;
    let n = h.len();
    let eps = spec.smoothing();
    let mut fs = forward(&f);
    for (idx, c) in fs.iter_mut().enumerate() {
        let k = wavenumber(idx, n);
        *c = if is_resolved(k, n) {
            *c * Complex64::new(0.0, -(k as f64)) * mollifier_symbol(eps, k)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    Ok(PeriodicField::from_raw(inverse_real(&fs)))
}

/// Symbol of the linearisation of [`rhs`] about `h = c`.
pub fn linear_symbol(spec: &ModelSpec, c: f64, k: i64) -> Result<Complex64> {
    let kf = k as f64;
    let diffusion = kf * kf - kf.powi(4);
    let (speed, a0) = match spec.variant {
        Variant::GeneralCase1 { beta_tilde } | Variant::PowerlawCase1 { beta_tilde } => (
            c * spec.law.psi(beta_tilde),
            c.powi(3) * spec.law.psi_prime(beta_tilde)? / 3.0,
        ),
        Variant::NewtonianPv1 { c_shear, c_surf } => (c * c_shear, c_surf * c.powi(3)),
        Variant::PowerlawBeta0 => (0.0, c.powf(spec.law.alpha() + 2.0) * spec.law.psi_prime(0.0)?),
        Variant::Mollified { eps_mol, cutoff } => {
            let m = mollifier_symbol(eps_mol, k);
            let slope = psi_eps_prime(spec.law.alpha(), eps_mol, 0.0);
            if !slope.is_finite() {
                return Err(Error::Domain("psi_eps' is singular at 0 for eps_mol = 0".into()));
            }
            (0.0, cutoff.mobility(c) * slope * m * m)
        }
    };
    Ok(Complex64::new(a0 * diffusion, -kf * speed))
}

/// Dense real matrix of a Fourier multiplier acting on grid values.
pub(crate) fn multiplier_matrix(n: usize, m: impl Fn(i64) -> Complex64) -> DMatrix<f64> {
    let mut e0 = vec![0.0; n];
    e0[0] = 1.0;
    let mut s = forward(&e0);
    for (idx, c) in s.iter_mut().enumerate() {
        *c *= m(wavenumber(idx, n));
    }
    let col = inverse_real(&s);
    DMatrix::from_fn(n, n, |i, j| col[(i + n - j) % n])
}

/// Grid mean of the fourth-order mobility `dF/dQ`, with `|Q|^(alpha-1)`
/// regularised at a tenth of the rms of `Q`. Used to freeze a linear part
/// for degenerate fluxes.
pub(crate) fn frozen_mobility(spec: &ModelSpec, h: &PeriodicField) -> Result<f64> {
    let r = resolve(spec, h)?;
    let n = r.q.len() as f64;
    let rms = (r.q.iter().map(|q| q * q).sum::<f64>() / n).sqrt();
    let a = spec.law.alpha();
    let total: f64 = match spec.variant {
        Variant::PowerlawBeta0 => {
            if rms == 0.0 && a < 1.0 {
                return Ok(0.0);
            }
            let eps = 0.1 * rms;
            r.h.iter()
                .zip(&r.q)
                .map(|(&h, &q)| a * h.powf(a + 2.0) * (q * q + eps * eps).powf(0.5 * (a - 1.0)))
                .sum()
        }
        Variant::Mollified { eps_mol, cutoff } => {
            let eps = eps_mol.max(0.1 * rms);
            if eps == 0.0 && a < 1.0 {
                return Ok(0.0);
            }
            r.h.iter()
                .zip(&r.q)
                .map(|(&h, &q)| cutoff.mobility(h) * psi_eps_prime(a, eps, q))
                .sum()
        }
        _ => {
            let mut s = 0.0;
            for (&h, &q) in r.h.iter().zip(&r.q) {
                s += spec.pointwise_partials(h, q)?.1;
            }
            s
        }
    };
    Ok(total / n)
}

/// Largest fourth-order mobility on the grid, floored at `1e-12`.
pub(crate) fn max_mobility(spec: &ModelSpec, h: &PeriodicField) -> Result<f64> {
    let r = resolve(spec, h)?;
    let mut m: f64 = 1e-12;
    for (&h, &q) in r.h.iter().zip(&r.q) {
        m = m.max(spec.effective_mobility(h, q)?);
    }
    Ok(m)
}

/// Constant pieces of the [`rhs`] Jacobian on a fixed grid:
/// `J = D (diag(F_h) P + diag(F_Q) Qm)`.
#[derive(Debug, Clone)]
pub struct JacobianCache {
    n: usize,
    p: DMatrix<f64>,
    qm: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl JacobianCache {
    pub fn new(spec: &ModelSpec, n: usize) -> Self {
        let eps = spec.smoothing();
        let mask = |k: i64| if is_resolved(k, n) { 1.0 } else { 0.0 };
        Self {
            n,
            p: multiplier_matrix(n, |k| Complex64::new(mask(k), 0.0)),
            qm: multiplier_matrix(n, |k| q_symbol(k) * mask(k) * mollifier_symbol(eps, k)),
            d: multiplier_matrix(n, |k| Complex64::new(0.0, -(k as f64)) * mask(k) * mollifier_symbol(eps, k)),
        }
    }

    pub fn jacobian(&self, spec: &ModelSpec, h: &PeriodicField) -> Result<DMatrix<f64>> {
        let n = self.n;
        if h.len() != n {
            return Err(Error::Config(format!("grid size {} does not match cache size {n}", h.len())));
        }
        let r = resolve(spec, h)?;
        let mut inner = DMatrix::zeros(n, n);
        for i in 0..n {
            let (fh, fq) = spec.pointwise_partials(r.h[i], r.q[i])?;
            for j in 0..n {
                inner[(i, j)] = fh * self.p[(i, j)] + fq * self.qm[(i, j)];
            }
        }
        Ok(&self.d * inner)
    }
}

/// Jacobian of [`rhs`] with respect to the grid values of `h`.
pub fn jacobian(spec: &ModelSpec, h: &PeriodicField) -> Result<DMatrix<f64>> {
    JacobianCache::new(spec, h.len()).jacobian(spec, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{to_spectrum, from_spectrum, Spectrum};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn field(n: usize, f: impl Fn(f64) -> f64) -> PeriodicField {
        PeriodicField::from_fn(n, f).unwrap()
    }

    fn smooth(t: f64) -> f64 {
        1.0 + 0.1 * (2.0 * t).cos() + 0.05 * (3.0 * t + 0.4).sin() + 0.02 * t.cos()
    }

    fn all_specs() -> Vec<ModelSpec> {
        vec![
            ModelSpec::general_case1(ConstitutiveLaw::power_law(2.0).unwrap(), 1.5).unwrap(),
            ModelSpec::powerlaw_case1(0.5, 2.0).unwrap(),
            ModelSpec::powerlaw_beta0(2.0).unwrap(),
            ModelSpec::powerlaw_beta0(0.5).unwrap(),
            ModelSpec::newtonian_pv1(1.0, 1.0).unwrap(),
            ModelSpec::mollified(2.0, 0.1, 1.0).unwrap(),
        ]
    }

    #[test]
    fn constant_thickness_is_stationary() {
        for spec in all_specs() {
            let r = rhs(&spec, &PeriodicField::constant(32, 1.3).unwrap()).unwrap();
            assert!(r.max_abs() < 1e-12, "{}", spec.name());
        }
    }

    #[test]
    fn rhs_has_zero_mean() {
        for spec in all_specs() {
            let r = rhs(&spec, &field(64, smooth)).unwrap();
            assert!(r.mean().abs() <= 1e-14 * r.max_abs(), "{}", spec.name());
        }
    }

    #[test]
    fn case1_at_p1_matches_newtonian_flux() {
        let spec = ModelSpec::powerlaw_case1(1.0, 1.7).unwrap();
        let h = field(64, smooth);
        let r = rhs(&spec, &h).unwrap();
        // F = beta h^2/2 + h^3 Q/3, assembled independently
        let oracle = ModelSpec::newtonian_pv1(1.7, 1.0 / 3.0).unwrap();
        let o = rhs(&oracle, &h).unwrap();
        assert!(r.max_diff(&o) < 1e-11);
    }

    fn directional_derivative(spec: &ModelSpec, c: f64, v: &PeriodicField, delta: f64) -> PeriodicField {
        let h0 = PeriodicField::constant(v.len(), c).unwrap();
        let r0 = rhs(spec, &h0).unwrap();
        let r1 = rhs(spec, &h0.axpy(delta, v)).unwrap();
        r1.zip_map(&r0, |a, b| (a - b) / delta)
    }

    fn linear_response(spec: &ModelSpec, c: f64, v: &PeriodicField) -> PeriodicField {
        let s = to_spectrum(v);
        let out: Vec<Complex64> = s
            .modes()
            .map(|(k, a)| a * linear_symbol(spec, c, k).unwrap())
            .collect();
        // modes() yields FFT order
        from_spectrum(&Spectrum::from_coeffs(out).unwrap(), v.len()).unwrap()
    }

    #[test]
    fn linearisation_matches_symbol() {
        let v = field(32, |t| (2.0 * t).cos());
        let specs = [
            ModelSpec::general_case1(ConstitutiveLaw::Newtonian, 2.0).unwrap(),
            ModelSpec::general_case1(ConstitutiveLaw::power_law(2.0).unwrap(), 1.5).unwrap(),
            ModelSpec::powerlaw_case1(0.5, -0.8).unwrap(),
            ModelSpec::newtonian_pv1(1.0, 1.0).unwrap(),
            ModelSpec::powerlaw_beta0(1.0).unwrap(),
            ModelSpec::mollified(1.0, 0.1, 1.0).unwrap(),
        ];
        for spec in specs {
            let exact = linear_response(&spec, 1.0, &v);
            let mut errs = vec![];
            for &delta in &[1e-4, 1e-5, 1e-6] {
                let fd = directional_derivative(&spec, 1.0, &v, delta);
                errs.push(fd.max_diff(&exact) / exact.max_abs());
            }
            assert!(errs[2] <= 1e-5, "{} {errs:?}", spec.name());
            // first order in delta until round-off
            assert!(errs[0] / errs[1] > 5.0, "{} {errs:?}", spec.name());
        }
    }

    #[test]
    fn linearisation_example_general_case1() {
        let spec = ModelSpec::general_case1(ConstitutiveLaw::Newtonian, 2.0).unwrap();
        let v = field(64, |t| (2.0 * t).cos());
        let fd = directional_derivative(&spec, 1.0, &v, 1e-6);
        // -d/dtheta(2 v + Q[v]/3) for v = cos 2theta
        let exact = field(64, |t| 4.0 * (2.0 * t).sin() - 4.0 * (2.0 * t).cos());
        assert!(fd.max_diff(&exact) / exact.max_abs() < 1e-5);
    }

    #[test]
    fn symbol_examples() {
        let newt = ModelSpec::newtonian_pv1(1.0, 1.0).unwrap();
        assert_eq!(linear_symbol(&newt, 1.0, 2).unwrap().re, -12.0);
        let case1 = ModelSpec::general_case1(ConstitutiveLaw::Newtonian, 2.0).unwrap();
        let l3 = linear_symbol(&case1, 1.0, 3).unwrap();
        assert!((l3 - Complex64::new(-24.0, -6.0)).norm() < 1e-13);
        for spec in [newt, case1] {
            for k in -1..=1 {
                assert_eq!(linear_symbol(&spec, 1.0, k).unwrap().re, 0.0);
            }
        }
        let thick = ModelSpec::powerlaw_case1(2.0, 0.0).unwrap();
        assert!(matches!(linear_symbol(&thick, 1.0, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn positivity_is_enforced() {
        let h = field(32, |t| 0.1 + 0.2 * t.cos());
        for spec in all_specs() {
            let r = rhs(&spec, &h);
            if spec.requires_positivity() {
                assert!(matches!(r, Err(Error::Positivity { .. })), "{}", spec.name());
            } else {
                assert!(r.is_ok());
            }
        }
    }

    #[test]
    fn variant_parameters_are_checked() {
        assert!(ModelSpec::new(ConstitutiveLaw::power_law(2.0).unwrap(), Variant::NewtonianPv1 { c_shear: 1.0, c_surf: 1.0 }).is_err());
        assert!(ModelSpec::general_case1(ConstitutiveLaw::Newtonian, f64::NAN).is_err());
        assert!(ModelSpec::mollified(2.0, -0.1, 1.0).is_err());
        assert!(ModelSpec::from_regime(Regime::Case3Unsupported, ConstitutiveLaw::Newtonian, 1.0).is_err());
        assert!(ModelSpec::from_regime(Regime::Case1, ConstitutiveLaw::Newtonian, 1.0).is_ok());
    }

    #[test]
    fn mollified_approaches_sharp_flux() {
        let h = field(64, smooth);
        let sharp = rhs(&ModelSpec::powerlaw_beta0(2.0).unwrap(), &h).unwrap();
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| rhs(&ModelSpec::mollified(2.0, e, 1.0).unwrap(), &h).unwrap().max_diff(&sharp))
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let h = field(32, smooth);
        // |Q|^(alpha-1) Q is not differentiable at zeros of Q when alpha < 1
        for spec in all_specs().into_iter().filter(|s| s.name() != "powerlaw_beta0" || s.law.alpha() > 1.0) {
            let j = jacobian(&spec, &h).unwrap();
            let v = field(32, |t| (2.0 * t + 0.3).cos() + 0.5 * (5.0 * t).sin());
            let delta = 1e-6;
            let rp = rhs(&spec, &h.axpy(delta, &v)).unwrap();
            let rm = rhs(&spec, &h.axpy(-delta, &v)).unwrap();
            let fd = rp.zip_map(&rm, |a, b| (a - b) / (2.0 * delta));
            let jv = &j * nalgebra::DVector::from_column_slice(v.values());
            let err = fd.values().iter().zip(jv.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-5 * fd.max_abs(), "{} {err}", spec.name());
        }
    }

    fn gentle(t: f64) -> f64 {
        1.0 + 0.02 * (2.0 * t).cos() + 0.01 * (3.0 * t + 0.4).sin() + 0.02 * t.cos()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn smooth_fluxes_commute_with_rotation(sigma in 0.0..2.0 * PI) {
            let h = field(64, gentle);
            let smooth_specs = [
                ModelSpec::general_case1(ConstitutiveLaw::power_law(2.0).unwrap(), 1.5).unwrap(),
                ModelSpec::powerlaw_case1(0.5, 2.0).unwrap(),
                ModelSpec::newtonian_pv1(1.0, 1.0).unwrap(),
            ];
            for spec in smooth_specs {
                let a = rhs(&spec, &h.shift(sigma)).unwrap();
                let b = rhs(&spec, &h).unwrap().shift(sigma);
                prop_assert!(a.max_diff(&b) < 1e-10, "{} {:e}", spec.name(), a.max_diff(&b));
            }
        }

        #[test]
        fn every_flux_commutes_with_grid_rotation(j in 0usize..64) {
            let h = field(64, smooth);
            let sigma = 2.0 * PI * j as f64 / 64.0;
            for spec in all_specs() {
                let a = rhs(&spec, &h.shift(sigma)).unwrap();
                let b = rhs(&spec, &h).unwrap().shift(sigma);
                prop_assert!(a.max_diff(&b) < 1e-10, "{} {:e}", spec.name(), a.max_diff(&b));
            }
        }
    }
}
