//! Physical parameters, the dimensionless groups of the thin-film limit,
//! regime classification and the Case I / Case II rescalings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensional inputs in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSetup {
    /// Inner cylinder radius, m.
    #[serde(rename = "R_minus")]
    pub r_minus: f64,
    /// Outer cylinder radius, m.
    #[serde(rename = "R_plus")]
    pub r_plus: f64,
    /// Mean inner-film thickness, m.
    pub d: f64,
    /// Angular velocity, 1/s.
    pub omega: f64,
    /// Consistency of the power-law film, Pa s^p.
    pub mu0: f64,
    /// Viscosity of the outer fluid, Pa s.
    pub mu_plus: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    /// Surface tension, N/m.
    pub gamma_tilde: f64,
    /// Characteristic time of the rheology, s.
    pub tau_char: f64,
    pub p: f64,
}

impl PhysicalSetup {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let fields = [
            ("R_minus", self.r_minus),
            ("R_plus", self.r_plus),
            ("d", self.d),
            ("omega", self.omega),
            ("mu0", self.mu0),
            ("mu_plus", self.mu_plus),
            ("rho_minus", self.rho_minus),
            ("rho_plus", self.rho_plus),
            ("gamma_tilde", self.gamma_tilde),
            ("tau_char", self.tau_char),
            ("p", self.p),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                bad.push(format!("{name} must be positive (got {v})"));
            }
        }
        if self.r_plus <= self.r_minus {
            bad.push("R_plus must exceed R_minus".to_string());
        }
        if self.d >= self.r_minus {
            bad.push("d must be smaller than R_minus".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "case1")]
    Case1,
    #[serde(rename = "case2_smallB")]
    Case2SmallB,
    #[serde(rename = "case2_largeB")]
    Case2LargeB,
    #[serde(rename = "case3_unsupported")]
    Case3Unsupported,
}

impl Regime {
    pub fn is_supported(&self) -> bool {
        *self != Regime::Case3Unsupported
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub b_lo: f64,
    pub b_hi: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { beta_lo: 0.1, beta_hi: 10.0, b_lo: 0.1, b_hi: 10.0 }
    }
}

/// Reynolds number above which the flow is flagged as possibly unstable.
pub const RE_WARNING: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub eps_film: f64,
    pub eta: f64,
    pub rho: f64,
    #[serde(rename = "Re")]
    pub re: f64,
    pub tau: f64,
    pub mu: f64,
    pub gamma: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub beta: f64,
    pub beta_tilde: f64,
    pub regime: Regime,
    pub warnings: Vec<String>,
}

/// `D = 2 eta^2 / (eta^2 - 1)`.
pub fn d_coefficient(eta: f64) -> f64 {
    2.0 * eta * eta / (eta * eta - 1.0)
}

pub fn nondimensionalize(phys: &PhysicalSetup) -> Result<ScalingReport> {
    nondimensionalize_with(phys, &Thresholds::default())
}

pub fn nondimensionalize_with(phys: &PhysicalSetup, thresholds: &Thresholds) -> Result<ScalingReport> {
    phys.validate()?;
    let eps_film = phys.d / phys.r_minus;
    let eta = phys.r_plus / phys.r_minus;
    let rho = phys.rho_minus / phys.rho_plus;
    let re = phys.rho_plus * phys.omega * phys.r_minus * phys.r_minus / phys.mu_plus;
    let tau = phys.tau_char * phys.omega;
    let mu = phys.mu0 / phys.mu_plus;
    let gamma = phys.gamma_tilde / (phys.rho_plus * phys.r_minus.powi(3) * phys.omega * phys.omega);
    let d = d_coefficient(eta);
    let a = tau * d / mu;
    let b = tau * eps_film * eps_film * gamma * re / mu;
    let beta = a / b;
    let beta_tilde = b * beta;
    let mut warnings = Vec::new();
    if re > RE_WARNING {
        warnings.push(format!("Re = {re:.3} exceeds {RE_WARNING}; the base flow may be unstable"));
    }
    let mut rep = ScalingReport {
        eps_film,
        eta,
        rho,
        re,
        tau,
        mu,
        gamma,
        d,
        a,
        b,
        beta,
        beta_tilde,
        regime: Regime::Case1,
        warnings,
    };
    rep.regime = classify_regime(&rep, thresholds);
    Ok(rep)
}

/// `beta` from its physical form `D R_- omega mu_+ / (eps^2 gamma_tilde)`.
pub fn beta_physical(phys: &PhysicalSetup) -> f64 {
    let eps = phys.d / phys.r_minus;
    d_coefficient(phys.r_plus / phys.r_minus) * phys.r_minus * phys.omega * phys.mu_plus
        / (eps * eps * phys.gamma_tilde)
}

/// `B` from its physical form `gamma_tilde eps^2 tau_char / (mu0 R_-)`.
pub fn b_physical(phys: &PhysicalSetup) -> f64 {
    let eps = phys.d / phys.r_minus;
    phys.gamma_tilde * eps * eps * phys.tau_char / (phys.mu0 * phys.r_minus)
}

/// Intermediate `beta` with `B` inside `[b_lo, b_hi]` is treated as Case I.
pub fn classify_regime(rep: &ScalingReport, t: &Thresholds) -> Regime {
    classify(rep.beta, rep.b, t)
}

pub fn classify(beta: f64, b: f64, t: &Thresholds) -> Regime {
    if beta > t.beta_hi {
        Regime::Case3Unsupported
    } else if beta >= t.beta_lo {
        Regime::Case1
    } else if b < t.b_lo {
        Regime::Case2SmallB
    } else if b > t.b_hi {
        Regime::Case2LargeB
    } else {
        Regime::Case1
    }
}

fn check_b(b: f64) -> Result<()> {
    if b.is_finite() && b > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("B must be positive, got {b}")))
    }
}

/// Case I: `h~ = sqrt(B) h`, `t~ = (eps/tau) t / sqrt(B)`.
pub fn rescale_case1(h: f64, t: f64, b: f64, eps_film: f64, tau: f64) -> Result<(f64, f64)> {
    check_b(b)?;
    let s = b.sqrt();
    Ok((s * h, eps_film / tau / s * t))
}

pub fn unscale_case1(h_t: f64, t_t: f64, b: f64, eps_film: f64, tau: f64) -> Result<(f64, f64)> {
    check_b(b)?;
    let s = b.sqrt();
    Ok((h_t / s, t_t * s * tau / eps_film))
}

/// Case II: `t~ = (eps/tau) B^(1/p) t`.
pub fn rescale_case2_time(t: f64, b: f64, p: f64, eps_film: f64, tau: f64) -> Result<f64> {
    check_b(b)?;
    Ok(eps_film / tau * b.powf(1.0 / p) * t)
}

pub fn unscale_case2_time(t_t: f64, b: f64, p: f64, eps_film: f64, tau: f64) -> Result<f64> {
    check_b(b)?;
    Ok(t_t * tau / (eps_film * b.powf(1.0 / p)))
}

/// Circle approximating the interface at late times, in the original
/// non-dimensional variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralCircle {
    /// Distance of the centre from the axis.
    pub sigma: f64,
    /// Polar angle of the centre.
    pub theta0: f64,
    pub r0: f64,
}

/// Spiral constants `(K, K~, C0)` of the rescaled problem mapped back to the
/// original variables at time `t`; `psi_beta` is `psi(beta~)`.
#[allow(clippy::too_many_arguments)]
pub fn spiral_in_original_variables(
    k: f64,
    k_tilde: f64,
    c0: f64,
    c: f64,
    psi_beta: f64,
    b: f64,
    eps_film: f64,
    tau: f64,
    t: f64,
) -> Result<SpiralCircle> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    check_b(b)?;
    let lambda = 1.0 / b.sqrt();
    let s = eps_film / tau * lambda * t;
    Ok(SpiralCircle {
        sigma: 2.0 * k * eps_film * lambda / s.sqrt(),
        theta0: c * psi_beta * s + k_tilde * s.ln() + c0,
        r0: 1.0 + eps_film * lambda * c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn worked_example() -> PhysicalSetup {
        PhysicalSetup {
            r_minus: 0.05,
            r_plus: 0.1,
            d: 0.005,
            omega: 1.0,
            mu0: 1.0,
            mu_plus: 1.0,
            rho_minus: 1000.0,
            rho_plus: 1000.0,
            gamma_tilde: 0.07,
            tau_char: 1.0,
            p: 1.0,
        }
    }

    #[test]
    fn worked_example_groups() {
        let r = nondimensionalize(&worked_example()).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        assert!(close(r.eps_film, 0.1));
        assert!(close(r.eta, 2.0));
        assert!(close(r.re, 2.5));
        assert!(close(r.tau, 1.0));
        assert!(close(r.mu, 1.0));
        assert!(close(r.gamma, 0.56));
        assert!(close(r.d, 8.0 / 3.0));
        assert!(close(r.b, 0.014));
        assert!((r.beta - 190.476).abs() < 1e-3);
        assert!(close(r.beta_tilde, 8.0 / 3.0));
        assert_eq!(r.beta_tilde, r.b * r.beta);
        assert_eq!(r.regime, Regime::Case3Unsupported);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn d_coefficient_decreases_to_two() {
        assert!((d_coefficient(2.0) - 8.0 / 3.0).abs() < 1e-15);
        let etas = [1.1, 1.5, 2.0, 5.0, 50.0];
        for w in etas.windows(2) {
            assert!(d_coefficient(w[0]) > d_coefficient(w[1]));
        }
        assert!(d_coefficient(50.0) > 2.0 && d_coefficient(50.0) - 2.0 < 1e-3);
        assert!(d_coefficient(1e8) - 2.0 < 1e-15);
    }

    #[test]
    fn validation_lists_offending_fields() {
        let mut s = worked_example();
        s.mu0 = -1.0;
        s.r_plus = 0.01;
        match nondimensionalize(&s) {
            Err(Error::Validation(list)) => {
                assert!(list.iter().any(|m| m.contains("mu0")));
                assert!(list.iter().any(|m| m.contains("R_plus")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn regime_examples() {
        let t = Thresholds::default();
        assert_eq!(classify(1.0, 1.0, &t), Regime::Case1);
        assert_eq!(classify(1e-4, 1e-3, &t), Regime::Case2SmallB);
        assert_eq!(classify(1e-4, 1e3, &t), Regime::Case2LargeB);
        assert_eq!(classify(1e4, 1.0, &t), Regime::Case3Unsupported);
        assert_eq!(classify(1e-4, 1.0, &t), Regime::Case1);
    }

    #[test]
    fn high_reynolds_warns() {
        let mut s = worked_example();
        s.omega = 100.0;
        assert!(!nondimensionalize(&s).unwrap().warnings.is_empty());
    }

    #[test]
    fn rescaling_examples() {
        let (h, _) = rescale_case1(2.0, 1.0, 4.0, 0.1, 1.0).unwrap();
        assert_eq!(h, 4.0);
        let (_, t1) = rescale_case1(1.0, 3.0, 1.0, 0.1, 2.0).unwrap();
        let t2 = rescale_case2_time(3.0, 1.0, 1.0, 0.1, 2.0).unwrap();
        assert!((t1 - 0.15).abs() < 1e-15 && (t2 - 0.15).abs() < 1e-15);
        assert!(rescale_case1(1.0, 1.0, 0.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn spiral_examples() {
        let s = spiral_in_original_variables(1.0, 0.25, 0.3, 1.0, 2.0, 4.0, 0.1, 1.0, 7.0).unwrap();
        assert!((s.r0 - 1.05).abs() < 1e-15);
        let s4 = spiral_in_original_variables(1.0, 0.25, 0.3, 1.0, 2.0, 4.0, 0.1, 1.0, 28.0).unwrap();
        assert!((s4.sigma / s.sigma - 0.5).abs() < 1e-14);
        let s10 = spiral_in_original_variables(1.0, 0.25, 0.3, 1.0, 2.0, 4.0, 0.1, 1.0, 70.0).unwrap();
        let expected = 1.0 * 2.0 * 0.1 * 0.5 * 63.0 + 0.25 * 10f64.ln();
        assert!((s10.theta0 - s.theta0 - expected).abs() < 1e-12);
        assert!(spiral_in_original_variables(1.0, 0.25, 0.3, 1.0, 2.0, 4.0, 0.1, 1.0, 0.0).is_err());
    }

    fn setup_strategy() -> impl Strategy<Value = PhysicalSetup> {
        (0.01..1.0f64, 1.05..5.0f64, 0.001..0.2f64, 0.1..100.0f64, (0.01..10.0f64, 0.01..10.0f64), (100.0..3000.0f64, 100.0..3000.0f64), 0.01..0.1f64, 0.1..10.0f64, 0.3..3.0f64)
            .prop_map(|(rm, ratio, frac, omega, (mu0, mup), (rhom, rhop), g, tc, p)| PhysicalSetup {
                r_minus: rm,
                r_plus: rm * ratio,
                d: rm * frac,
                omega,
                mu0,
                mu_plus: mup,
                rho_minus: rhom,
                rho_plus: rhop,
                gamma_tilde: g,
                tau_char: tc,
                p,
            })
    }

    proptest! {
        #[test]
        fn printed_forms_agree(s in setup_strategy()) {
            let r = nondimensionalize(&s).unwrap();
            prop_assert!((r.beta - beta_physical(&s)).abs() <= 1e-12 * r.beta);
            prop_assert!((r.b - b_physical(&s)).abs() <= 1e-12 * r.b);
            prop_assert!((r.beta_tilde - r.a).abs() <= 1e-14 * r.a);
            prop_assert_eq!(r.beta_tilde, r.b * r.beta);
        }

        #[test]
        fn rescaling_round_trips(h in 0.1..10.0f64, t in 0.0..100.0f64, b in 1e-3..1e3f64, p in 0.3..3.0f64) {
            let (ht, tt) = rescale_case1(h, t, b, 0.1, 2.0).unwrap();
            let (h2, t2) = unscale_case1(ht, tt, b, 0.1, 2.0).unwrap();
            prop_assert!((h2 - h).abs() <= 1e-14 * h && (t2 - t).abs() <= 1e-14 * t.max(1.0));
            let t3 = unscale_case2_time(rescale_case2_time(t, b, p, 0.1, 2.0).unwrap(), b, p, 0.1, 2.0).unwrap();
            prop_assert!((t3 - t).abs() <= 1e-14 * t.max(1.0));
        }
    }
}
