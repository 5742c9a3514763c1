//! Strong-field limit near full reflection, `γ = π/2 + δ`.
//!
//! Port 1 is then a single-mode squeezed coherent state `S(ζ)D(-αδκ)|0⟩`
//! with `κ = cosh r + e^{i(θ-2φ)} sinh r`, and its first two moments are
//! available in closed form.

use num_complex::Complex64;

use crate::distribution::{MarginalDistribution, Port};
use crate::error::{require, Error, Result};
use crate::numerics::{fock_amplitudes, CoherentParam, SqueezeParam};

/// Upper end of the bracket searched by [`optimal_r`].
pub const OPTIMAL_R_BRACKET: f64 = 5.0;
pub const MAX_DARK_N: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarkPortParams {
    /// `|αδ|²`.
    pub alpha_delta_sq: f64,
    pub squeeze: SqueezeParam,
    /// Phase φ of the coherent amplitude.
    pub phi: f64,
    /// Beam-splitter offset from full reflection.
    pub delta: f64,
}

impl DarkPortParams {
    pub fn new(alpha_delta_sq: f64, squeeze: SqueezeParam, phi: f64, delta: f64) -> Result<Self> {
        require(alpha_delta_sq.is_finite() && alpha_delta_sq >= 0.0, || {
            format!("|alpha delta|^2 must be finite and >= 0, got {alpha_delta_sq}")
        })?;
        require(phi.is_finite() && delta.is_finite(), || {
            "phi and delta must be finite".to_string()
        })?;
        Ok(DarkPortParams {
            alpha_delta_sq,
            squeeze,
            phi,
            delta,
        })
    }

    pub fn from_alpha(alpha: CoherentParam, squeeze: SqueezeParam, delta: f64) -> Result<Self> {
        Self::new((alpha.mag() * delta).powi(2), squeeze, alpha.phase(), delta)
    }

    /// `θ - 2φ`, the only phase combination the counting statistics see.
    pub fn relative_angle(&self) -> f64 {
        self.squeeze.theta() - 2.0 * self.phi
    }

    pub fn kappa(&self) -> KappaValue {
        kappa(self.squeeze.r(), self.relative_angle())
    }

    /// Coherent argument `-αδκ` of the dark-port state.
    pub fn coherent_arg(&self) -> Complex64 {
        let k = self.kappa();
        -Complex64::from_polar(self.alpha_delta_sq.sqrt(), self.phi) * Complex64::from_polar(k.modulus, k.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaValue {
    pub modulus: f64,
    /// λ.
    pub phase: f64,
}

/// `cosh r + e^{i·angle} sinh r` in polar form.
pub fn kappa(r: f64, angle: f64) -> KappaValue {
    let z = Complex64::new(r.cosh(), 0.0) + Complex64::from_polar(r.sinh(), angle);
    KappaValue {
        modulus: z.norm(),
        phase: z.arg(),
    }
}

/// The global phase `Δ = -½ sin(θ-2φ) e^{-2iφ} sinh 2r`. It drops out of every
/// counting statistic.
pub fn phase_delta(r: f64, theta: f64, phi: f64) -> Complex64 {
    Complex64::from_polar(-0.5 * (theta - 2.0 * phi).sin() * (2.0 * r).sinh(), -2.0 * phi)
}

/// Dark-port distribution on `0..=n_max`.
pub fn dark_distribution(p: &DarkPortParams, n_max: usize, norm_tol: f64) -> Result<MarginalDistribution> {
    require(norm_tol > 0.0, || format!("norm_tol must be > 0, got {norm_tol}"))?;
    let probs: Vec<f64> = fock_amplitudes(p.squeeze, p.coherent_arg(), n_max)
        .into_iter()
        .map(|a| a.norm_sqr())
        .collect();
    let defect = 1.0 - probs.iter().sum::<f64>();
    if defect > norm_tol {
        return Err(Error::GridTooSmall {
            n1_max: n_max,
            n2_max: 0,
            defect,
            tol: norm_tol,
        });
    }
    Ok(MarginalDistribution::from_probs(Port::One, probs))
}

/// [`dark_distribution`] with `n_max` doubled until the defect is within
/// `norm_tol`. Gives up once a doubling no longer halves the defect (the
/// remaining defect is rounding, not missing tail).
pub fn dark_distribution_auto(p: &DarkPortParams, norm_tol: f64) -> Result<MarginalDistribution> {
    let (mean, var) = dark_moments(p);
    let mut n_max = (mean + 10.0 * var.sqrt() + 20.0).ceil() as usize;
    let mut last_defect = f64::INFINITY;
    loop {
        match dark_distribution(p, n_max, norm_tol) {
            Err(Error::GridTooSmall { defect, .. }) if n_max < MAX_DARK_N && defect < 0.5 * last_defect => {
                last_defect = defect;
                n_max *= 2;
            }
            other => return other,
        }
    }
}

/// Closed-form `(mean, variance)` of the dark-port distribution.
pub fn dark_moments(p: &DarkPortParams) -> (f64, f64) {
    let r = p.squeeze.r();
    let k = p.kappa();
    let a = p.alpha_delta_sq * k.modulus * k.modulus;
    let c = (p.relative_angle() - 2.0 * k.phase).cos();
    let sh2 = r.sinh().powi(2);
    let mean = a * ((2.0 * r).cosh() - c * (2.0 * r).sinh()) + sh2;
    let variance = a * ((4.0 * r).cosh() - c * (4.0 * r).sinh()) + 2.0 * sh2 * r.cosh().powi(2);
    (mean, variance)
}

/// Variance at `θ = 2φ` as a function of `r`.
pub fn aligned_variance(alpha_delta_sq: f64, r: f64) -> f64 {
    alpha_delta_sq * (-2.0 * r).exp() + 2.0 * (r.sinh() * r.cosh()).powi(2)
}

/// Squeezing factor minimizing [`aligned_variance`], by bisection on the sign
/// of its derivative `-2A e^{-2r} + sinh 4r` (strictly increasing in `r`).
pub fn optimal_r(alpha_delta_sq: f64) -> Result<f64> {
    require(alpha_delta_sq.is_finite() && alpha_delta_sq > 0.0, || {
        format!("|alpha delta|^2 must be > 0, got {alpha_delta_sq}")
    })?;
    let slope = |r: f64| -2.0 * alpha_delta_sq * (-2.0 * r).exp() + (4.0 * r).sinh();
    require(slope(OPTIMAL_R_BRACKET) > 0.0, || {
        format!("optimum for |alpha delta|^2 = {alpha_delta_sq} lies beyond r = {OPTIMAL_R_BRACKET}")
    })?;
    let (mut lo, mut hi) = (0.0, OPTIMAL_R_BRACKET);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn params(a: f64, r: f64, theta: f64, phi: f64) -> DarkPortParams {
        DarkPortParams::new(a, SqueezeParam::new(r, theta).unwrap(), phi, 0.01).unwrap()
    }

    #[test]
    fn kappa_examples() {
        let k = kappa(0.8, 0.0);
        assert_relative_eq!(k.modulus, 0.8f64.exp(), max_relative = 1e-14);
        assert_eq!(k.phase, 0.0);
        let k = kappa(0.8, PI);
        assert_relative_eq!(k.modulus, (-0.8f64).exp(), max_relative = 1e-12);
        assert!(k.phase.abs() < 1e-15);
        let k = kappa(0.0, 2.1);
        assert_eq!((k.modulus, k.phase), (1.0, 0.0));
        assert_relative_eq!(kappa(1.0, FRAC_PI_2).modulus, 2f64.cosh().sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn phase_delta_examples() {
        assert_eq!(phase_delta(0.7, 1.0, 0.5).norm(), 0.0);
        assert_eq!(phase_delta(0.0, 1.0, 0.2).norm(), 0.0);
        let d = phase_delta(1.0, FRAC_PI_2, 0.0);
        assert_relative_eq!(d.re, -0.5 * 2f64.sinh(), max_relative = 1e-14);
        assert!((d.re + 1.8134).abs() < 1e-4);
    }

    #[test]
    fn unsqueezed_is_poisson() {
        let d = dark_distribution_auto(&params(20.0, 0.0, 0.0, 0.0), 1e-12).unwrap();
        for (n, p) in d.probs.iter().enumerate().take(60) {
            let poisson = (n as f64 * 20f64.ln() - 20.0 - crate::numerics::ln_factorial(n)).exp();
            assert_relative_eq!(*p, poisson, max_relative = 1e-10);
        }
    }

    #[test]
    fn no_signal_is_squeezed_vacuum() {
        let d = dark_distribution_auto(&params(0.0, 1.0, 0.3, 0.0), 1e-12).unwrap();
        for (n, p) in d.probs.iter().enumerate() {
            if n % 2 == 1 {
                assert_eq!(*p, 0.0);
            }
        }
        assert_relative_eq!(d.mean, 1f64.sinh().powi(2), max_relative = 1e-9);
    }

    #[test]
    fn aligned_means() {
        for r in [0.3, 0.6, 0.9, 1.2, 1.5] {
            let d = dark_distribution_auto(&params(20.0, r, 0.4, 0.2), 1e-12).unwrap();
            assert_relative_eq!(d.mean, 20.0 + r.sinh().powi(2), max_relative = 1e-6);
        }
    }

    #[test]
    fn aligned_moment_formulas() {
        let p = params(20.0, 0.7, 1.0, 0.5);
        let (m, v) = dark_moments(&p);
        assert_relative_eq!(m, 20.0 + 0.7f64.sinh().powi(2), max_relative = 1e-13);
        assert_relative_eq!(v, aligned_variance(20.0, 0.7), max_relative = 1e-13);
        let (m, v) = dark_moments(&params(7.0, 0.0, 0.3, 1.1));
        assert_relative_eq!(m, 7.0, max_relative = 1e-14);
        assert_relative_eq!(v, 7.0, max_relative = 1e-14);
    }

    #[test]
    fn summed_moments_match_closed_form() {
        for &a in &[0.0, 1.0, 20.0, 500.0] {
            for j in 0..=5 {
                let r = 0.3 * j as f64;
                for &angle in &[0.0, FRAC_PI_4, FRAC_PI_2, PI] {
                    let p = params(a, r, angle + 0.6, 0.3);
                    let d = dark_distribution_auto(&p, 1e-9).unwrap();
                    let (m, v) = dark_moments(&p);
                    let close = |x: f64, y: f64| (x - y).abs() <= 1e-6 * y.abs().max(1e-12);
                    assert!(close(d.mean, m), "a={a} r={r} angle={angle}: mean {} vs {m}", d.mean);
                    assert!(
                        close(d.variance, v),
                        "a={a} r={r} angle={angle}: var {} vs {v}",
                        d.variance
                    );
                }
            }
        }
    }

    #[test]
    fn strong_squeezing_oscillates() {
        let d = dark_distribution(&params(20.0, 1.5, 0.0, 0.0), 400, 1e-9).unwrap();
        let p = &d.probs[..=100];
        let maxima = (1..100).filter(|&n| p[n] > p[n - 1] && p[n] > p[n + 1]).count();
        assert!(maxima >= 2, "{maxima} local maxima");
    }

    #[test]
    fn truncated_grid_is_rejected() {
        assert!(matches!(
            dark_distribution(&params(20.0, 0.5, 0.0, 0.0), 10, 1e-6),
            Err(Error::GridTooSmall { .. })
        ));
    }

    #[test]
    fn optimal_r_examples() {
        let r20 = optimal_r(20.0).unwrap();
        assert!((0.72..=0.74).contains(&r20), "{r20}");
        assert!(optimal_r(500.0).unwrap() > r20);
        assert!(optimal_r(1e-9).unwrap() < 1e-3);
        assert!(optimal_r(0.0).is_err());
        // derivative vanishes at the optimum
        let h = 1e-5;
        assert!(aligned_variance(20.0, r20) < aligned_variance(20.0, r20 + h));
        assert!(aligned_variance(20.0, r20) < aligned_variance(20.0, r20 - h));
    }

    #[test]
    fn optimal_r_is_monotone() {
        let mut prev = 0.0;
        for i in 0..50 {
            let a = 10f64.powf(4.0 * i as f64 / 49.0);
            let r = optimal_r(a).unwrap();
            assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn params_from_alpha() {
        let p = DarkPortParams::from_alpha(
            CoherentParam::new(100.0, 0.3).unwrap(),
            SqueezeParam::new(0.5, 0.6).unwrap(),
            0.05,
        )
        .unwrap();
        assert_relative_eq!(p.alpha_delta_sq, 25.0, max_relative = 1e-14);
        assert_relative_eq!(p.relative_angle(), 0.0, epsilon = 1e-15);
        assert!(DarkPortParams::new(-1.0, SqueezeParam::vacuum(), 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn kappa_modulus_identity(r in 0.0f64..3.0, angle in -PI..PI) {
            let k = kappa(r, angle);
            let expect = (2.0 * r).cosh() + angle.cos() * (2.0 * r).sinh();
            prop_assert!((k.modulus.powi(2) - expect).abs() <= 1e-12 * expect.max(1.0));
            prop_assert!(k.modulus >= (-r).exp() * (1.0 - 1e-12));
            prop_assert!(k.modulus <= r.exp() * (1.0 + 1e-12));
        }
    }
}
