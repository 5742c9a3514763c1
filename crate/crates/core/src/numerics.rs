//! Log-domain complex arithmetic, Hermite polynomials of complex argument and
//! the Fock amplitudes of a squeezed coherent state.
//!
//! Every quantity that can overflow (Hermite values, factorials, the terms of
//! the joint-distribution sum) is carried as a [`LogComplex`], a complex number
//! stored as `(ln |z|, arg z)`.

use std::f64::consts::{LN_2, PI};
use std::ops::{Div, Mul, Neg};

use num_complex::Complex64;

use crate::error::{require, Result};

/// Below this squeezing factor the analytic coherent-state limit of the Fock
/// amplitudes is used; the general formula is 0/0 at `r = 0`.
pub const COHERENT_LIMIT_R: f64 = 1e-8;

/// Relative floor under which a complex sum is treated as exact cancellation.
const CANCELLATION_FLOOR: f64 = 4.0 * f64::EPSILON;

/// Maps an angle onto `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    if !angle.is_finite() {
        return angle;
    }
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        PI
    } else {
        wrapped
    }
}

/// A complex number stored as natural log of its modulus and its phase.
///
/// `log_mag == -inf` encodes an exact zero; in that case the phase is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogComplex {
    pub log_mag: f64,
    pub phase: f64,
}

impl LogComplex {
    pub const ZERO: LogComplex = LogComplex {
        log_mag: f64::NEG_INFINITY,
        phase: 0.0,
    };
    pub const ONE: LogComplex = LogComplex {
        log_mag: 0.0,
        phase: 0.0,
    };

    pub fn new(log_mag: f64, phase: f64) -> Self {
        if log_mag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogComplex {
                log_mag,
                phase: normalize_angle(phase),
            }
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        let modulus = z.norm();
        if modulus == 0.0 {
            Self::ZERO
        } else {
            Self::new(modulus.ln(), z.arg())
        }
    }

    pub fn from_real(x: f64) -> Self {
        Self::from_complex(Complex64::new(x, 0.0))
    }

    pub fn to_complex(self) -> Complex64 {
        if self.is_zero() {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(self.log_mag.exp(), self.phase)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_mag == f64::NEG_INFINITY
    }

    /// `|z|²` as an ordinary float (may underflow to 0 or overflow to inf).
    pub fn norm_sqr(self) -> f64 {
        (2.0 * self.log_mag).exp()
    }

    /// Multiplies by the positive real `e^{ln_factor}`.
    pub fn scale_ln(self, ln_factor: f64) -> Self {
        Self::new(self.log_mag + ln_factor, self.phase)
    }

    pub fn conj(self) -> Self {
        Self::new(self.log_mag, -self.phase)
    }

    /// Integer power; `z^0 = 1` including `0^0`.
    pub fn powi(self, n: u32) -> Self {
        if n == 0 {
            Self::ONE
        } else {
            let k = f64::from(n);
            Self::new(k * self.log_mag, k * self.phase)
        }
    }
}

impl Mul for LogComplex {
    type Output = LogComplex;

    fn mul(self, rhs: LogComplex) -> LogComplex {
        logc_mul(self, rhs)
    }
}

impl Div for LogComplex {
    type Output = LogComplex;

    fn div(self, rhs: LogComplex) -> LogComplex {
        if self.is_zero() {
            return LogComplex::ZERO;
        }
        LogComplex::new(self.log_mag - rhs.log_mag, self.phase - rhs.phase)
    }
}

impl Neg for LogComplex {
    type Output = LogComplex;

    fn neg(self) -> LogComplex {
        LogComplex::new(self.log_mag, self.phase + PI)
    }
}

/// Product of two log-domain numbers. Zero absorbs.
pub fn logc_mul(a: LogComplex, b: LogComplex) -> LogComplex {
    if a.is_zero() || b.is_zero() {
        return LogComplex::ZERO;
    }
    LogComplex::new(a.log_mag + b.log_mag, a.phase + b.phase)
}

/// Sum of log-domain numbers with the largest modulus factored out.
///
/// A sum that cancels down to rounding level of `Σ|terms|` is returned as an
/// exact zero.
pub fn logc_sum(terms: &[LogComplex]) -> LogComplex {
    let max = terms.iter().map(|t| t.log_mag).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return LogComplex::ZERO;
    }
    if !max.is_finite() {
        return LogComplex {
            log_mag: max,
            phase: f64::NAN,
        };
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut abs_acc = 0.0;
    for t in terms.iter().filter(|t| !t.is_zero()) {
        let w = (t.log_mag - max).exp();
        acc += Complex64::from_polar(w, t.phase);
        abs_acc += w;
    }
    let modulus = acc.norm();
    if modulus <= CANCELLATION_FLOOR * abs_acc {
        LogComplex::ZERO
    } else {
        LogComplex::new(max + modulus.ln(), acc.arg())
    }
}

/// Table of `ln n!` for `n = 0..=n_max`.
#[derive(Debug, Clone)]
pub struct LnFactorials {
    table: Vec<f64>,
}

impl LnFactorials {
    pub fn new(n_max: usize) -> Self {
        let table = (0..=n_max as u64)
            .map(statrs::function::factorial::ln_factorial)
            .collect();
        LnFactorials { table }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    #[inline]
    pub fn get(&self, n: usize) -> f64 {
        self.table[n]
    }
}

pub fn ln_factorial(n: usize) -> f64 {
    statrs::function::factorial::ln_factorial(n as u64)
}

/// Squeezing parameter `ζ = r e^{iθ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeParam {
    r: f64,
    theta: f64,
}

impl SqueezeParam {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        require(r.is_finite() && r >= 0.0, || {
            format!("squeezing factor must be finite and >= 0, got {r}")
        })?;
        require(theta.is_finite(), || {
            format!("squeezing phase must be finite, got {theta}")
        })?;
        Ok(SqueezeParam {
            r,
            theta: normalize_angle(theta),
        })
    }

    pub fn vacuum() -> Self {
        SqueezeParam { r: 0.0, theta: 0.0 }
    }

    /// `ζ = σ e^{iθ}` for a real, possibly negative, `σ`.
    pub fn from_signed(sigma: f64, theta: f64) -> Self {
        debug_assert!(sigma.is_finite() && theta.is_finite());
        if sigma < 0.0 {
            SqueezeParam {
                r: -sigma,
                theta: normalize_angle(theta + PI),
            }
        } else {
            SqueezeParam {
                r: sigma,
                theta: normalize_angle(theta),
            }
        }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn zeta(&self) -> Complex64 {
        Complex64::from_polar(self.r, self.theta)
    }
}

/// Coherent amplitude `α = |α| e^{iφ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentParam {
    mag: f64,
    phase: f64,
}

impl CoherentParam {
    pub fn new(mag: f64, phase: f64) -> Result<Self> {
        require(mag.is_finite() && mag >= 0.0, || {
            format!("coherent amplitude modulus must be finite and >= 0, got {mag}")
        })?;
        require(phase.is_finite(), || {
            format!("coherent phase must be finite, got {phase}")
        })?;
        Ok(CoherentParam {
            mag,
            phase: normalize_angle(phase),
        })
    }

    /// From the mean photon number `|α|²` and phase `φ`.
    pub fn from_intensity(intensity: f64, phase: f64) -> Result<Self> {
        require(intensity.is_finite() && intensity >= 0.0, || {
            format!("|alpha|^2 must be finite and >= 0, got {intensity}")
        })?;
        Self::new(intensity.sqrt(), phase)
    }

    pub fn mag(&self) -> f64 {
        self.mag
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn intensity(&self) -> f64 {
        self.mag * self.mag
    }

    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.mag, self.phase)
    }
}

/// `H_0(x) ..= H_{n_max}(x)` (physicists' Hermite polynomials) by forward
/// recurrence, carried in log-domain.
pub fn hermite_seq(x: Complex64, n_max: usize) -> Vec<LogComplex> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(LogComplex::ONE);
    if n_max == 0 {
        return out;
    }
    let two_x = LogComplex::from_complex(2.0 * x);
    out.push(two_x);
    for n in 1..n_max {
        let lead = two_x * out[n];
        let back = LogComplex::new((2.0 * n as f64).ln(), PI) * out[n - 1];
        out.push(logc_sum(&[lead, back]));
    }
    out
}

/// `f_0 ..= f_{n_max}` such that `S(ζ)D(β)|0⟩ = Σ_n f_n/√(n!) |n⟩`.
pub fn fock_coeff(zeta: SqueezeParam, beta: Complex64, n_max: usize) -> Vec<LogComplex> {
    let gauss = -0.5 * beta.norm_sqr();
    if zeta.r() < COHERENT_LIMIT_R {
        // f_n = β^n e^{-|β|²/2}
        let lb = LogComplex::from_complex(beta);
        return (0..=n_max)
            .map(|n| {
                if n == 0 {
                    LogComplex::new(gauss, 0.0)
                } else {
                    LogComplex::new(n as f64 * lb.log_mag + gauss, n as f64 * lb.phase)
                }
            })
            .collect();
    }

    let (r, theta) = (zeta.r(), zeta.theta());
    let t = r.tanh();
    let ch = r.cosh();
    let x = beta * Complex64::from_polar(1.0, -0.5 * theta) / (2.0 * ch * r.sinh()).sqrt();
    let hermite = hermite_seq(x, n_max);
    let expo = -0.5 * (beta.norm_sqr() - Complex64::from_polar(t, -theta) * beta * beta);
    let ln_step = 0.5 * (t.ln() - LN_2);
    let ln_base = expo.re - 0.5 * ch.ln();

    hermite
        .iter()
        .enumerate()
        .map(|(n, h)| {
            if h.is_zero() {
                return LogComplex::ZERO;
            }
            let k = n as f64;
            LogComplex::new(k * ln_step + ln_base + h.log_mag, 0.5 * k * theta + expo.im + h.phase)
        })
        .collect()
}

/// Normalized Fock amplitudes `⟨n|S(ζ)D(β)|0⟩ = f_n/√(n!)` as ordinary complex numbers.
pub fn fock_amplitudes(zeta: SqueezeParam, beta: Complex64, n_max: usize) -> Vec<Complex64> {
    fock_coeff(zeta, beta, n_max)
        .into_iter()
        .enumerate()
        .map(|(n, f)| f.scale_ln(-0.5 * ln_factorial(n)).to_complex())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn angle_normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert_relative_eq!(normalize_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(normalize_angle(-0.5 * PI), -0.5 * PI);
        assert_relative_eq!(normalize_angle(2.5 * PI), 0.5 * PI, epsilon = 1e-12);
    }

    #[test]
    fn mul_examples() {
        let one = LogComplex::new(0.0, 0.0);
        assert_eq!(logc_mul(one, one), LogComplex::new(0.0, 0.0));

        let zero = LogComplex::new(f64::NEG_INFINITY, 1.3);
        let p = logc_mul(zero, LogComplex::new(5.0, 1.0));
        assert!(p.is_zero());
        assert_eq!(p.phase, 0.0);

        let p = logc_mul(
            LogComplex::new(2f64.ln(), PI / 2.0),
            LogComplex::new(3f64.ln(), PI / 2.0),
        );
        assert_relative_eq!(p.log_mag, 6f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(p.phase, PI, epsilon = 1e-15);
    }

    #[test]
    fn sum_examples() {
        let s = logc_sum(&[LogComplex::new(0.0, 0.0), LogComplex::new(0.0, PI)]);
        assert!(s.is_zero());
        assert_eq!(s.phase, 0.0);

        let s = logc_sum(&[LogComplex::new(0.0, 0.0)]);
        assert_eq!(s, LogComplex::new(0.0, 0.0));

        let s = logc_sum(&[LogComplex::new(3f64.ln(), 0.0), LogComplex::new(4f64.ln(), PI / 2.0)]);
        assert_relative_eq!(s.log_mag, 5f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(s.phase, 4f64.atan2(3.0), epsilon = 1e-15);

        assert!(logc_sum(&[]).is_zero());
    }

    #[test]
    fn sum_handles_huge_magnitudes() {
        // e^{5000}(1 + i) + e^{4990}
        let s = logc_sum(&[
            LogComplex::new(5000.0 + 0.5 * 2f64.ln(), PI / 4.0),
            LogComplex::new(4990.0, 0.0),
        ]);
        let expected = (1.0 + (-10f64).exp()).hypot(1.0).ln() + 5000.0;
        assert_relative_eq!(s.log_mag, expected, epsilon = 1e-12);
    }

    #[test]
    fn hermite_small_examples() {
        let h = hermite_seq(c(0.5, 0.0), 1);
        assert_eq!(h.len(), 2);
        assert_relative_eq!(h[0].to_complex().re, 1.0);
        assert_relative_eq!(h[1].to_complex().re, 1.0, epsilon = 1e-15);

        let h = hermite_seq(c(2.0, 0.0), 2);
        let vals: Vec<f64> = h.iter().map(|v| v.to_complex().re).collect();
        assert_relative_eq!(vals[0], 1.0);
        assert_relative_eq!(vals[1], 4.0, epsilon = 1e-14);
        assert_relative_eq!(vals[2], 14.0, epsilon = 1e-14);
    }

    /// Explicit sum `H_n(x) = n! Σ_m (-1)^m (2x)^{n-2m} / (m! (n-2m)!)`.
    fn hermite_explicit(x: Complex64, n: usize) -> Complex64 {
        let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        (0..=n / 2)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                (2.0 * x).powu((n - 2 * m) as u32) * (sign * fact(n) / (fact(m) * fact(n - 2 * m)))
            })
            .sum()
    }

    #[test]
    fn hermite_matches_explicit_polynomials() {
        for &x in &[c(1.0, 1.0), c(-0.3, 0.7), c(2.5, -1.2), c(0.0, 0.4)] {
            let rec = hermite_seq(x, 10);
            for (n, h) in rec.iter().enumerate() {
                let expect = hermite_explicit(x, n);
                let got = h.to_complex();
                assert!(
                    (got - expect).norm() <= 1e-11 * expect.norm().max(1.0),
                    "n={n} x={x}: {got} vs {expect}"
                );
            }
        }
        let h3 = hermite_seq(c(1.0, 1.0), 3)[3].to_complex();
        let x = c(1.0, 1.0);
        let closed = 8.0 * x * x * x - 12.0 * x;
        assert_relative_eq!(h3.re, closed.re, epsilon = 1e-12);
        assert_relative_eq!(h3.im, closed.im, epsilon = 1e-12);
    }

    #[test]
    fn hermite_reaches_enormous_orders() {
        let h = hermite_seq(c(30.0, 5.0), 1500);
        let last = h[1500];
        assert!(last.log_mag.is_finite());
        // leading behaviour (2x)^n dominates for |x|² ≫ n
        assert!(last.log_mag > 1500.0 * (60.0f64).ln() - 1500.0);
    }

    #[test]
    fn coherent_vacuum_overlap() {
        let f = fock_coeff(SqueezeParam::vacuum(), c(1.0, 0.0), 0);
        assert_relative_eq!(f[0].to_complex().re, (-0.5f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn small_r_matches_coherent_limit() {
        // the exact amplitudes differ from the limit at first order in r, with
        // a coefficient growing like n²/|β|²; the numerics must track that
        let beta = c(1.1, -0.4);
        let mean = beta.norm_sqr();
        let deviation = |r: f64, n: usize| {
            let f = fock_coeff(SqueezeParam::new(r, 0.3).unwrap(), beta, n)[n].to_complex();
            let limit = beta.powu(n as u32) * (-0.5 * mean).exp();
            (f - limit).norm() / limit.norm()
        };
        for n in 0..=25 {
            let d = deviation(1e-6, n);
            assert!(d <= 1e-6 * (1.0 + (n * n) as f64 / mean), "n={n}: {d}");
            // linear in r
            let ratio = deviation(2e-6, n) / d;
            assert!((ratio - 2.0).abs() < 1e-3, "n={n}: ratio {ratio}");
        }
        let f = fock_coeff(SqueezeParam::new(1e-6, 0.3).unwrap(), beta, 1);
        for (n, fv) in f.iter().enumerate() {
            let poisson = (n as f64 * mean.ln() - mean - ln_factorial(n)).exp();
            let p = fv.norm_sqr() / ln_factorial(n).exp();
            assert_relative_eq!(p, poisson, max_relative = 1e-6);
        }
    }

    #[test]
    fn squeezed_vacuum_has_even_parity() {
        let zeta = SqueezeParam::new(0.5, 0.0).unwrap();
        let f = fock_coeff(zeta, c(0.0, 0.0), 31);
        for (n, fv) in f.iter().enumerate() {
            if n % 2 == 1 {
                assert!(fv.is_zero(), "n={n} should vanish");
            } else {
                assert!(!fv.is_zero());
            }
        }
        // ⟨0|S|0⟩ = 1/√cosh r
        assert_relative_eq!(f[0].to_complex().re, 1.0 / 0.5f64.cosh().sqrt(), epsilon = 1e-14);
    }

    fn adaptive_norm(zeta: SqueezeParam, beta: Complex64) -> f64 {
        let mut n_max = 32;
        loop {
            let amps = fock_amplitudes(zeta, beta, n_max);
            let tail: f64 = amps[n_max * 3 / 4..].iter().map(|a| a.norm_sqr()).sum();
            if tail < 1e-15 || n_max > 4096 {
                return amps.iter().map(|a| a.norm_sqr()).sum();
            }
            n_max *= 2;
        }
    }

    #[test]
    fn squeezed_vacuum_normalization() {
        for &r in &[0.01, 0.3, 0.8, 1.2, 1.5] {
            let zeta = SqueezeParam::new(r, 0.7).unwrap();
            let total = adaptive_norm(zeta, c(0.0, 0.0));
            assert!((total - 1.0).abs() <= 1e-8, "r={r}: {total}");
        }
    }

    #[test]
    fn squeezed_coherent_normalization_and_mean() {
        // S(ζ)D(β)|0⟩ = D(β cosh r - β* e^{iθ} sinh r) S(ζ)|0⟩
        let zeta = SqueezeParam::new(0.9, -1.1).unwrap();
        let beta = c(3.0, 1.5);
        let amps = fock_amplitudes(zeta, beta, 400);
        let total: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        let mean: f64 = amps.iter().enumerate().map(|(n, a)| n as f64 * a.norm_sqr()).sum();
        let r = zeta.r();
        let shifted = beta * r.cosh() - beta.conj() * Complex64::from_polar(r.sinh(), zeta.theta());
        assert_relative_eq!(mean, shifted.norm_sqr() + r.sinh().powi(2), max_relative = 1e-10);
    }

    #[test]
    fn signed_squeeze_flips_phase() {
        let z = SqueezeParam::from_signed(-0.4, 0.3);
        assert_relative_eq!(z.r(), 0.4);
        assert_relative_eq!(z.theta(), normalize_angle(0.3 + PI));
        assert_relative_eq!(
            (z.zeta() - c(-0.4 * 0.3f64.cos(), -0.4 * 0.3f64.sin())).norm(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn parameter_validation() {
        assert!(SqueezeParam::new(-0.1, 0.0).is_err());
        assert!(SqueezeParam::new(f64::NAN, 0.0).is_err());
        assert!(CoherentParam::new(-1.0, 0.0).is_err());
        assert!(CoherentParam::from_intensity(-1.0, 0.0).is_err());
        let a = CoherentParam::from_intensity(4.0, 0.5).unwrap();
        assert_relative_eq!(a.mag(), 2.0);
        assert_relative_eq!(a.intensity(), 4.0);
    }

    fn arb_logc() -> impl Strategy<Value = LogComplex> {
        (-20.0f64..20.0, -PI..PI).prop_map(|(m, p)| LogComplex::new(m, p))
    }

    proptest! {
        #[test]
        fn round_trip_through_complex(re in -1e6f64..1e6, im in -1e6f64..1e6) {
            let z = c(re, im);
            let back = LogComplex::from_complex(z).to_complex();
            prop_assert!((back - z).norm() <= 1e-14 * z.norm().max(1e-300));
            let lc = LogComplex::from_complex(z);
            prop_assert!(lc.is_zero() || (lc.phase > -PI && lc.phase <= PI));
        }

        #[test]
        fn sum_is_permutation_invariant(
            terms in prop::collection::vec(arb_logc(), 100),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = terms.clone();
            shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
            let a = logc_sum(&terms).to_complex();
            let b = logc_sum(&shuffled).to_complex();
            prop_assert!((a - b).norm() <= 1e-12 * a.norm());
        }

        #[test]
        fn hermite_parity(re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let x = c(re, im);
            let plus = hermite_seq(x, 50);
            let minus = hermite_seq(-x, 50);
            for n in 0..=50 {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let a = plus[n].to_complex();
                let b = minus[n].to_complex() * sign;
                prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-300), "n={}", n);
            }
        }
    }
}
