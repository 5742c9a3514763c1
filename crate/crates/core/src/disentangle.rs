//! Disentangling of the beam-splitter output operator.
//!
//! The squeeze operator of input port 2, rewritten in output-mode operators,
//! is `exp(r A)` with `A = sin²γ s₁ + cos²γ s₂ + sinγ cosγ s₁₂`. It is
//! factorized as
//!
//! ```text
//! exp(r A) = exp(σ_T t₁₂) exp(σ_S s₁₂) exp(σ₁ s₁) exp(σ₂ s₂)
//! ```
//!
//! The four generators close a Lie algebra with a faithful 2×2 real
//! representation, so the coefficients follow from a 4×4 nonlinear system
//! that is solved here by damped Newton iteration.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{Matrix2, Matrix4, Vector4};

use crate::error::{require, Error, Result};

/// Beam-splitter mixing angle γ. `γ = π/4` is a balanced splitter, `γ = π/2`
/// full reflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitterAngle(f64);

impl BeamSplitterAngle {
    pub fn new(gamma: f64) -> Result<Self> {
        require(gamma.is_finite(), || {
            format!("beam splitter angle must be finite, got {gamma}")
        })?;
        Ok(BeamSplitterAngle(gamma))
    }

    pub fn gamma(&self) -> f64 {
        self.0
    }

    /// The equivalent angle in `[0, π/2]`.
    ///
    /// Counting statistics are π-periodic in γ and even under `γ → -γ` (both
    /// maps only flip the sign of output mode operators).
    pub fn reduced(&self) -> f64 {
        let mut g = self.0.rem_euclid(PI);
        if g > FRAC_PI_2 {
            g = PI - g;
        }
        g.clamp(0.0, FRAC_PI_2)
    }

    pub fn in_solver_range(&self) -> bool {
        (0.0..=FRAC_PI_2).contains(&self.0)
    }
}

/// The four real coefficients of the disentangled product.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisentangleCoeffs {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma_s: f64,
    pub sigma_t: f64,
}

impl DisentangleCoeffs {
    pub fn new(sigma1: f64, sigma2: f64, sigma_s: f64, sigma_t: f64) -> Self {
        DisentangleCoeffs {
            sigma1,
            sigma2,
            sigma_s,
            sigma_t,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.sigma1, self.sigma2, self.sigma_s, self.sigma_t)
    }

    fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Coefficients at `π/2 - γ`: the roles of the two ports are exchanged.
    pub fn port_swapped(self) -> Self {
        Self::new(self.sigma2, self.sigma1, self.sigma_s, -self.sigma_t)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.to_vector() - other.to_vector()).amax()
    }

    /// Entangling factors vanish identically.
    pub fn is_product(&self) -> bool {
        self.sigma_s == 0.0 && self.sigma_t == 0.0
    }
}

/// `exp(r A) = I + (e^r - 1) A`, since `A` is idempotent.
pub fn lhs_matrix(gamma: BeamSplitterAngle, r: f64) -> Matrix2<f64> {
    let (s, c) = gamma.gamma().sin_cos();
    let a = Matrix2::new(s * s, -c * s, -c * s, c * c);
    Matrix2::identity() + a * r.exp_m1()
}

/// Matrix of `exp(σ_T t₁₂) exp(σ_S s₁₂) exp(σ₁ s₁) exp(σ₂ s₂)`.
pub fn rhs_matrix(coeffs: &DisentangleCoeffs) -> Matrix2<f64> {
    let (st, ct) = coeffs.sigma_t.sin_cos();
    let (sh, ch) = (coeffs.sigma_s.sinh(), coeffs.sigma_s.cosh());
    let e1 = coeffs.sigma1.exp();
    let e2 = coeffs.sigma2.exp();
    Matrix2::new(
        e1 * (st * sh + ct * ch),
        -e2 * (st * ch + ct * sh),
        e1 * (st * ch - ct * sh),
        -e2 * (st * sh - ct * ch),
    )
}

/// Max-norm of `lhs_matrix - rhs_matrix`.
pub fn reconstruct_residual(coeffs: &DisentangleCoeffs, gamma: BeamSplitterAngle, r: f64) -> f64 {
    (lhs_matrix(gamma, r) - rhs_matrix(coeffs)).amax()
}

fn residual_vector(coeffs: &DisentangleCoeffs, target: &Matrix2<f64>) -> Vector4<f64> {
    let d = target - rhs_matrix(coeffs);
    Vector4::new(d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)])
}

/// Jacobian of the residual vector (`lhs - rhs`, row-major entries) with
/// respect to `(σ₁, σ₂, σ_S, σ_T)`.
pub fn residual_jacobian(coeffs: &DisentangleCoeffs) -> Matrix4<f64> {
    let (st, ct) = coeffs.sigma_t.sin_cos();
    let (sh, ch) = (coeffs.sigma_s.sinh(), coeffs.sigma_s.cosh());
    let e1 = coeffs.sigma1.exp();
    let e2 = coeffs.sigma2.exp();
    let rhs = rhs_matrix(coeffs);
    #[rustfmt::skip]
    let d_rhs = Matrix4::new(
        rhs[(0, 0)], 0.0,          e1 * (st * ch + ct * sh),  e1 * (ct * sh - st * ch),
        0.0,         rhs[(0, 1)], -e2 * (st * sh + ct * ch), -e2 * (ct * ch - st * sh),
        rhs[(1, 0)], 0.0,          e1 * (st * sh - ct * ch),  e1 * (ct * ch + st * sh),
        0.0,         rhs[(1, 1)], -e2 * (st * ch - ct * sh), -e2 * (ct * sh + st * ch),
    );
    -d_rhs
}

/// First-order coefficients near full reflection, `γ = π/2 + δ`.
pub fn linearized(delta: f64, r: f64) -> DisentangleCoeffs {
    DisentangleCoeffs::new(r, 0.0, -delta * r.sinh(), delta * (1.0 - r.cosh()))
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Newton iteration budget per solve (and per continuation step).
    pub max_iter: usize,
    /// Initial continuation step in `r`.
    pub continuation_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 100,
            continuation_step: 0.1,
        }
    }
}

fn converged_tol(r: f64) -> f64 {
    1e-13 * r.exp()
}

/// Seed: piecewise-linear through the closed forms at `γ = 0, π/4, π/2` up
/// to `3π/8`, the first-order expansion about `π/2` beyond.
fn seed(gamma: f64, r: f64) -> DisentangleCoeffs {
    if gamma <= 3.0 * PI / 8.0 {
        let at_zero = DisentangleCoeffs::new(0.0, r, 0.0, 0.0);
        let at_quarter = DisentangleCoeffs::new(0.5 * r, 0.5 * r, 0.5 * r, 0.0);
        let at_half = DisentangleCoeffs::new(r, 0.0, 0.0, 0.0);
        let (a, b, w) = if gamma <= FRAC_PI_4 {
            (at_zero, at_quarter, gamma / FRAC_PI_4)
        } else {
            (at_quarter, at_half, (gamma - FRAC_PI_4) / FRAC_PI_4)
        };
        DisentangleCoeffs::from_vector(&(a.to_vector() * (1.0 - w) + b.to_vector() * w))
    } else {
        linearized(gamma - FRAC_PI_2, r)
    }
}

struct NewtonOutcome {
    coeffs: DisentangleCoeffs,
    residual: f64,
}

fn newton(gamma: BeamSplitterAngle, r: f64, start: DisentangleCoeffs, max_iter: usize) -> NewtonOutcome {
    let target = lhs_matrix(gamma, r);
    let tol = converged_tol(r);
    let mut x = start;
    let mut res = residual_vector(&x, &target);
    for _ in 0..max_iter {
        if res.amax() <= tol {
            break;
        }
        let jac = residual_jacobian(&x);
        let Some(step) = jac.lu().solve(&(-res)) else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-10 {
            let trial = DisentangleCoeffs::from_vector(&(x.to_vector() + step * lambda));
            let trial_res = residual_vector(&trial, &target);
            if trial.sigma_t.abs() < FRAC_PI_2
                && trial_res.iter().all(|v| v.is_finite())
                && trial_res.norm() < res.norm()
            {
                x = trial;
                res = trial_res;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    NewtonOutcome {
        coeffs: x,
        residual: res.amax(),
    }
}

/// Solves for the disentangling coefficients with default options.
pub fn solve(gamma: BeamSplitterAngle, r: f64) -> Result<DisentangleCoeffs> {
    solve_with(gamma, r, &SolverOptions::default())
}

/// Newton from the closed-form seed; on failure, continuation in `r` from the
/// trivial solution at `r = 0`, with the step halved whenever a step fails.
pub fn solve_with(gamma: BeamSplitterAngle, r: f64, opts: &SolverOptions) -> Result<DisentangleCoeffs> {
    require(r.is_finite() && r >= 0.0, || {
        format!("squeezing factor must be >= 0, got {r}")
    })?;
    require(gamma.in_solver_range(), || {
        format!("solver expects 0 <= gamma <= pi/2, got {}", gamma.gamma())
    })?;
    if r == 0.0 {
        return Ok(DisentangleCoeffs::zero());
    }

    let tol = converged_tol(r);
    let direct = newton(gamma, r, seed(gamma.gamma(), r), opts.max_iter);
    if direct.residual <= tol {
        return Ok(direct.coeffs);
    }

    let mut current = DisentangleCoeffs::zero();
    let mut r_done = 0.0;
    let mut step = opts.continuation_step.max(1e-6);
    while r_done < r {
        let r_next = (r_done + step).min(r);
        let predictor = if r_done > 0.0 {
            DisentangleCoeffs::from_vector(&(current.to_vector() * (r_next / r_done)))
        } else {
            seed(gamma.gamma(), r_next)
        };
        let out = newton(gamma, r_next, predictor, opts.max_iter);
        if out.residual <= converged_tol(r_next) {
            current = out.coeffs;
            r_done = r_next;
        } else {
            step *= 0.5;
            if step < 1e-4 {
                return Err(Error::NoConvergence {
                    gamma: gamma.gamma(),
                    r,
                    residual: out.residual,
                });
            }
        }
    }
    let residual = reconstruct_residual(&current, gamma, r);
    if residual <= tol {
        Ok(current)
    } else {
        Err(Error::NoConvergence {
            gamma: gamma.gamma(),
            r,
            residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn angle(g: f64) -> BeamSplitterAngle {
        BeamSplitterAngle::new(g).unwrap()
    }

    #[test]
    fn lhs_examples() {
        assert_eq!(lhs_matrix(angle(0.7), 0.0), Matrix2::identity());
        let m = lhs_matrix(angle(FRAC_PI_2), 1.0);
        assert_relative_eq!(m, Matrix2::new(E, 0.0, 0.0, 1.0), epsilon = 1e-15);
        let m = lhs_matrix(angle(FRAC_PI_4), 1.0);
        let expect = Matrix2::new((E + 1.0) / 2.0, (1.0 - E) / 2.0, (1.0 - E) / 2.0, (E + 1.0) / 2.0);
        assert_relative_eq!(m, expect, epsilon = 1e-15);
    }

    #[test]
    fn rhs_examples() {
        assert_eq!(rhs_matrix(&DisentangleCoeffs::zero()), Matrix2::identity());
        let r = 0.8;
        let m = rhs_matrix(&DisentangleCoeffs::new(r, 0.0, 0.0, 0.0));
        assert_relative_eq!(m, Matrix2::new(r.exp(), 0.0, 0.0, 1.0), epsilon = 1e-15);
        let quarter = DisentangleCoeffs::new(r / 2.0, r / 2.0, r / 2.0, 0.0);
        assert_relative_eq!(rhs_matrix(&quarter), lhs_matrix(angle(FRAC_PI_4), r), epsilon = 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let x = DisentangleCoeffs::new(0.3, -0.2, 0.45, -0.7);
        let target = lhs_matrix(angle(0.4), 0.9);
        let jac = residual_jacobian(&x);
        let h = 1e-6;
        for k in 0..4 {
            let mut plus = x.to_vector();
            let mut minus = x.to_vector();
            plus[k] += h;
            minus[k] -= h;
            let fd = (residual_vector(&DisentangleCoeffs::from_vector(&plus), &target)
                - residual_vector(&DisentangleCoeffs::from_vector(&minus), &target))
                / (2.0 * h);
            for i in 0..4 {
                assert_relative_eq!(jac[(i, k)], fd[i], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn solve_closed_forms() {
        let c = solve(angle(FRAC_PI_2), 0.8).unwrap();
        assert!(c.max_abs_diff(&DisentangleCoeffs::new(0.8, 0.0, 0.0, 0.0)) <= 1e-10);
        let c = solve(angle(FRAC_PI_4), 1.0).unwrap();
        assert!(c.max_abs_diff(&DisentangleCoeffs::new(0.5, 0.5, 0.5, 0.0)) <= 1e-10);
        for g in [0.0, 0.3, FRAC_PI_4, 1.2, FRAC_PI_2] {
            assert_eq!(solve(angle(g), 0.0).unwrap(), DisentangleCoeffs::zero());
        }
        let c = solve(angle(0.0), 1.3).unwrap();
        assert!(c.max_abs_diff(&DisentangleCoeffs::new(0.0, 1.3, 0.0, 0.0)) <= 1e-10);
    }

    #[test]
    fn closed_forms_are_returned_exactly() {
        let c = solve(angle(FRAC_PI_2), 1.1).unwrap();
        assert!(c.is_product());
        assert_eq!(c.sigma1, 1.1);
    }

    #[test]
    fn linearized_examples() {
        assert_eq!(linearized(0.0, 0.7), DisentangleCoeffs::new(0.7, 0.0, 0.0, 0.0));
        let l = linearized(0.01, 1.0);
        assert_eq!(l.sigma1, 1.0);
        assert_eq!(l.sigma2, 0.0);
        assert_relative_eq!(l.sigma_s, -0.01 * 1f64.sinh());
        assert_relative_eq!(l.sigma_t, 0.01 * (1.0 - 1f64.cosh()));
    }

    #[test]
    fn linearization_error_is_quadratic() {
        // the solver needs γ ≤ π/2, so approach from below (δ < 0)
        let r = 1.0;
        let err = |delta: f64| {
            let exact = solve(angle(FRAC_PI_2 + delta), r).unwrap();
            exact.max_abs_diff(&linearized(delta, r))
        };
        let e1 = err(-0.004);
        let e2 = err(-0.002);
        let e3 = err(-0.001);
        assert!(e3 < 1e-5, "{e3}");
        let ratio1 = e1 / e2;
        let ratio2 = e2 / e3;
        assert!((3.5..4.5).contains(&ratio1), "ratio {ratio1}");
        assert!((3.5..4.5).contains(&ratio2), "ratio {ratio2}");
    }

    #[test]
    fn residual_examples() {
        let exact = DisentangleCoeffs::new(0.5, 0.5, 0.5, 0.0);
        assert!(reconstruct_residual(&exact, angle(FRAC_PI_4), 1.0) <= 1e-14);
        let bumped = DisentangleCoeffs::new(0.6, 0.5, 0.5, 0.0);
        let res = reconstruct_residual(&bumped, angle(FRAC_PI_4), 1.0);
        // e^{σ₁} column shifts by (e^{0.1}-1) e^{0.5} cosh 0.5
        let expect = 0.1f64.exp_m1() * 0.5f64.exp() * 0.5f64.cosh();
        assert_relative_eq!(res, expect, max_relative = 1e-12);
        assert!(res > 0.05);
    }

    #[test]
    fn coarse_grid_certificate_and_determinant() {
        for i in 0..=24 {
            let g = FRAC_PI_2 * i as f64 / 24.0;
            for j in 0..=15 {
                let r = 0.1 * j as f64;
                let c = solve(angle(g), r).unwrap();
                assert!(reconstruct_residual(&c, angle(g), r) <= 1e-10);
                assert!((c.sigma1 + c.sigma2 - r).abs() <= 1e-10);
                assert!(c.sigma_t.abs() < FRAC_PI_2);
            }
        }
    }

    #[test]
    fn port_swap_symmetry_of_coefficients() {
        for &(g, r) in &[(0.2, 0.6), (0.5, 1.5), (1.1, 1.0)] {
            let a = solve(angle(g), r).unwrap();
            let b = solve(angle(FRAC_PI_2 - g), r).unwrap();
            assert!(a.port_swapped().max_abs_diff(&b) <= 1e-10);
        }
    }

    #[test]
    fn large_squeezing_still_converges() {
        for &g in &[0.05, 0.4, 0.9, 1.5] {
            let c = solve(angle(g), 4.0).unwrap();
            assert!(reconstruct_residual(&c, angle(g), 4.0) <= 1e-10);
        }
    }

    #[test]
    fn no_convergence_is_reported() {
        let opts = SolverOptions {
            max_iter: 1,
            continuation_step: 0.1,
        };
        match solve_with(angle(0.3), 1.5, &opts) {
            Err(Error::NoConvergence { gamma, r, .. }) => {
                assert_eq!(gamma, 0.3);
                assert_eq!(r, 1.5);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(solve(angle(0.3), -0.1).is_err());
        assert!(solve(angle(2.0), 0.5).is_err());
        assert!(BeamSplitterAngle::new(f64::NAN).is_err());
    }

    #[test]
    fn angle_reduction() {
        assert_relative_eq!(angle(FRAC_PI_2 + 0.1).reduced(), FRAC_PI_2 - 0.1, epsilon = 1e-15);
        assert_relative_eq!(angle(-0.3).reduced(), 0.3, epsilon = 1e-15);
        assert_relative_eq!(angle(PI + 0.2).reduced(), 0.2, epsilon = 1e-14);
        assert_eq!(angle(FRAC_PI_4).reduced(), FRAC_PI_4);
    }
}
