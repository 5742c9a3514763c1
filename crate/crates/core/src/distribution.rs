//! Joint photon distribution at the two output ports.
//!
//! With `Φ = S₁(e^{iθ}σ₁)D₁(β₁) ⊗ S₂(e^{iθ}σ₂)D₂(β₂)|0,0⟩` the output state is
//! `exp(σ_T t₁₂) exp(σ_S s₁₂) Φ`. Both entangling exponentials are normal
//! ordered (SU(1,1) for `s₁₂`, SU(2) for `t₁₂`):
//!
//! ```text
//! exp(σ_S s₁₂) = exp(λ_S b₁†b₂†) e^{μ_S (1 + n₁ + n₂)/2} exp(-ν_S b₁b₂)
//! exp(σ_T t₁₂) = exp(λ_T b₁b₂†)  e^{μ_T (n₂ - n₁)/2}     exp(-ν_T b₁†b₂)
//! ```
//!
//! Expanding the six factors on Fock states gives a quadruple sum over
//! `(m₁, m₂, m₃, m₄)`, one index per ladder exponential. Note the minus signs
//! on the annihilating-side factors: each term carries `(-1)^{m₁+m₃}`.
//!
//! [`joint_prob`] evaluates a single cell by the literal quadruple sum in
//! log-domain arithmetic. [`full_grid`] instead acts with one ladder
//! exponential at a time on the amplitudes of the triangle `n₁ + n₂ <= T`.
//! For large `T` the individual normal-ordered factors grow far beyond the
//! result and cancel, so each entangling exponential is split into `k` equal
//! angle steps, each of them normal ordered on its own. The first SU(1,1)
//! step reads the product state past the triangle (this is where the m₁
//! cutoff enters); later steps only see the triangle, so they rely on the
//! amplitudes beyond `T` being negligible, which the normalization check
//! enforces.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::disentangle::{self, BeamSplitterAngle, DisentangleCoeffs};
use crate::error::{require, Error, Result};
use crate::numerics::{fock_coeff, logc_sum, CoherentParam, LnFactorials, LogComplex, SqueezeParam};

pub const DEFAULT_NORM_TOL: f64 = 1e-6;
/// First m₁ cutoff of the doubling schedule.
pub const INITIAL_M1_CUTOFF: usize = 16;
pub const MAX_M1_CUTOFF: usize = 4096;
/// Absolute tolerance on a single probability for the m₁ tail in [`joint_prob`].
pub const JOINT_TAIL_TOL: f64 = 1e-12;
/// Upper bound on either grid dimension when the grid is sized automatically.
pub const MAX_AUTO_GRID: usize = 600;

/// Input parameters: coherent amplitude in port 1, squeezed vacuum in port 2,
/// beam-splitter angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitterParams {
    pub alpha: CoherentParam,
    pub squeeze: SqueezeParam,
    pub gamma: BeamSplitterAngle,
}

impl SplitterParams {
    pub fn new(alpha: CoherentParam, squeeze: SqueezeParam, gamma: BeamSplitterAngle) -> Self {
        SplitterParams { alpha, squeeze, gamma }
    }

    /// Exact mean photon numbers `(⟨n₁⟩, ⟨n₂⟩)` at the outputs.
    pub fn port_means(&self) -> (f64, f64) {
        let g = self.gamma.reduced();
        let (s2, c2) = (g.sin().powi(2), g.cos().powi(2));
        let a = self.alpha.intensity();
        let sq = self.squeeze.r().sinh().powi(2);
        (a * c2 + sq * s2, a * s2 + sq * c2)
    }
}

/// Derived coefficients of the expanded distribution sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffBlock {
    pub lambda_s: Complex64,
    pub mu_s: f64,
    pub nu_s: Complex64,
    pub lambda_t: f64,
    pub mu_t: f64,
    pub nu_t: f64,
    pub beta1: Complex64,
    pub beta2: Complex64,
}

impl CoeffBlock {
    pub fn new(coeffs: &DisentangleCoeffs, theta: f64, alpha: Complex64, gamma: f64) -> Result<Self> {
        if coeffs.sigma_t.abs() >= FRAC_PI_2 {
            return Err(Error::Consistency(format!(
                "sigma_T = {} is off the principal branch",
                coeffs.sigma_t
            )));
        }
        let ts = coeffs.sigma_s.tanh();
        let tt = coeffs.sigma_t.tan();
        Ok(CoeffBlock {
            lambda_s: Complex64::from_polar(ts, theta),
            mu_s: -2.0 * coeffs.sigma_s.cosh().ln(),
            nu_s: Complex64::from_polar(ts, -theta),
            lambda_t: tt,
            mu_t: -2.0 * coeffs.sigma_t.cos().ln(),
            nu_t: tt,
            beta1: alpha * gamma.cos(),
            beta2: alpha * gamma.sin(),
        })
    }

    /// The same block with both entangling factors replaced by unity.
    pub fn without_entangling(&self) -> Self {
        CoeffBlock {
            lambda_s: Complex64::new(0.0, 0.0),
            mu_s: 0.0,
            nu_s: Complex64::new(0.0, 0.0),
            lambda_t: 0.0,
            mu_t: 0.0,
            nu_t: 0.0,
            ..*self
        }
    }
}

/// Parameters together with their solved disentangling coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputModel {
    pub params: SplitterParams,
    pub coeffs: DisentangleCoeffs,
    /// The angle in `[0, π/2]` the coefficients were solved at.
    pub solver_gamma: f64,
}

impl OutputModel {
    pub fn new(params: SplitterParams) -> Result<Self> {
        let solver_gamma = params.gamma.reduced();
        let coeffs = disentangle::solve(BeamSplitterAngle::new(solver_gamma)?, params.squeeze.r())?;
        Ok(OutputModel {
            params,
            coeffs,
            solver_gamma,
        })
    }

    /// Uses caller-supplied coefficients (e.g. a closed form) as-is.
    pub fn with_coeffs(params: SplitterParams, coeffs: DisentangleCoeffs) -> Self {
        OutputModel {
            params,
            coeffs,
            solver_gamma: params.gamma.reduced(),
        }
    }

    pub fn coeff_block(&self) -> Result<CoeffBlock> {
        CoeffBlock::new(
            &self.coeffs,
            self.params.squeeze.theta(),
            self.params.alpha.value(),
            self.solver_gamma,
        )
    }

    fn port_squeezes(&self) -> (SqueezeParam, SqueezeParam) {
        let theta = self.params.squeeze.theta();
        (
            SqueezeParam::from_signed(self.coeffs.sigma1, theta),
            SqueezeParam::from_signed(self.coeffs.sigma2, theta),
        )
    }
}

/// Log-domain tables `f_k(e^{iθ}σ₁, β₁)`, `f_k(e^{iθ}σ₂, β₂)` and `ln k!`,
/// built once per parameter set and shared read-only.
struct FockTables {
    f1: Vec<LogComplex>,
    f2: Vec<LogComplex>,
    ln_fact: LnFactorials,
}

impl FockTables {
    fn new(model: &OutputModel, block: &CoeffBlock, k_max: usize) -> Self {
        let (z1, z2) = model.port_squeezes();
        FockTables {
            f1: fock_coeff(z1, block.beta1, k_max),
            f2: fock_coeff(z2, block.beta2, k_max),
            ln_fact: LnFactorials::new(k_max + 1),
        }
    }
}

/// One cell of the joint distribution by direct evaluation of the quadruple
/// sum, accumulated with [`logc_sum`].
pub fn joint_prob(model: &OutputModel, n1: usize, n2: usize, m1_cutoff: usize) -> Result<f64> {
    let block = model.coeff_block()?;
    let tables = FockTables::new(model, &block, n1 + n2 + m1_cutoff);
    let lf = |k: usize| tables.ln_fact.get(k);

    let neg_nu_s = LogComplex::from_complex(-block.nu_s);
    let lambda_s = LogComplex::from_complex(block.lambda_s);
    let neg_nu_t = LogComplex::from_real(-block.nu_t);
    let lambda_t = LogComplex::from_real(block.lambda_t);

    let mut terms = Vec::new();
    let mut tail_terms = Vec::new();
    for m4 in 0..=n2 {
        for m3 in 0..=n1 + m4 {
            let q1 = n1 + m4 - m3;
            let q2 = n2 + m3 - m4;
            for m2 in 0..=q1.min(q2) {
                let (big_n1, big_n2) = (q1 - m2, q2 - m2);
                let ln_weight = lf(n1 + m4) - lf(n2 - m4) + lf(q2) - lf(big_n1) - lf(big_n2) - lf(m2) - lf(m3) - lf(m4)
                    + 0.5 * block.mu_s * (1.0 + (n1 + n2) as f64 - 2.0 * m2 as f64)
                    + 0.5 * block.mu_t * (n2 as f64 - n1 as f64 - 2.0 * m4 as f64);
                let base = (lambda_s.powi(m2 as u32) * neg_nu_t.powi(m3 as u32) * lambda_t.powi(m4 as u32))
                    .scale_ln(ln_weight);
                if base.is_zero() {
                    continue;
                }
                for m1 in 0..=m1_cutoff {
                    let term = (base * neg_nu_s.powi(m1 as u32) * tables.f1[big_n1 + m1] * tables.f2[big_n2 + m1])
                        .scale_ln(-lf(m1));
                    if m1 == m1_cutoff && m1_cutoff > 0 {
                        tail_terms.push(LogComplex::new(term.log_mag, 0.0));
                    }
                    terms.push(term);
                }
            }
        }
    }

    let ln_prefactor = 0.5 * (lf(n2) - lf(n1));
    let amplitude = logc_sum(&terms).scale_ln(ln_prefactor);
    let tail = logc_sum(&tail_terms).scale_ln(ln_prefactor).to_complex().re;
    let prob = amplitude.norm_sqr();
    let tail_err = 2.0 * prob.sqrt() * tail + tail * tail;
    if tail_err > JOINT_TAIL_TOL {
        return Err(Error::CutoffTooSmall {
            n1,
            n2,
            m1_cutoff,
            tail: tail_err,
            tol: JOINT_TAIL_TOL,
        });
    }
    Ok(prob)
}

/// Square scratch array indexed by `(i, j)` with `i + j <= total`.
struct Tri {
    side: usize,
    data: Vec<Complex64>,
}

impl Tri {
    fn from_rows(total: usize, rows: Vec<Vec<Complex64>>) -> Self {
        let side = total + 1;
        let mut data = vec![Complex64::new(0.0, 0.0); side * side];
        for (i, row) in rows.into_iter().enumerate() {
            data[i * side..i * side + row.len()].copy_from_slice(&row);
        }
        Tri { side, data }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.side + j]
    }
}

/// Applies the entangling factors stage by stage and returns the amplitudes
/// on the `(n1_max+1) × (n2_max+1)` grid (row-major).
///
/// Both exponentials are applied as several equal pieces. A single normal
/// ordered factor on `N` photons grows like `e^{N|σ|/2}` before its terms
/// cancel, so each piece keeps `N|σ|/k` at most [`PIECE_STEP`].
fn staged_amplitudes(
    block: &CoeffBlock,
    tables: &FockTables,
    n1_max: usize,
    n2_max: usize,
    m1_cutoff: usize,
) -> Vec<Complex64> {
    let total = n1_max + n2_max;
    let lf = |k: usize| tables.ln_fact.get(k);
    let normalized = |f: &[LogComplex]| -> Vec<Complex64> {
        f.iter()
            .enumerate()
            .map(|(k, v)| v.scale_ln(-0.5 * lf(k)).to_complex())
            .collect()
    };
    let (a1, a2) = (normalized(&tables.f1), normalized(&tables.f2));

    let mut state = if block.lambda_s.norm() == 0.0 {
        Tri::from_rows(
            total,
            (0..=total)
                .map(|u1| (0..=total - u1).map(|u2| a1[u1] * a2[u2]).collect())
                .collect(),
        )
    } else {
        let sigma_s = block.lambda_s.norm().atanh();
        let k = piece_count(total, sigma_s);
        let lambda = Complex64::from_polar((sigma_s / k as f64).tanh(), block.lambda_s.arg());
        let mu = -2.0 * (sigma_s / k as f64).cosh().ln();
        // the first lowering reads the product state past the triangle
        let first = lower_pairs(total, Some(m1_cutoff), lambda.conj(), &tables.ln_fact, |i, j| {
            a1[i] * a2[j]
        });
        let mut state = raise_pairs(&first, total, lambda, mu, &tables.ln_fact);
        for _ in 1..k {
            let lowered = lower_pairs(total, None, lambda.conj(), &tables.ln_fact, |i, j| state.at(i, j));
            state = raise_pairs(&lowered, total, lambda, mu, &tables.ln_fact);
        }
        state
    };

    // exp(σ_T t₁₂) conserves n₁ + n₂ and acts shell by shell on the triangle.
    let sigma_t = block.lambda_t.atan();
    if sigma_t != 0.0 {
        let k = piece_count(total, sigma_t);
        let part = sigma_t / k as f64;
        for _ in 0..k {
            state = rotate_shells(&state, total, part.tan(), -2.0 * part.cos().ln(), &tables.ln_fact);
        }
    }
    (0..=n1_max)
        .flat_map(|n1| (0..=n2_max).map(move |n2| (n1, n2)))
        .map(|(n1, n2)| state.at(n1, n2))
        .collect()
}

/// Largest `N·|σ|` per piece on `N` photons.
const PIECE_STEP: f64 = 16.0;
/// A ladder series stops once past its peak and this far (in ln) below it.
const LN_SERIES_FLOOR: f64 = -42.0;

fn piece_count(total: usize, sigma: f64) -> usize {
    ((total as f64 * sigma.abs() / PIECE_STEP).ceil() as usize).max(1)
}

/// `Σ_m e^{ln_coeff(m) + i m phase} value(m)` over `m = 0..=top`.
/// `ln_coeff` must be concave in `m`, which lets the sum stop once the
/// coefficients have fallen far below their peak.
fn ladder_sum(
    top: usize,
    phase: f64,
    ln_coeff: impl Fn(usize) -> f64,
    value: impl Fn(usize) -> Complex64,
) -> Complex64 {
    let alternate = phase.abs() == PI;
    let turn = |m: usize, mag: f64| -> Complex64 {
        if phase == 0.0 {
            Complex64::new(mag, 0.0)
        } else if alternate {
            Complex64::new(if m % 2 == 1 { -mag } else { mag }, 0.0)
        } else {
            Complex64::from_polar(mag, m as f64 * phase)
        }
    };
    let first = ln_coeff(0);
    let mut acc = value(0) * first.exp();
    let (mut peak, mut prev) = (first, first);
    for m in 1..=top {
        let l = ln_coeff(m);
        if l < prev && l < peak + LN_SERIES_FLOOR {
            break;
        }
        peak = peak.max(l);
        prev = l;
        acc += value(m) * turn(m, l.exp());
    }
    acc
}

/// `exp(-ν b₁b₂)` on the triangle, reading input amplitudes through `input`.
/// With `reach = Some(m)` the input extends past the triangle and up to `m`
/// pairs are removed; with `None` only pairs inside the triangle are read.
fn lower_pairs(
    total: usize,
    reach: Option<usize>,
    nu: Complex64,
    ln_fact: &LnFactorials,
    input: impl Fn(usize, usize) -> Complex64 + Sync,
) -> Tri {
    let lf = |k: usize| ln_fact.get(k);
    let (ln_nu, phase) = (nu.norm().ln(), (-nu).arg());
    let rows: Vec<Vec<Complex64>> = (0..=total)
        .into_par_iter()
        .map(|u1| {
            (0..=total - u1)
                .map(|u2| {
                    ladder_sum(
                        reach.unwrap_or((total - u1 - u2) / 2),
                        phase,
                        |m| {
                            if m == 0 {
                                0.0
                            } else {
                                m as f64 * ln_nu - lf(m) + 0.5 * (lf(u1 + m) + lf(u2 + m) - lf(u1) - lf(u2))
                            }
                        },
                        |m| input(u1 + m, u2 + m),
                    )
                })
                .collect()
        })
        .collect();
    Tri::from_rows(total, rows)
}

/// `exp(λ b₁†b₂†) e^{μ(1+n₁+n₂)/2}` on the triangle.
fn raise_pairs(input: &Tri, total: usize, lambda: Complex64, mu: f64, ln_fact: &LnFactorials) -> Tri {
    let lf = |k: usize| ln_fact.get(k);
    let (ln_l, phase) = (lambda.norm().ln(), lambda.arg());
    let rows: Vec<Vec<Complex64>> = (0..=total)
        .into_par_iter()
        .map(|q1| {
            (0..=total - q1)
                .map(|q2| {
                    ladder_sum(
                        q1.min(q2),
                        phase,
                        |m| {
                            let ln_mu = 0.5 * mu * (1 + q1 + q2 - 2 * m) as f64;
                            if m == 0 {
                                ln_mu
                            } else {
                                ln_mu + m as f64 * ln_l - lf(m) + 0.5 * (lf(q1) + lf(q2) - lf(q1 - m) - lf(q2 - m))
                            }
                        },
                        |m| input.at(q1 - m, q2 - m),
                    )
                })
                .collect()
        })
        .collect();
    Tri::from_rows(total, rows)
}

/// One rotation piece `exp(τ b₁b₂†) e^{μ(n₂-n₁)/2} exp(-τ b₁†b₂)` on every
/// shell of the triangle.
fn rotate_shells(input: &Tri, total: usize, tau: f64, mu: f64, ln_fact: &LnFactorials) -> Tri {
    let lf = |k: usize| ln_fact.get(k);
    let ln_tau = tau.abs().ln();
    let (down, up) = if tau > 0.0 { (PI, 0.0) } else { (0.0, PI) };
    let rows: Vec<Vec<Complex64>> = (0..=total)
        .into_par_iter()
        .map(|p1| {
            (0..=total - p1)
                .map(|p2| {
                    ladder_sum(
                        p1,
                        down,
                        |m| {
                            if m == 0 {
                                0.0
                            } else {
                                m as f64 * ln_tau - lf(m) + 0.5 * (lf(p1) + lf(p2 + m) - lf(p1 - m) - lf(p2))
                            }
                        },
                        |m| input.at(p1 - m, p2 + m),
                    )
                })
                .collect()
        })
        .collect();
    let lowered = Tri::from_rows(total, rows);

    let rows: Vec<Vec<Complex64>> = (0..=total)
        .into_par_iter()
        .map(|n1| {
            (0..=total - n1)
                .map(|n2| {
                    ladder_sum(
                        n2,
                        up,
                        |m| {
                            let ln_mu = 0.5 * mu * (n2 as f64 - n1 as f64 - 2.0 * m as f64);
                            if m == 0 {
                                ln_mu
                            } else {
                                ln_mu + m as f64 * ln_tau - lf(m) + 0.5 * (lf(n1 + m) + lf(n2) - lf(n1) - lf(n2 - m))
                            }
                        },
                        |m| lowered.at(n1 + m, n2 - m),
                    )
                })
                .collect()
        })
        .collect();
    Tri::from_rows(total, rows)
}

/// Truncated joint distribution `P(n1, n2)` for `n1 <= n1_max`, `n2 <= n2_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub n1_max: usize,
    pub n2_max: usize,
    /// Row-major: index `n1 * (n2_max + 1) + n2`.
    pub probs: Vec<f64>,
    /// `1 - Σ probs`.
    pub truncation_defect: f64,
    pub params: SplitterParams,
    /// `None` for distributions that did not come from the disentangled form.
    pub coeffs: Option<DisentangleCoeffs>,
    pub m1_cutoff: Option<usize>,
}

impl JointDistribution {
    pub fn get(&self, n1: usize, n2: usize) -> f64 {
        if n1 > self.n1_max || n2 > self.n2_max {
            0.0
        } else {
            self.probs[n1 * (self.n2_max + 1) + n2]
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn marginal(&self, port: Port) -> MarginalDistribution {
        marginal(self, port)
    }

    /// Largest `|P - Q|` over the union of both grids.
    pub fn max_abs_diff(&self, other: &JointDistribution) -> f64 {
        let n1 = self.n1_max.max(other.n1_max);
        let n2 = self.n2_max.max(other.n2_max);
        let mut worst = 0.0f64;
        for i in 0..=n1 {
            for j in 0..=n2 {
                worst = worst.max((self.get(i, j) - other.get(i, j)).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    One,
    Two,
}

impl Port {
    pub fn index(&self) -> u8 {
        match self {
            Port::One => 1,
            Port::Two => 2,
        }
    }
}

/// Photon-number distribution of a single port.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDistribution {
    pub port: Port,
    pub probs: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

impl MarginalDistribution {
    /// Attaches `Σ n p_n` and `Σ n² p_n - mean²` (no renormalization).
    pub fn from_probs(port: Port, probs: Vec<f64>) -> Self {
        let mean: f64 = probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        let second: f64 = probs.iter().enumerate().map(|(n, p)| (n * n) as f64 * p).sum();
        MarginalDistribution {
            port,
            probs,
            mean,
            variance: second - mean * mean,
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

pub fn marginal(joint: &JointDistribution, port: Port) -> MarginalDistribution {
    let probs = match port {
        Port::One => (0..=joint.n1_max)
            .map(|i| (0..=joint.n2_max).map(|j| joint.get(i, j)).sum())
            .collect(),
        Port::Two => (0..=joint.n2_max)
            .map(|j| (0..=joint.n1_max).map(|i| joint.get(i, j)).sum())
            .collect(),
    };
    MarginalDistribution::from_probs(port, probs)
}

fn grid_from_block(
    model: &OutputModel,
    block: &CoeffBlock,
    n1_max: usize,
    n2_max: usize,
    norm_tol: f64,
) -> Result<JointDistribution> {
    require(norm_tol > 0.0 && norm_tol.is_finite(), || {
        format!("norm_tol must be > 0, got {norm_tol}")
    })?;
    let total = n1_max + n2_max;
    let run = |cutoff: usize| -> Vec<f64> {
        let tables = FockTables::new(model, block, total + cutoff);
        staged_amplitudes(block, &tables, n1_max, n2_max, cutoff)
            .into_iter()
            .map(|a| a.norm_sqr())
            .collect()
    };

    let entangled = block.nu_s.norm() > 0.0;
    let (probs, cutoff) = if !entangled {
        (run(0), 0)
    } else {
        let mut cutoff = INITIAL_M1_CUTOFF;
        let mut probs = run(cutoff);
        loop {
            let next = cutoff * 2;
            let refined = run(next);
            let change: f64 = refined.iter().zip(&probs).map(|(a, b)| (a - b).abs()).sum();
            probs = refined;
            cutoff = next;
            if change < 1e-3 * norm_tol {
                break;
            }
            if cutoff >= MAX_M1_CUTOFF {
                return Err(Error::CutoffTooSmall {
                    n1: n1_max,
                    n2: n2_max,
                    m1_cutoff: cutoff,
                    tail: change,
                    tol: 1e-3 * norm_tol,
                });
            }
        }
        (probs, cutoff)
    };

    let defect = 1.0 - probs.iter().sum::<f64>();
    if defect < -norm_tol {
        return Err(Error::Consistency(format!(
            "grid probabilities sum to {} > 1",
            1.0 - defect
        )));
    }
    if defect > norm_tol {
        return Err(Error::GridTooSmall {
            n1_max,
            n2_max,
            defect,
            tol: norm_tol,
        });
    }
    Ok(JointDistribution {
        n1_max,
        n2_max,
        probs,
        truncation_defect: defect.max(0.0),
        params: model.params,
        coeffs: Some(model.coeffs),
        m1_cutoff: Some(cutoff),
    })
}

/// Full joint distribution; the m₁ cutoff doubles from
/// [`INITIAL_M1_CUTOFF`] until the last doubling changes the grid by less
/// than `1e-3 · norm_tol` in total.
pub fn full_grid(model: &OutputModel, n1_max: usize, n2_max: usize, norm_tol: f64) -> Result<JointDistribution> {
    let block = model.coeff_block()?;
    grid_from_block(model, &block, n1_max, n2_max, norm_tol)
}

/// Same as [`full_grid`] with both entangling factors dropped: a product of
/// two squeezed coherent states with squeeze arguments `e^{iθ}σ₁`, `e^{iθ}σ₂`.
pub fn no_entangle_grid(model: &OutputModel, n1_max: usize, n2_max: usize, norm_tol: f64) -> Result<JointDistribution> {
    let block = model.coeff_block()?.without_entangling();
    grid_from_block(model, &block, n1_max, n2_max, norm_tol)
}

/// Initial grid bounds: coherent share plus a few standard deviations, plus
/// the length of the geometric squeezed-vacuum tail (down to `norm_tol / 100`)
/// scaled by each port's share of the squeezed input.
pub fn suggest_grid(params: &SplitterParams, norm_tol: f64) -> (usize, usize) {
    let g = params.gamma.reduced();
    let (s2, c2) = (g.sin().powi(2), g.cos().powi(2));
    let a = params.alpha.intensity();
    let r = params.squeeze.r();
    let tail = if r > 1e-6 {
        2.0 * (0.01 * norm_tol.min(1e-3)).ln() / (r.tanh().powi(2)).ln()
    } else {
        0.0
    };
    let size = |coh: f64, share: f64| {
        let spread = (coh * (2.0 * r).exp() + 1.0).sqrt();
        (coh + 8.0 * spread + 12.0 + share * tail).ceil() as usize
    };
    (size(a * c2, s2), size(a * s2, c2))
}

fn auto_sized(
    model: &OutputModel,
    norm_tol: f64,
    grid: impl Fn(&OutputModel, usize, usize, f64) -> Result<JointDistribution>,
) -> Result<JointDistribution> {
    let (mut n1, mut n2) = suggest_grid(&model.params, norm_tol);
    loop {
        match grid(model, n1, n2, norm_tol) {
            Err(Error::GridTooSmall { .. }) if n1.max(n2) < MAX_AUTO_GRID => {
                n1 = (n1 * 3 / 2).min(MAX_AUTO_GRID);
                n2 = (n2 * 3 / 2).min(MAX_AUTO_GRID);
            }
            other => return other,
        }
    }
}

/// [`full_grid`] on a grid grown (×1.5 per attempt) until the defect is
/// within `norm_tol`.
pub fn full_grid_auto(model: &OutputModel, norm_tol: f64) -> Result<JointDistribution> {
    auto_sized(model, norm_tol, full_grid)
}

pub fn no_entangle_grid_auto(model: &OutputModel, norm_tol: f64) -> Result<JointDistribution> {
    auto_sized(model, norm_tol, no_entangle_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    fn params(alpha_sq: f64, r: f64, theta: f64, gamma: f64) -> SplitterParams {
        SplitterParams::new(
            CoherentParam::from_intensity(alpha_sq, 0.0).unwrap(),
            SqueezeParam::new(r, theta).unwrap(),
            BeamSplitterAngle::new(gamma).unwrap(),
        )
    }

    fn poisson(mean: f64, n: usize) -> f64 {
        if mean == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        (n as f64 * mean.ln() - mean - crate::numerics::ln_factorial(n)).exp()
    }

    #[test]
    fn unsqueezed_cells_are_product_poisson() {
        let p = params(3.0, 0.0, 0.0, 0.6);
        let model = OutputModel::new(p).unwrap();
        let (m1, m2) = (3.0 * 0.6f64.cos().powi(2), 3.0 * 0.6f64.sin().powi(2));
        for n1 in 0..6 {
            for n2 in 0..6 {
                let got = joint_prob(&model, n1, n2, 0).unwrap();
                assert_relative_eq!(got, poisson(m1, n1) * poisson(m2, n2), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn full_reflection_factorizes() {
        let r = 0.6;
        let p = params(2.0, r, 0.4, FRAC_PI_2);
        let model = OutputModel::new(p).unwrap();
        let sv = crate::numerics::fock_amplitudes(SqueezeParam::new(r, 0.4).unwrap(), Complex64::new(0.0, 0.0), 12);
        for n1 in 0..8 {
            for n2 in 0..8 {
                let got = joint_prob(&model, n1, n2, 24).unwrap();
                let expect = sv[n1].norm_sqr() * poisson(2.0, n2);
                assert!((got - expect).abs() < 1e-13, "({n1},{n2}) {got} vs {expect}");
            }
        }
    }

    #[test]
    fn direct_and_staged_sums_agree() {
        for &(g, theta) in &[(FRAC_PI_8, 0.0), (0.7, 1.0), (FRAC_PI_4, -0.5)] {
            let model = OutputModel::new(params(1.5, 0.45, theta, g)).unwrap();
            let grid = full_grid(&model, 30, 30, 1e-8).unwrap();
            for n1 in 0..6 {
                for n2 in 0..6 - n1 {
                    let direct = joint_prob(&model, n1, n2, 40).unwrap();
                    assert!(
                        (direct - grid.get(n1, n2)).abs() < 1e-12,
                        "g={g} ({n1},{n2}): {direct} vs {}",
                        grid.get(n1, n2)
                    );
                }
            }
        }
    }

    #[test]
    fn small_cutoff_is_rejected() {
        let model = OutputModel::new(params(1.0, 0.8, 0.0, 0.5)).unwrap();
        match joint_prob(&model, 2, 2, 1) {
            Err(Error::CutoffTooSmall { m1_cutoff, .. }) => assert_eq!(m1_cutoff, 1),
            other => panic!("expected CutoffTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn small_grid_is_rejected() {
        let model = OutputModel::new(params(20.0, 0.7, 0.0, FRAC_PI_4)).unwrap();
        assert!(matches!(
            full_grid(&model, 10, 10, 1e-6),
            Err(Error::GridTooSmall { .. })
        ));
    }

    #[test]
    fn unsqueezed_grid_defect_bound() {
        let model = OutputModel::new(params(20.0, 0.0, 0.0, FRAC_PI_4)).unwrap();
        let grid = full_grid(&model, 60, 60, 1e-6).unwrap();
        assert!(grid.truncation_defect <= 1e-8);
        assert_eq!(grid.m1_cutoff, Some(0));
        let m = grid.marginal(Port::One);
        assert_relative_eq!(m.mean, 10.0, max_relative = 1e-8);
        assert_relative_eq!(m.variance, 10.0, max_relative = 1e-7);
    }

    #[test]
    fn squeezed_grid_is_normalized_and_conserves_photons() {
        let p = params(20.0, 0.7, 0.0, FRAC_PI_4);
        let model = OutputModel::new(p).unwrap();
        let grid = full_grid_auto(&model, 1e-6).unwrap();
        assert!((grid.total() - 1.0).abs() <= 1e-6);
        let m1 = grid.marginal(Port::One);
        let m2 = grid.marginal(Port::Two);
        let expect = 20.0 + 0.7f64.sinh().powi(2);
        assert_relative_eq!(m1.mean + m2.mean, expect, max_relative = 1e-6);
        assert!(m1.variance < 10.0);
        assert!(m1.mean > 10.0);
    }

    #[test]
    fn baseline_equals_full_without_entangling_factors() {
        for p in [params(4.0, 0.0, 0.0, 0.5), params(4.0, 0.8, 0.3, FRAC_PI_2)] {
            let model = OutputModel::new(p).unwrap();
            assert!(model.coeffs.is_product());
            let a = full_grid(&model, 30, 30, 1e-6).unwrap();
            let b = no_entangle_grid(&model, 30, 30, 1e-6).unwrap();
            assert_eq!(a.probs, b.probs);
        }
    }

    #[test]
    fn port_swap_symmetry() {
        for &(g, theta) in &[(0.3, 0.0), (FRAC_PI_8, 1.2)] {
            let a = full_grid(&OutputModel::new(params(2.0, 0.4, theta, g)).unwrap(), 25, 25, 1e-6).unwrap();
            let b = full_grid(
                &OutputModel::new(params(2.0, 0.4, theta, FRAC_PI_2 - g)).unwrap(),
                25,
                25,
                1e-6,
            )
            .unwrap();
            for n1 in 0..=25 {
                for n2 in 0..=25 {
                    assert!((a.get(n1, n2) - b.get(n2, n1)).abs() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn angles_outside_quadrant_reduce() {
        let a = full_grid(&OutputModel::new(params(2.0, 0.4, 0.2, 0.3)).unwrap(), 20, 20, 1e-5).unwrap();
        for g in [-0.3, 0.3 + std::f64::consts::PI, std::f64::consts::PI - 0.3] {
            let b = full_grid(&OutputModel::new(params(2.0, 0.4, 0.2, g)).unwrap(), 20, 20, 1e-5).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12);
        }
    }

    #[test]
    fn marginal_moments_recompute() {
        let m = MarginalDistribution::from_probs(Port::Two, vec![0.25, 0.5, 0.25]);
        assert_relative_eq!(m.mean, 1.0);
        assert_relative_eq!(m.variance, 0.5);
        assert_eq!(m.port.index(), 2);
    }

    #[test]
    fn invalid_norm_tol() {
        let model = OutputModel::new(params(1.0, 0.1, 0.0, 0.3)).unwrap();
        assert!(full_grid(&model, 10, 10, 0.0).is_err());
    }
}
