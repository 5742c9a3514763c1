//! One function per subcommand. Each takes fully resolved settings so the
//! datasets can also be produced without going through the argument parser.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

use rayon::prelude::*;

use splitnoise_core::darkport::{
    dark_distribution, dark_distribution_auto, dark_moments, kappa, optimal_r, DarkPortParams,
};
use splitnoise_core::disentangle::{reconstruct_residual, solve, BeamSplitterAngle, DisentangleCoeffs};
use splitnoise_core::distribution::{
    full_grid, full_grid_auto, no_entangle_grid, no_entangle_grid_auto, JointDistribution, OutputModel, Port,
    SplitterParams,
};
use splitnoise_core::oracle::simulate;
use splitnoise_core::{CoherentParam, Error, SqueezeParam};

use crate::args::{Command, SharedSettings};
use crate::config::ConfigFile;
use crate::output::{list, num, CsvDoc};
use crate::svg::Plot;
use crate::{CliError, CommandOutput};

/// Residual accepted for every sweep point.
pub const SWEEP_RESIDUAL_TOL: f64 = 1e-10;
/// Relative tolerance on photon-number conservation and on moment checks.
pub const MOMENT_REL_TOL: f64 = 1e-6;

const DEFAULT_R_LIST: &str = "0,0.3,0.6,0.9,1.2,1.5";

pub fn dispatch(command: &Command, cfg: &ConfigFile, shared: &SharedSettings) -> Result<CommandOutput, CliError> {
    if shared.svg.is_some() && !command.has_plot() {
        return Err(CliError::Validation(format!(
            "{} has no plot; drop --svg",
            command.name()
        )));
    }
    match command {
        Command::DisentangleSweep {
            gamma_steps,
            r_steps,
            r_max,
        } => {
            let s = SweepSettings {
                gamma_steps: cfg.pick(*gamma_steps, "gamma-steps", 101)?,
                r_steps: cfg.pick(*r_steps, "r-steps", 61)?,
                r_max: cfg.pick(*r_max, "r-max", 1.5)?,
            };
            disentangle_sweep(&s)
        }
        Command::Dist {
            alpha_sq,
            gamma,
            r,
            theta,
            phi,
            baseline,
            n_max,
        } => {
            let s = DistSettings {
                alpha_sq: cfg.pick(*alpha_sq, "alpha-sq", 20.0)?,
                gamma: cfg.pick_angle(gamma.as_deref(), "gamma", FRAC_PI_4)?,
                r_list: cfg.pick_list(r.as_deref(), "r", DEFAULT_R_LIST, false)?,
                theta: cfg.pick_angle(theta.as_deref(), "theta", 0.0)?,
                phi: cfg.pick_angle(phi.as_deref(), "phi", 0.0)?,
                baseline: cfg.pick_flag(*baseline, "baseline")?,
                n_max: cfg.pick_opt(*n_max, "n-max")?,
                norm_tol: shared.norm_tol,
            };
            dist(&s)
        }
        Command::Darkport {
            alpha_delta_sq,
            r,
            angle,
            n_max,
        } => {
            let s = DarkportSettings {
                alpha_delta_sq: cfg.pick(*alpha_delta_sq, "alpha-delta-sq", 20.0)?,
                r_list: cfg.pick_list(r.as_deref(), "r", DEFAULT_R_LIST, false)?,
                angle: cfg.pick_angle(angle.as_deref(), "angle", 0.0)?,
                n_max: cfg.pick_opt(*n_max, "n-max")?,
                norm_tol: shared.norm_tol,
            };
            darkport(&s)
        }
        Command::Kappa { r_max, r_steps, angles } => {
            let s = KappaSettings {
                r_max: cfg.pick(*r_max, "r-max", 2.0)?,
                r_steps: cfg.pick(*r_steps, "r-steps", 101)?,
                angles: cfg.pick_list(angles.as_deref(), "angles", "0,pi/4,pi/2,3pi/4,pi", true)?,
            };
            kappa_table(&s)
        }
        Command::Optimal { min, max, points } => {
            let s = OptimalSettings {
                min: cfg.pick(*min, "min", 1.0)?,
                max: cfg.pick(*max, "max", 1e4)?,
                points: cfg.pick(*points, "points", 50)?,
            };
            optimal(&s)
        }
        Command::OracleCheck {
            alpha_sq,
            r,
            gamma,
            theta,
            phi,
            cutoff,
            tol,
        } => {
            let s = OracleSettings {
                alpha_sq: cfg.pick(*alpha_sq, "alpha-sq", 1.0)?,
                r: cfg.pick(*r, "r", 0.3)?,
                gamma: cfg.pick_angle(gamma.as_deref(), "gamma", FRAC_PI_8)?,
                theta: cfg.pick_angle(theta.as_deref(), "theta", 0.0)?,
                phi: cfg.pick_angle(phi.as_deref(), "phi", 0.0)?,
                cutoff: cfg.pick(*cutoff, "cutoff", 24)?,
                tol: cfg.pick(*tol, "tol", 1e-6)?,
            };
            oracle_check(&s)
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Validation(msg()))
    }
}

/// `steps` points from 0 to `top`, both ends exact.
fn linspace(top: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| {
            if i + 1 == steps {
                top
            } else {
                top * (i as f64 / (steps - 1) as f64)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub gamma_steps: usize,
    pub r_steps: usize,
    pub r_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub r: f64,
    pub coeffs: DisentangleCoeffs,
    pub residual: f64,
}

/// Solves every grid point; rows are ordered by γ, then r.
pub fn sweep_rows(s: &SweepSettings) -> Result<Vec<SweepRow>, CliError> {
    check(s.gamma_steps >= 2 && s.r_steps >= 2, || "steps must be >= 2".into())?;
    check(s.r_max.is_finite() && s.r_max >= 0.0, || {
        format!("--r-max must be >= 0, got {}", s.r_max)
    })?;
    let gammas = linspace(FRAC_PI_2, s.gamma_steps);
    let rs = linspace(s.r_max, s.r_steps);
    let rows: Result<Vec<Vec<SweepRow>>, Error> = gammas
        .par_iter()
        .map(|&gamma| {
            let angle = BeamSplitterAngle::new(gamma)?;
            rs.iter()
                .map(|&r| {
                    let coeffs = solve(angle, r)?;
                    Ok(SweepRow {
                        gamma,
                        r,
                        coeffs,
                        residual: reconstruct_residual(&coeffs, angle, r),
                    })
                })
                .collect()
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

pub fn disentangle_sweep(s: &SweepSettings) -> Result<CommandOutput, CliError> {
    let rows = sweep_rows(s)?;
    let mut doc = CsvDoc::new(
        "disentangle-sweep",
        &[
            ("gamma-steps", s.gamma_steps.to_string()),
            ("r-steps", s.r_steps.to_string()),
            ("r-max", s.r_max.to_string()),
        ],
    );
    doc.header(&["gamma", "r", "sigma1", "sigma2", "sigmaS", "sigmaT", "residual"]);
    for row in &rows {
        let c = row.coeffs;
        doc.row(&[
            num(row.gamma),
            num(row.r),
            num(c.sigma1),
            num(c.sigma2),
            num(c.sigma_s),
            num(c.sigma_t),
            num(row.residual),
        ]);
    }

    let mut plot = Plot::new(
        &format!("disentangling coefficients at r = {}", s.r_max),
        "gamma",
        "sigma",
    );
    let last: Vec<&SweepRow> = rows.iter().filter(|row| row.r == s.r_max).collect();
    let pick = |f: fn(&DisentangleCoeffs) -> f64| last.iter().map(|row| (row.gamma, f(&row.coeffs))).collect();
    plot.add("sigma1", pick(|c| c.sigma1));
    plot.add("sigma2", pick(|c| c.sigma2));
    plot.add("sigmaS", pick(|c| c.sigma_s));
    plot.add("sigmaT", pick(|c| c.sigma_t));

    let worst = rows.iter().map(|row| row.residual).fold(0.0, f64::max);
    let failure =
        (worst > SWEEP_RESIDUAL_TOL).then(|| format!("largest residual {worst:.3e} exceeds {SWEEP_RESIDUAL_TOL:.0e}"));
    Ok(CommandOutput {
        csv: doc.finish(),
        plot: Some(plot),
        failure,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistSettings {
    pub alpha_sq: f64,
    pub gamma: f64,
    pub r_list: Vec<f64>,
    pub theta: f64,
    pub phi: f64,
    pub baseline: bool,
    pub n_max: Option<usize>,
    pub norm_tol: f64,
}

/// Moments of one computed distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DistSummary {
    pub r: f64,
    /// `false` for the distribution without entangling factors.
    pub full: bool,
    pub port1: Vec<f64>,
    pub mean1: f64,
    pub variance1: f64,
    pub mean2: f64,
    /// `(⟨n₁⟩+⟨n₂⟩)/(|α|²+sinh²r) - 1`.
    pub conservation: f64,
    pub defect: f64,
    pub n1_max: usize,
    pub n2_max: usize,
}

impl DistSummary {
    fn from_grid(r: f64, full: bool, grid: &JointDistribution, expected_total: f64) -> Self {
        let (a, b) = (grid.marginal(Port::One), grid.marginal(Port::Two));
        let conservation = if expected_total > 0.0 {
            (a.mean + b.mean) / expected_total - 1.0
        } else {
            a.mean + b.mean
        };
        DistSummary {
            r,
            full,
            mean1: a.mean,
            variance1: a.variance,
            mean2: b.mean,
            conservation,
            defect: grid.truncation_defect,
            n1_max: grid.n1_max,
            n2_max: grid.n2_max,
            port1: a.probs,
        }
    }
}

fn hinted(e: Error) -> CliError {
    let hint = match e {
        Error::GridTooSmall { .. } => Some("raise --n-max or omit it to size the grid automatically"),
        Error::CutoffTooSmall { .. } => Some("the m1 series did not settle; relax --norm-tol"),
        Error::TruncationExceeded { .. } => Some("raise --cutoff"),
        Error::NoConvergence { .. } => Some("lower r"),
        _ => None,
    };
    CliError::Core { source: e, hint }
}

/// Full (and optionally baseline) distributions for every r.
pub fn dist_summaries(s: &DistSettings) -> Result<Vec<DistSummary>, CliError> {
    let alpha = CoherentParam::from_intensity(s.alpha_sq, s.phi)?;
    let gamma = BeamSplitterAngle::new(s.gamma)?;
    let mut out = Vec::new();
    for &r in &s.r_list {
        let model = OutputModel::new(SplitterParams::new(alpha, SqueezeParam::new(r, s.theta)?, gamma))?;
        let expected = s.alpha_sq + r.sinh().powi(2);
        let grid = match s.n_max {
            Some(n) => full_grid(&model, n, n, s.norm_tol),
            None => full_grid_auto(&model, s.norm_tol),
        }
        .map_err(hinted)?;
        out.push(DistSummary::from_grid(r, true, &grid, expected));
        if s.baseline {
            let base = match s.n_max {
                Some(n) => no_entangle_grid(&model, n, n, s.norm_tol),
                None => no_entangle_grid_auto(&model, s.norm_tol),
            }
            .map_err(hinted)?;
            out.push(DistSummary::from_grid(r, false, &base, expected));
        }
    }
    Ok(out)
}

fn model_name(full: bool) -> &'static str {
    if full {
        "full"
    } else {
        "baseline"
    }
}

pub fn dist(s: &DistSettings) -> Result<CommandOutput, CliError> {
    let summaries = dist_summaries(s)?;
    let mut doc = CsvDoc::new(
        "dist",
        &[
            ("alpha-sq", s.alpha_sq.to_string()),
            ("gamma", s.gamma.to_string()),
            ("r", list(&s.r_list)),
            ("theta", s.theta.to_string()),
            ("phi", s.phi.to_string()),
            ("baseline", s.baseline.to_string()),
            ("n-max", s.n_max.map_or("auto".into(), |n| n.to_string())),
            ("norm-tol", s.norm_tol.to_string()),
        ],
    );
    doc.comment("port-1 photon-number distributions");
    doc.header(&["model", "r", "n", "probability"]);
    for d in &summaries {
        for (n, p) in d.port1.iter().enumerate() {
            doc.row(&[model_name(d.full).into(), num(d.r), n.to_string(), num(*p)]);
        }
    }
    doc.blank();
    doc.comment("summary");
    doc.header(&[
        "model",
        "r",
        "mean1",
        "variance1",
        "mean2",
        "conservation_rel",
        "defect",
        "n1_max",
        "n2_max",
    ]);
    for d in &summaries {
        doc.row(&[
            model_name(d.full).into(),
            num(d.r),
            num(d.mean1),
            num(d.variance1),
            num(d.mean2),
            num(d.conservation),
            num(d.defect),
            d.n1_max.to_string(),
            d.n2_max.to_string(),
        ]);
    }

    let mut plot = Plot::new(
        &format!("port 1, |alpha|^2 = {}, gamma = {:.4}", s.alpha_sq, s.gamma),
        "n",
        "P(n)",
    );
    for d in &summaries {
        let pts = d.port1.iter().enumerate().map(|(n, &p)| (n as f64, p)).collect();
        plot.add(format!("{} r={}", model_name(d.full), d.r), pts);
    }

    let failure = summaries
        .iter()
        .filter(|d| d.full && d.conservation.abs() > MOMENT_REL_TOL)
        .map(|d| format!("photon number not conserved at r={} ({:.3e})", d.r, d.conservation))
        .next();
    Ok(CommandOutput {
        csv: doc.finish(),
        plot: Some(plot),
        failure,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DarkportSettings {
    pub alpha_delta_sq: f64,
    pub r_list: Vec<f64>,
    /// θ - 2φ.
    pub angle: f64,
    pub n_max: Option<usize>,
    pub norm_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DarkSummary {
    pub r: f64,
    pub probs: Vec<f64>,
    pub mean_summed: f64,
    pub mean_analytic: f64,
    pub variance_summed: f64,
    pub variance_analytic: f64,
}

impl DarkSummary {
    pub fn max_rel_dev(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        rel(self.mean_summed, self.mean_analytic).max(rel(self.variance_summed, self.variance_analytic))
    }
}

pub fn darkport_summaries(s: &DarkportSettings) -> Result<Vec<DarkSummary>, CliError> {
    s.r_list
        .iter()
        .map(|&r| {
            let p = DarkPortParams::new(s.alpha_delta_sq, SqueezeParam::new(r, s.angle)?, 0.0, 0.0)?;
            let d = match s.n_max {
                Some(n) => dark_distribution(&p, n, s.norm_tol),
                None => dark_distribution_auto(&p, s.norm_tol),
            }
            .map_err(hinted)?;
            let (mean, var) = dark_moments(&p);
            Ok(DarkSummary {
                r,
                mean_summed: d.mean,
                mean_analytic: mean,
                variance_summed: d.variance,
                variance_analytic: var,
                probs: d.probs,
            })
        })
        .collect()
}

pub fn darkport(s: &DarkportSettings) -> Result<CommandOutput, CliError> {
    let rows = darkport_summaries(s)?;
    let mut doc = CsvDoc::new(
        "darkport",
        &[
            ("alpha-delta-sq", s.alpha_delta_sq.to_string()),
            ("r", list(&s.r_list)),
            ("angle", s.angle.to_string()),
            ("n-max", s.n_max.map_or("auto".into(), |n| n.to_string())),
            ("norm-tol", s.norm_tol.to_string()),
        ],
    );
    doc.comment("dark-port photon-number distributions");
    doc.header(&["r", "n", "probability"]);
    for d in &rows {
        for (n, p) in d.probs.iter().enumerate() {
            doc.row(&[num(d.r), n.to_string(), num(*p)]);
        }
    }
    doc.blank();
    doc.comment("moments");
    doc.header(&[
        "r",
        "mean_summed",
        "mean_analytic",
        "variance_summed",
        "variance_analytic",
        "max_rel_dev",
    ]);
    for d in &rows {
        doc.row(&[
            num(d.r),
            num(d.mean_summed),
            num(d.mean_analytic),
            num(d.variance_summed),
            num(d.variance_analytic),
            num(d.max_rel_dev()),
        ]);
    }

    let mut plot = Plot::new(
        &format!("dark port, |alpha delta|^2 = {}", s.alpha_delta_sq),
        "n",
        "P(n)",
    );
    for d in &rows {
        plot.add(
            format!("r={}", d.r),
            d.probs.iter().enumerate().map(|(n, &p)| (n as f64, p)).collect(),
        );
    }
    let failure = rows
        .iter()
        .find(|d| d.max_rel_dev() > MOMENT_REL_TOL)
        .map(|d| format!("summed moments off by {:.3e} at r={}", d.max_rel_dev(), d.r));
    Ok(CommandOutput {
        csv: doc.finish(),
        plot: Some(plot),
        failure,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaSettings {
    pub r_max: f64,
    pub r_steps: usize,
    pub angles: Vec<f64>,
}

pub fn kappa_table(s: &KappaSettings) -> Result<CommandOutput, CliError> {
    check(s.r_steps >= 2, || "--r-steps must be >= 2".into())?;
    check(s.r_max.is_finite() && s.r_max >= 0.0, || {
        format!("--r-max must be >= 0, got {}", s.r_max)
    })?;
    let rs = linspace(s.r_max, s.r_steps);
    let mut doc = CsvDoc::new(
        "kappa",
        &[
            ("r-max", s.r_max.to_string()),
            ("r-steps", s.r_steps.to_string()),
            ("angles", list(&s.angles)),
        ],
    );
    doc.header(&["angle", "r", "kappa_mod", "lambda"]);
    let mut plot = Plot::new("|kappa| against r", "r", "|kappa|");
    for &angle in &s.angles {
        let mut pts = Vec::with_capacity(rs.len());
        for &r in &rs {
            let k = kappa(r, angle);
            doc.row(&[num(angle), num(r), num(k.modulus), num(k.phase)]);
            pts.push((r, k.modulus));
        }
        plot.add(format!("angle={:.4}", angle), pts);
    }
    Ok(CommandOutput {
        csv: doc.finish(),
        plot: Some(plot),
        failure: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSettings {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

/// `(|αδ|², r*)` on a log-spaced grid.
pub fn optimal_rows(s: &OptimalSettings) -> Result<Vec<(f64, f64)>, CliError> {
    check(s.min > 0.0 && s.min < s.max && s.max.is_finite(), || {
        format!("need 0 < --min < --max, got {} and {}", s.min, s.max)
    })?;
    check(s.points >= 2, || "--points must be >= 2".into())?;
    let ratio = (s.max / s.min).ln();
    (0..s.points)
        .into_par_iter()
        .map(|i| {
            let a = if i + 1 == s.points {
                s.max
            } else {
                s.min * (ratio * i as f64 / (s.points - 1) as f64).exp()
            };
            Ok((a, optimal_r(a)?))
        })
        .collect()
}

pub fn optimal(s: &OptimalSettings) -> Result<CommandOutput, CliError> {
    let rows = optimal_rows(s)?;
    let mut doc = CsvDoc::new(
        "optimal",
        &[
            ("min", s.min.to_string()),
            ("max", s.max.to_string()),
            ("points", s.points.to_string()),
        ],
    );
    doc.header(&["alpha_delta_sq", "r_opt"]);
    for &(a, r) in &rows {
        doc.row(&[num(a), num(r)]);
    }
    let mut plot = Plot::new("optimal squeezing", "log10 |alpha delta|^2", "r*");
    plot.add("r*", rows.iter().map(|&(a, r)| (a.log10(), r)).collect());
    let failure = rows
        .windows(2)
        .find(|w| w[1].1 < w[0].1)
        .map(|w| format!("r* decreases between |alpha delta|^2 = {} and {}", w[0].0, w[1].0));
    Ok(CommandOutput {
        csv: doc.finish(),
        plot: Some(plot),
        failure,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSettings {
    pub alpha_sq: f64,
    pub r: f64,
    pub gamma: f64,
    pub theta: f64,
    pub phi: f64,
    pub cutoff: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub max_abs_deviation: f64,
    pub worst: (usize, usize),
    pub engine_defect: f64,
    pub oracle_defect: f64,
}

/// Engine grid and simulation on the same `cutoff × cutoff` box.
pub fn oracle_report(s: &OracleSettings) -> Result<OracleReport, CliError> {
    check(s.tol > 0.0, || format!("--tol must be > 0, got {}", s.tol))?;
    check(s.cutoff >= 1, || "--cutoff must be >= 1".into())?;
    let alpha = CoherentParam::from_intensity(s.alpha_sq, s.phi)?;
    let zeta = SqueezeParam::new(s.r, s.theta)?;
    let model = OutputModel::new(SplitterParams::new(alpha, zeta, BeamSplitterAngle::new(s.gamma)?))?;
    let sim = simulate(alpha, zeta, s.gamma, s.cutoff).map_err(hinted)?;
    // bins are compared directly, so any grid defect is accepted here
    let grid = full_grid(&model, s.cutoff, s.cutoff, 1.0).map_err(hinted)?;
    let mut worst = (0, 0);
    let mut dev = 0.0f64;
    for n1 in 0..=s.cutoff {
        for n2 in 0..=s.cutoff {
            let d = (grid.get(n1, n2) - sim.get(n1, n2)).abs();
            if d > dev {
                dev = d;
                worst = (n1, n2);
            }
        }
    }
    Ok(OracleReport {
        max_abs_deviation: dev,
        worst,
        engine_defect: grid.truncation_defect,
        oracle_defect: sim.truncation_defect,
    })
}

pub fn oracle_check(s: &OracleSettings) -> Result<CommandOutput, CliError> {
    let rep = oracle_report(s)?;
    let pass = rep.max_abs_deviation <= s.tol;
    let mut doc = CsvDoc::new(
        "oracle-check",
        &[
            ("alpha-sq", s.alpha_sq.to_string()),
            ("r", s.r.to_string()),
            ("gamma", s.gamma.to_string()),
            ("theta", s.theta.to_string()),
            ("phi", s.phi.to_string()),
            ("cutoff", s.cutoff.to_string()),
            ("tol", s.tol.to_string()),
        ],
    );
    doc.header(&["quantity", "value"]);
    doc.row(&["max_abs_deviation".into(), num(rep.max_abs_deviation)]);
    doc.row(&["worst_n1".into(), rep.worst.0.to_string()]);
    doc.row(&["worst_n2".into(), rep.worst.1.to_string()]);
    doc.row(&["engine_defect".into(), num(rep.engine_defect)]);
    doc.row(&["oracle_defect".into(), num(rep.oracle_defect)]);
    doc.row(&["verdict".into(), if pass { "pass" } else { "fail" }.into()]);
    let failure = (!pass).then(|| {
        format!(
            "engine and simulation differ by {:.3e} at ({}, {}), above {:.3e}",
            rep.max_abs_deviation, rep.worst.0, rep.worst.1, s.tol
        )
    });
    Ok(CommandOutput {
        csv: doc.finish(),
        plot: None,
        failure,
    })
}
