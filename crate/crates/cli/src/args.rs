use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "splitnoise",
    version,
    about = "Photon-counting statistics behind a beam splitter fed by coherent light and squeezed vacuum"
)]
pub struct Cli {
    #[command(flatten)]
    pub shared: SharedArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SharedArgs {
    /// CSV destination (stdout if omitted)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Flat `key = value` file; flags override its entries
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Also draw the dataset as an SVG plot
    #[arg(long, global = true)]
    pub svg: Option<PathBuf>,

    /// Largest accepted truncation defect
    #[arg(long, global = true)]
    pub norm_tol: Option<f64>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Disentangling coefficients on a (gamma, r) grid
    DisentangleSweep {
        #[arg(long)]
        gamma_steps: Option<usize>,
        #[arg(long)]
        r_steps: Option<usize>,
        #[arg(long)]
        r_max: Option<f64>,
    },
    /// Port-1 photon distributions for a list of squeezing factors
    Dist {
        /// |α|²
        #[arg(long)]
        alpha_sq: Option<f64>,
        /// Beam-splitter angle, e.g. `pi/8`
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<String>,
        /// Comma-separated squeezing factors
        #[arg(long)]
        r: Option<String>,
        /// Squeeze phase
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<String>,
        /// Coherent phase
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<String>,
        /// Also compute the distribution without the entangling factors
        #[arg(long)]
        baseline: bool,
        /// Fixed grid bound for both ports (sized automatically if omitted)
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Dark-port distributions near full reflection
    Darkport {
        /// |αδ|²
        #[arg(long)]
        alpha_delta_sq: Option<f64>,
        #[arg(long)]
        r: Option<String>,
        /// θ - 2φ
        #[arg(long, allow_hyphen_values = true)]
        angle: Option<String>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Modulus and phase of κ against r
    Kappa {
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long)]
        r_steps: Option<usize>,
        /// Comma-separated values of θ - 2φ
        #[arg(long, allow_hyphen_values = true)]
        angles: Option<String>,
    },
    /// Variance-minimizing squeezing factor against |αδ|²
    Optimal {
        #[arg(long)]
        min: Option<f64>,
        #[arg(long)]
        max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Compare the distribution engine with a truncated Fock simulation
    OracleCheck {
        #[arg(long)]
        alpha_sq: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<String>,
        #[arg(long)]
        cutoff: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::DisentangleSweep { .. } => "disentangle-sweep",
            Command::Dist { .. } => "dist",
            Command::Darkport { .. } => "darkport",
            Command::Kappa { .. } => "kappa",
            Command::Optimal { .. } => "optimal",
            Command::OracleCheck { .. } => "oracle-check",
        }
    }

    pub fn has_plot(&self) -> bool {
        !matches!(self, Command::OracleCheck { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedSettings {
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub norm_tol: f64,
    pub threads: Option<usize>,
}

impl SharedSettings {
    pub fn resolve(args: &SharedArgs, cfg: &ConfigFile) -> Result<Self, CliError> {
        let norm_tol = cfg.pick(
            args.norm_tol,
            "norm-tol",
            splitnoise_core::distribution::DEFAULT_NORM_TOL,
        )?;
        if !(norm_tol > 0.0 && norm_tol < 1.0) {
            return Err(CliError::Validation(format!(
                "--norm-tol must lie in (0, 1), got {norm_tol}"
            )));
        }
        let threads = cfg.pick_opt(args.threads, "threads")?;
        if threads == Some(0) {
            return Err(CliError::Validation("--threads must be >= 1".into()));
        }
        Ok(SharedSettings {
            out: cfg.pick_opt(args.out.clone(), "out")?,
            svg: cfg.pick_opt(args.svg.clone(), "svg")?,
            norm_tol,
            threads,
        })
    }
}
