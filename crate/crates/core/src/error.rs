use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("disentangling solver did not converge at gamma={gamma}, r={r} (residual {residual:.3e})")]
    NoConvergence { gamma: f64, r: f64, residual: f64 },

    #[error("m1 cutoff {m1_cutoff} too small at (n1={n1}, n2={n2}): tail estimate {tail:.3e} exceeds {tol:.3e}")]
    CutoffTooSmall {
        n1: usize,
        n2: usize,
        m1_cutoff: usize,
        tail: f64,
        tol: f64,
    },

    #[error("grid {n1_max}x{n2_max} too small: truncation defect {defect:.3e} exceeds {tol:.3e}")]
    GridTooSmall {
        n1_max: usize,
        n2_max: usize,
        defect: f64,
        tol: f64,
    },

    #[error("Fock cutoff {cutoff} too small: truncation defect {defect:.3e} exceeds budget {budget:.3e}")]
    TruncationExceeded { cutoff: usize, defect: f64, budget: f64 },

    #[error("internal consistency failure: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
