//! Exact photon-counting statistics at the two output ports of a lossless
//! beam splitter fed by a coherent state (port 1) and a squeezed vacuum
//! (port 2).
//!
//! The output state is disentangled into two squeezed coherent states coupled
//! by two entangling exponentials ([`disentangle`]); the joint distribution is
//! then an explicit quadruple sum over Fock amplitudes ([`distribution`]).
//! [`darkport`] covers the strong-field limit near full reflection, and
//! [`oracle`] is an independent brute-force simulator on a truncated two-mode
//! Fock space used to cross-check every closed form.

pub mod darkport;
pub mod disentangle;
pub mod distribution;
pub mod error;
pub mod numerics;
pub mod oracle;

pub use error::{Error, Result};
pub use numerics::{CoherentParam, LogComplex, SqueezeParam};
