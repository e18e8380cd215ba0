//! Robust instability radius analysis for SISO rational transfer functions.
//!
//! The crate computes lower bounds on the smallest stable perturbation that
//! stabilizes an unstable plant, certifies when those bounds are attained, and
//! synthesizes the attaining first-order all-pass stabilizers.

pub mod cli;
pub mod crmax;
pub mod error;
pub mod freq;
pub mod poly;
pub mod quad;
pub mod rational;
pub mod report;
pub mod rir;
pub mod stability;
pub mod tolerance;

pub use error::{Error, Result};
pub use poly::{Polynomial, Root, RootSet};
pub use rational::{closed_loop_poles, RationalTF, TfSpec};
pub use tolerance::Tolerances;
pub use freq::{FreqSample, PeakKind, PeakSet};
