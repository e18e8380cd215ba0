use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("root finding did not converge: {0}")]
    NonConvergence(String),

    #[error("evaluation at s = {0} is within tolerance of a pole")]
    PoleEvaluation(Complex64),

    #[error("degenerate loop: 1 - L(s) vanishes identically")]
    DegenerateLoop,

    #[error("f(jw) vanishes at w = {0}; phase undefined")]
    ZeroOnAxis(f64),

    #[error("pole on the imaginary axis; L-infinity norm is infinite")]
    PoleOnAxis,

    #[error("function is not stable and minimum-phase: {0}")]
    NotMinimumPhase(String),

    #[error("|f(jw_p)| = {0} is not normalized to 1")]
    NotNormalizedPeak(f64),

    #[error("tangential Nyquist contact at w = {omega}, eps = {epsilon}")]
    TangentialCrossing { omega: f64, epsilon: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("system is not in the unstable strictly proper class: {0}")]
    NotInG(String),

    #[error("parity interlacing property fails; no stable stabilizer exists")]
    PipFailed,

    #[error("stabilizability condition fails with margin {margin}")]
    ConditionFailed { margin: f64 },

    #[error("no stabilizing perturbation found on the search grid")]
    SearchExhausted,

    #[error("system does not have multiple equal peak frequencies")]
    NotDagger,

    #[error("argument outside the admissible domain: {0}")]
    DomainViolation(String),

    #[error("phase constraint cannot be met by a real-rational function at w = 0")]
    NoAttainment,

    #[error("no grid point satisfies the phase constraint")]
    EmptyFeasibleSet,

    #[error("|f(jw_p)| = {gain} differs from the peak gain {peak}")]
    PeakMismatch { gain: f64, peak: f64 },
}
