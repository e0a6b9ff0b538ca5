use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("transfer function has a pole at omega = {omega}")]
    Pole { omega: f64 },

    /// The HV factor never amplifies (Δα >= 0): the ring is stable without AVs.
    #[error("not a worst-case scenario: delta_alpha = {delta} >= 0, no AVs are required")]
    NotWorstCase { delta: f64 },

    #[error("omega = {omega} lies outside the unstable band (0, {upper})")]
    OutOfBand { omega: f64, upper: f64 },

    /// The AV factor amplifies some frequency (Δβ < 0).
    #[error("AV gains violate the string stability condition: delta_beta = {delta} < 0")]
    UnstableGains { delta: f64 },

    #[error("infeasible gain bounds: {condition}")]
    InfeasibleBounds { condition: String },

    #[error("nonpositive stiffness gain: beta1 = {beta1}")]
    NonpositiveStiffness { beta1: f64 },

    #[error("nonpositive margin J** = {value}")]
    NonpositiveMargin { value: f64 },

    #[error("objective is not finite at the starting point")]
    NonFiniteStart,

    #[error("root solver did not converge for roots {indices:?}")]
    Convergence { indices: Vec<usize> },

    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },

    #[error("no feasible AV count up to {limit}")]
    NoFeasibleCount { limit: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
