use thiserror::Error;

/// Errors raised by the mixture estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter {theta} lies outside the domain of the {family} family")]
    Domain { family: &'static str, theta: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The normal equations over a support set could not be factorized.
    /// Nearly coincident support points are the usual cause; merge them.
    #[error("singular system over {size} support points ({detail}); merge nearly coincident support points")]
    Singular { size: usize, detail: String },

    /// The mixture vanishes at an observation, so the likelihood objective is +∞.
    #[error("mixture is not positive at observation x = {x}; objective is infinite")]
    InfiniteObjective { x: f64 },

    #[error("regula falsi bracket violated: derivative {lower} at lower end, {upper} at upper end")]
    Bracket { lower: f64, upper: f64 },

    /// Line search shrank the trust radius below its floor without finding a decrease.
    #[error("line search found no improvement (trust radius fell to {radius:e})")]
    NoImprovement { radius: f64 },

    /// Damped Newton backtracking exhausted its halving budget.
    #[error("newton step stalled after {halvings} halvings (objective {objective}, certificate gap {gap:e})")]
    Stall {
        halvings: usize,
        objective: f64,
        gap: f64,
    },

    #[error("support reduction cycled: {deletions} deletions from a support of {size} points")]
    Cycling { deletions: usize, size: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
