use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("angle must be finite, got {0}")]
    NonFiniteAngle(f64),
    #[error("phi must lie in (0, 45] degrees, got {0} rad")]
    PhiOutOfRange(f64),
    #[error("visibility must lie in [0, 1], got {0}")]
    VisibilityOutOfRange(f64),
    #[error("probability {name} must lie in [0, 1], got {value}")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("ensemble weights sum to {0}, expected 1")]
    WeightsNotNormalized(f64),
    #[error("honest rate {honest} must be below full-cheat rate {cheat}")]
    RatesNotOrdered { honest: f64, cheat: f64 },
    #[error("at least one instance is required")]
    NoInstances,
    #[error("accept rule must contain at least one outcome")]
    EmptyAcceptRule,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("no detection after {0} attempts")]
    AttemptLimit(u64),
    #[error("session closed")]
    SessionClosed,
}

pub type Result<T> = std::result::Result<T, Error>;
