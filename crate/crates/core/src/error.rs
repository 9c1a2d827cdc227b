use thiserror::Error;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("energy {energy} lies within {window:e} of threshold {threshold} (channel {channel})")]
    ThresholdProximity {
        energy: f64,
        threshold: f64,
        channel: usize,
        window: f64,
    },

    #[error("matching system at energy {energy} is ill-conditioned: {condition:.3e} > {limit:.3e}")]
    SolverFailure {
        energy: f64,
        condition: f64,
        limit: f64,
    },

    #[error("accuracy failure: {0}")]
    AccuracyFailure(String),

    #[error("coverage: {0}")]
    Coverage(String),

    #[error("stencil: {0}")]
    Stencil(String),

    #[error("packet not admissible: {0}")]
    Admissibility(String),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("integrator failure: {0}")]
    IntegratorFailure(String),

    #[error("time window too short: {0}")]
    WindowTooShort(String),

    #[error("invalid scenario: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::OutOfDomain(_) => "out_of_domain",
            Error::ThresholdProximity { .. } => "threshold_proximity",
            Error::SolverFailure { .. } => "solver_failure",
            Error::AccuracyFailure(_) => "accuracy_failure",
            Error::Coverage(_) => "coverage",
            Error::Stencil(_) => "stencil",
            Error::Admissibility(_) => "admissibility",
            Error::DomainTooSmall(_) => "domain_too_small",
            Error::IntegratorFailure(_) => "integrator_failure",
            Error::WindowTooShort(_) => "window_too_short",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
