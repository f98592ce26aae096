use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by every module of the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot move a particle out of an empty site {site}")]
    EmptySite { site: String },
    #[error("lattice coordinate overflow")]
    CoordinateOverflow,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("density must be strictly positive and finite, got {0}")]
    NonPositiveDensity(f64),
    #[error("negative density in profile input: {0}")]
    NegativeDensityInput(f64),
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
    #[error("Poisson truncation cannot reach tolerance {tol:e} below occupancy {max_occupancy}")]
    TruncationFailure { tol: f64, max_occupancy: u32 },
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("time must be strictly positive, got {0}")]
    NonPositiveTime(f64),
    #[error("coordinate vectors have different lengths ({0} vs {1})")]
    ArityMismatch(usize, usize),
    #[error("configurations carry different particle numbers ({0} vs {1})")]
    ParticleCountMismatch(usize, usize),
    #[error("state space of {states} states exceeds the limit {limit}")]
    StateSpaceTooLarge { states: usize, limit: usize },
    #[error("grid needs at least {needed} points spanning {span}, got {got}")]
    InsufficientGrid {
        needed: usize,
        got: usize,
        span: &'static str,
    },
    #[error("exclusion dynamics needs occupation numbers in {{0,1}}, found {count} at {site}")]
    NotHardcore { site: String, count: u32 },
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),
    #[error("expansion condition violated: {0}")]
    ConditionViolated(String),
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid jump law: {0}")]
    InvalidKernel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Numerical failures (as opposed to rejected inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TruncationFailure { .. }
                | Error::QuadratureFailure(_)
                | Error::CoordinateOverflow
                | Error::StateSpaceTooLarge { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
