use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("time grid too small: need at least {needed} points, got {got}")]
    GridTooSmall { needed: usize, got: usize },

    #[error("time grid is not uniform (relative step deviation {deviation:.3e})")]
    NonUniformGrid { deviation: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("root bracketing failed for order {order}, root {index} in [{lo}, {hi}]")]
    RootBracket {
        order: usize,
        index: usize,
        lo: f64,
        hi: f64,
    },

    #[error("Bessel evaluation envelope exceeded: {0}")]
    Envelope(String),

    #[error("mode index {index} out of range (system has {len} modes)")]
    ModeIndex { index: usize, len: usize },

    #[error("point {point:?} lies outside the domain")]
    PointOutside { point: Vec<f64> },

    #[error("insufficient modes: requested {requested}, available {available}")]
    InsufficientModes { requested: usize, available: usize },

    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("too few modes for diagnostic: need at least {needed}, got {got}")]
    TooFewModes { needed: usize, got: usize },

    #[error("quadrature did not converge (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },

    #[error("covariance factorization failed for mode {mode} after jitter escalation")]
    Factorization { mode: usize },

    #[error("grid size envelope exceeded: {0}")]
    GridEnvelope(String),

    #[error("insufficient replicates: need at least {needed}, got {got}")]
    InsufficientReplicates { needed: usize, got: usize },

    #[error("fit window holds {got} usable lags, need at least {needed}")]
    WindowTooSmall { needed: usize, got: usize },

    #[error("non-positive variogram value {value:e} at lag {lag:e} inside the fit window")]
    NonPositiveValue { lag: f64, value: f64 },

    #[error("kind mismatch: curve is {curve}, bound is {bound}")]
    KindMismatch { curve: String, bound: String },

    #[error("grid too coarse: minimum spacing {spacing:e} is not below smallest delta {delta:e}")]
    GridTooCoarse { spacing: f64, delta: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical procedure (quadrature, factorization,
    /// root finding) as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::Factorization { .. }
                | Error::RootBracket { .. }
                | Error::Envelope(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
