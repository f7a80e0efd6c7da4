use thiserror::Error;

/// Errors raised by grid construction, spectral operators and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite input: {0}")]
    NumericalInput(String),

    #[error("ratio undefined for a zero field")]
    UndefinedRatio,

    #[error("inadmissible regularity: s = {s} must exceed s_min = {s_min}")]
    Admissibility { s: f64, s_min: f64 },

    #[error("dyadic frequency {n} outside the resolvable band [{lo}, {hi}]")]
    Band { n: f64, lo: f64, hi: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("domain of dependence violated: {0}")]
    DomainOfDependence(String),

    #[error("numerical failure at t = {t}: {what}")]
    NumericalFailure { t: f64, what: String },

    #[error("overflow in {0}")]
    Overflow(String),

    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
