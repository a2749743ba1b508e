use thiserror::Error;

/// Errors raised by the filter design and simulation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("factorization degenerate: {0}")]
    FactorizationDegenerate(String),

    #[error("unknown variable `{0}`")]
    MissingVariable(String),

    #[error("internal consistency violated: {0}")]
    InternalConsistency(String),

    #[error("synthesis infeasible at gamma = {gamma}: no q1 in the grid admits a strictly feasible point")]
    SynthesisInfeasible {
        gamma: f64,
        /// (q1, best achieved margin) for every grid point tried.
        margins: Vec<(f64, f64)>,
    },

    #[error("recovered design failed certification (best margin {margin:e})")]
    CertificationFailure { margin: f64 },

    #[error("delay contract violated: tau({t}) = {tau} outside [{tau_min}, {tau_max}]")]
    DelayContract {
        t: f64,
        tau: f64,
        tau_min: f64,
        tau_max: f64,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
