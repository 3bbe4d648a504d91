//! Error types shared across the crate.

use thiserror::Error;

/// Failures of the dense numeric kernels.
#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("singular matrix encountered at pivot {pivot}")]
    SingularMatrix { pivot: usize },
}

/// Structural problems with a network or a derived input.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("network failed validation: {0}")]
    InvalidNetwork(String),
    #[error("bus {0} does not exist in the network")]
    UnknownBus(usize),
    #[error("DG placement on slack bus {0} is not allowed")]
    PlacementOnSlack(usize),
    #[error("branch {from}-{to} has zero series impedance")]
    ZeroImpedanceBranch { from: usize, to: usize },
    #[error("network is not connected ({0} buses unreachable from the slack)")]
    Disconnected(usize),
}

/// Case file parsing and schema errors.
#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing base MVA")]
    MissingBaseMva,
    #[error("missing section: {0}")]
    MissingSection(&'static str),
    #[error("schema violation at {path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Power-flow solver failures.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("Jacobian became singular at iteration {iteration}")]
    SingularJacobian { iteration: usize },
}

/// Sensitivity analysis failures.
#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error("base power flow did not converge")]
    UnconvergedBase,
    #[error("all sensitivity values are equal; normalization is undefined")]
    DegenerateNormalization,
    #[error("candidate count {k} out of range 1..={max}")]
    CandidateCountOutOfRange { k: usize, max: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Sizing-problem construction and evaluation failures.
#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("sizing problem has no candidate buses")]
    NoCandidates,
    #[error("DG bounds invalid: min {min} must be below max {max}")]
    InvalidBounds { min: f64, max: f64 },
    #[error("sizes vector has length {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("base case power flow did not converge")]
    UnconvergedBase,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Experiment harness failures.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report verification failed: {0}")]
    VerifyFailed(String),
}
