use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no data: all counts are zero")]
    EmptyData,

    #[error("conditioning on a zero-probability event: {0}")]
    DegenerateConditioning(String),

    #[error("distortion budget {budget} is below the smallest feasible budget d_min = {d_min}")]
    InfeasibleBudget { budget: f64, d_min: f64 },

    #[error("malformed linear program: {0}")]
    InvalidProgram(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    #[error("substitution unavailable: classifier has no deterministic 0/1 witnesses")]
    SubstitutionUnavailable,

    #[error("minority-underprivileged convention violated: {0}")]
    ConventionViolated(String),

    #[error("brute-force grid too large: {params} free parameters (limit 4)")]
    TooLarge { params: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
