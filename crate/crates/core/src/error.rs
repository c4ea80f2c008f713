use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("selection failure in interval I_{interval}: {detail}")]
    Selection { interval: usize, detail: String },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("precondition error: {0}")]
    Precondition(String),
    #[error("balance error: source mass {m1} vs target mass {m2}")]
    Balance { m1: f64, m2: f64 },
    #[error("solver error: {0}")]
    Solver(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
