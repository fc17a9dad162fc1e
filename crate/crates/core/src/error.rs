use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("solver did not converge after {iterations} iterations (estimated relative energy error {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("structural failure: {0}")]
    Structural(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("dense path limited to n <= {limit}, got n = {n}")]
    DenseLimit { n: usize, limit: usize },

    #[error("enumeration limited to {cap} free edges, instance has {free}")]
    EnumerationCap { free: usize, cap: usize },

    #[error("shrinkage infeasible: gamma = {gamma:.6} exceeds budget slack {slack}")]
    InfeasibleShrinkage { gamma: f64, slack: usize },

    #[error(
        "no draw within budget {q} after {attempts} attempts (last draw closed {count} edges)"
    )]
    ResampleExhausted {
        attempts: usize,
        count: usize,
        q: usize,
        last: Vec<bool>,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::InvalidInput(format!(
            "{what} has length {got}, expected {want}"
        )));
    }
    Ok(())
}
