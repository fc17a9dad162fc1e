//! CLI failures, their exit codes and their JSON form on stderr.

use serde_json::{json, Value};

pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CAP: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] randswitch::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn format(what: &'static str, msg: impl std::fmt::Display) -> Self {
        CliError::Format {
            what,
            msg: msg.to_string(),
        }
    }

    /// Short machine-readable name.
    pub fn kind(&self) -> &'static str {
        use randswitch::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::InvalidInput(_) => "invalid_input",
                E::InvalidConfig(_) => "invalid_config",
                E::NotConverged { .. } => "not_converged",
                E::Structural(_) => "structural",
                E::Numerical(_) => "numerical",
                E::DenseLimit { .. } => "dense_limit",
                E::EnumerationCap { .. } => "enumeration_cap",
                E::InfeasibleShrinkage { .. } => "infeasible_shrinkage",
                E::ResampleExhausted { .. } => "resample_exhausted",
                E::Parse { .. } => "parse",
                E::Io(_) => "io",
            },
            CliError::Config(_) => "invalid_config",
            CliError::Io { .. } => "io",
            CliError::Format { .. } => "format",
        }
    }

    pub fn exit_code(&self) -> i32 {
        use randswitch::Error as E;
        match self {
            CliError::Core(
                E::NotConverged { .. } | E::Numerical(_) | E::ResampleExhausted { .. },
            ) => EXIT_NUMERICAL,
            CliError::Core(E::DenseLimit { .. } | E::EnumerationCap { .. }) => EXIT_CAP,
            _ => EXIT_INVALID,
        }
    }

    pub fn to_json(&self) -> Value {
        use randswitch::Error as E;
        let details = match self {
            CliError::Core(E::NotConverged {
                iterations,
                residual,
            }) => {
                json!({ "iterations": iterations, "residual": finite_or_null(*residual) })
            }
            CliError::Core(E::DenseLimit { n, limit }) => json!({ "n": n, "limit": limit }),
            CliError::Core(E::EnumerationCap { free, cap }) => json!({ "free": free, "cap": cap }),
            CliError::Core(E::InfeasibleShrinkage { gamma, slack }) => {
                json!({ "gamma": gamma, "slack": slack })
            }
            CliError::Core(E::ResampleExhausted {
                attempts,
                count,
                q,
                last,
            }) => {
                let closed: Vec<usize> = (0..last.len()).filter(|&e| last[e]).collect();
                json!({ "attempts": attempts, "count": count, "q": q, "last_closed": closed })
            }
            CliError::Core(E::Parse { line, .. }) => json!({ "line": line }),
            CliError::Io { path, .. } => json!({ "path": path }),
            _ => json!({}),
        };
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
                "details": details,
            }
        })
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}
