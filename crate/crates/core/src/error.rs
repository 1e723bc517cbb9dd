use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {message} (condition number {condition_number:.3e})")]
    Numerical {
        message: String,
        condition_number: f64,
    },

    #[error("refused: {0}")]
    Refused(String),

    #[error(
        "proposal budget exhausted after {proposals} proposals: \
         accepted {accepted} of {requested} (acceptance rate {acceptance_rate:.3e})"
    )]
    BudgetExhausted {
        requested: usize,
        accepted: usize,
        proposals: u64,
        acceptance_rate: f64,
    },

    #[error("degenerate importance weights: {0}")]
    DegenerateWeights(String),

    #[error("ingestion of {path} failed: {}", .problems.join("; "))]
    Ingest {
        path: PathBuf,
        problems: Vec<String>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_) => 3,
            Error::BudgetExhausted { .. } => 4,
            Error::Io(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }
}
