use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is rank deficient (numerical rank {rank} of {expected})")]
    RankDeficient { rank: usize, expected: usize },

    #[error("matrix is singular: smallest eigenvalue {min_eigenvalue:e} below threshold")]
    Singular { min_eigenvalue: f64 },

    #[error("degenerate channel: no eigenmode with positive gain")]
    DegenerateChannel,

    #[error("energy target {target} infeasible; at most {max_attainable} attainable from the cross link")]
    Infeasible { target: f64, max_attainable: f64 },

    #[error("dual infeasible: weighting matrix not positive definite (mu too small)")]
    DualInfeasible,

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("solver failed at iteration {iteration}: {source}")]
    Solver {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Solver {
            iteration,
            source: Box::new(self),
        }
    }
}
