use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("covariance of component {component} is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd {
        component: usize,
        min_eigenvalue: f64,
    },

    #[error("bandwidth calibration failed for row {row}: {reason}")]
    Calibration { row: usize, reason: String },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("optimization diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        /// Last embedding whose entries were all finite.
        last_finite: Box<ndarray::Array2<f64>>,
    },

    #[error("no local descent converged (best iterate ({:.6}, {:.6}), loss {best_loss:.6e})", best[0], best[1])]
    NoConvergence { best: [f64; 2], best_loss: f64 },

    #[error("perturbation direction {direction} failed: {source}")]
    Direction {
        direction: String,
        #[source]
        source: Box<Error>,
    },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("too few usable candidates: {0}")]
    TooFewCandidates(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by the filesystem rather than the numerics.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_)) || matches!(self, Error::Csv(e) if e.is_io_error())
    }

    /// True for failures of a numerical routine on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. }
                | Error::Calibration { .. }
                | Error::Diverged { .. }
                | Error::NoConvergence { .. }
                | Error::Direction { .. }
                | Error::Singular(_)
                | Error::TooFewCandidates(_)
        )
    }
}
