use thiserror::Error;

/// Errors surfaced by the estimation pipeline.
///
/// Variants are grouped so a front end can map them onto coarse exit
/// categories: data validation problems, estimation infeasibility, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("duplicate paycheck for worker {worker_id} at week {week_index}")]
    DuplicatePaycheck { worker_id: String, week_index: i64 },

    #[error("empty input: no data rows")]
    EmptyInput,

    #[error("all rows removed by sample filters")]
    EmptySample,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data on the {side} side: have {have}, need {need}")]
    InsufficientSupport {
        side: &'static str,
        have: usize,
        need: usize,
    },

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("bi-log-concavity feasibility violated: {0}")]
    Infeasible(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad input data rather than by the
    /// estimation problem itself.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MalformedRow { .. }
                | Error::DuplicatePaycheck { .. }
                | Error::EmptyInput
                | Error::EmptySample
                | Error::Csv(_)
        )
    }
}
