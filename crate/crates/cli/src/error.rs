use std::io;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config keys or parameter values.
    #[error("{0}")]
    Usage(String),

    /// A numerical stage failed.
    #[error("{0}")]
    Solver(String),

    /// The pool queue is not positive recurrent.
    #[error("{0}")]
    Unstable(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Unstable(_) => 3,
            CliError::Solver(_) | CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

impl From<dpbft_core::Error> for CliError {
    fn from(e: dpbft_core::Error) -> Self {
        match e {
            dpbft_core::Error::InvalidParameter { .. } | dpbft_core::Error::SizeCap { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<dpbft_sim::Error> for CliError {
    fn from(e: dpbft_sim::Error) -> Self {
        match e {
            dpbft_sim::Error::InvalidConfig { .. } => CliError::Usage(e.to_string()),
            dpbft_sim::Error::Model(inner) => inner.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
