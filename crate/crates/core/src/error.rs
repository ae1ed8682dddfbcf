use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no simple graph found after {attempts} pairing attempts")]
    SamplingFailed { attempts: u64 },

    #[error("refusing enumeration: needs {needed} units, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{msg}: {source}")]
    Io {
        msg: String,
        #[source]
        source: std::io::Error,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("replica panicked: {0}")]
    ReplicaPanic(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(msg: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            msg: msg.into(),
            source,
        }
    }
}
