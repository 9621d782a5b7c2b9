use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error(
        "exact enumeration needs {required} product atoms, above the cap of {cap}; \
         use the Monte Carlo path instead"
    )]
    Capacity { required: u128, cap: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("zero right-hand side with positive left-hand side ({lhs}) in trial {trial}")]
    InconsistentZeroRhs { trial: u64, lhs: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
