use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("solver failure: {0}")]
    Solver(slowload::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("verdict FAIL")]
    VerdictFail,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Solver(_) | CliError::Io { .. } => 3,
            CliError::VerdictFail => 4,
        }
    }

    /// Core errors caused by the inputs count as config errors; the rest
    /// are solver failures.
    pub fn from_core(field: &str, e: slowload::Error) -> Self {
        use slowload::Error as E;
        match e {
            E::DimensionMismatch { .. }
            | E::NotSymmetric { .. }
            | E::NotPositiveSemidefinite { .. }
            | E::NotPositiveDefinite { .. }
            | E::InvalidParameter { .. }
            | E::TimeOutOfRange { .. }
            | E::GridMismatch { .. }
            | E::NonConvexStep { .. } => CliError::Config {
                field: field.into(),
                message: e.to_string(),
            },
            _ => CliError::Solver(e),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
