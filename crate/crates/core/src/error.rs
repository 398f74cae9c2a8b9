use thiserror::Error;

/// Failure modes shared by every solver and diagnostic in the crate.
///
/// The harness maps each variant onto a process exit code, see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical error: {message} (achieved tolerance {achieved:e})")]
    Numerical { message: String, achieved: f64 },

    #[error("solver instability in {substep} substep at t = {time}: entry {value:e} below -1e-14")]
    Instability {
        substep: &'static str,
        time: f64,
        value: f64,
    },

    #[error("bound violation: {0}")]
    BoundViolation(String),

    #[error("corrupted state: {functional} is not finite")]
    Corrupted { functional: &'static str },

    #[error("diagnostics inconsistency: {0}")]
    Diagnostics(String),

    #[error("statistics: {0}")]
    Statistics(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sweep run at eps = {eps} failed: {source}")]
    SweepRun { eps: f64, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Exit-code contract: 2 configuration, 3 instability, 4 statistics, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Instability { .. } | Error::Numerical { .. } | Error::Corrupted { .. } => 3,
            Error::Statistics(_) => 4,
            Error::SweepRun { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
