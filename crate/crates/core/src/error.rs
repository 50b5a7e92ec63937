use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("root finding for the extrema of f' did not converge: {0}")]
    RootFindingFailure(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("singular system: pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid scheme parameters: {0}")]
    InvalidParams(String),

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("unsupported potential for convex splitting: {0}")]
    UnsupportedPotential(String),

    #[error(
        "Newton iteration did not converge in {iters} iterations (last update {last_update:e})"
    )]
    NewtonDivergence { iters: usize, last_update: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
