use thiserror::Error;

pub type Result<T> = std::result::Result<T, GdfError>;

/// Every failure surfaced by the library. The CLI maps each variant to its
/// own exit code (see [`GdfError::exit_code`]).
#[derive(Debug, Error)]
pub enum GdfError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("low-density region: {0}")]
    LowDensity(String),

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("unsupported dimension d={0}: ridges need d >= 2")]
    UnsupportedDimension(usize),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("data point {0} has zero total transition score")]
    IsolatedPoint(usize),

    #[error("{n} points exceed the dense solver cap of {cap}")]
    CapacityExceeded { n: usize, cap: usize },

    #[error("ingestion failed: {0}")]
    Ingest(String),

    #[error("experiment cell {cell} failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<GdfError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GdfError {
    /// Short machine-readable identifier.
    pub fn kind(&self) -> &'static str {
        match self {
            GdfError::InvalidInput(_) => "invalid_input",
            GdfError::LowDensity(_) => "low_density",
            GdfError::EmptyResult(_) => "empty_result",
            GdfError::UnsupportedDimension(_) => "unsupported_dimension",
            GdfError::Numeric(_) => "numeric",
            GdfError::IsolatedPoint(_) => "isolated_point",
            GdfError::CapacityExceeded { .. } => "capacity_exceeded",
            GdfError::Ingest(_) => "ingest",
            GdfError::Cell { .. } => "experiment_cell",
            GdfError::Io(_) => "io",
        }
    }

    /// Process exit code used by the `gdf` binary. Code 2 is left to
    /// argument parsing.
    pub fn exit_code(&self) -> i32 {
        match self {
            GdfError::InvalidInput(_) => 3,
            GdfError::LowDensity(_) => 4,
            GdfError::EmptyResult(_) => 5,
            GdfError::UnsupportedDimension(_) => 6,
            GdfError::Numeric(_) => 7,
            GdfError::IsolatedPoint(_) => 8,
            GdfError::CapacityExceeded { .. } => 9,
            GdfError::Ingest(_) => 10,
            GdfError::Cell { .. } => 11,
            GdfError::Io(_) => 12,
        }
    }
}
