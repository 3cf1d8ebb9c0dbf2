use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// The variants are grouped so that the command line front-end can map them
/// onto exit codes: input/data problems, numeric failures, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate anchor at latitude {lat}: cos(lat) is zero")]
    DegenerateAnchor { lat: f64 },

    #[error("row {row}: {kind}")]
    Parse { row: usize, kind: ParseErrorKind },

    #[error("insufficient motion between fixes ({distance:.3} m < 0.1 m)")]
    InsufficientMotion { distance: f64 },

    #[error("sample ordering: {0}")]
    Ordering(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite numeric input: {0}")]
    NumericInput(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("fusion: {0}")]
    Fusion(String),

    #[error("degenerate interpolation span: {0}")]
    Degenerate(String),

    #[error("kernel matrix is ill-conditioned even with jitter {jitter:e}")]
    IllConditioned { jitter: f64 },

    #[error("scenario config: {0}")]
    Config(String),

    #[error("metric: {0}")]
    Metric(String),

    #[error("trajectory has no valid points to featurize")]
    EmptyFeatures,

    #[error("cosine similarity is undefined for a zero vector")]
    UndefinedSimilarity,

    #[error("rate is undefined: {0}")]
    UndefinedRate(String),

    #[error("export: {0}")]
    Export(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("header must be `t,lat,lon,gnss_valid,speed,yaw_rate`, found `{0}`")]
    Header(String),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("column `{column}`: cannot parse `{value}`")]
    BadValue { column: &'static str, value: String },
    #[error("timestamp {t} does not increase over previous {prev}")]
    NonMonotoneTimestamp { t: f64, prev: f64 },
    #[error("negative speed {0}")]
    NegativeSpeed(f64),
    #[error("latitude/longitude out of range ({lat}, {lon})")]
    OutOfRange { lat: f64, lon: f64 },
    #[error("need at least 2 rows, found {0}")]
    TooFewRows(usize),
    #[error("no valid GNSS fix remains after trimming")]
    NoValidFix,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericInput(_) | Error::Divergence { .. } | Error::IllConditioned { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
