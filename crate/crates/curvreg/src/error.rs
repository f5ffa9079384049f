use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mask has no foreground cell")]
    EmptyMask,
    #[error("image is empty")]
    EmptyImage,
    #[error("grid {width}x{height} is smaller than 3x3")]
    GridTooSmall { width: usize, height: usize },
    #[error("point ({x:.3}, {y:.3}) is too close to the grid edge")]
    OutOfBounds { x: f64, y: f64 },
    #[error("level {level} exceeds the field maximum")]
    NoIsocontour { level: f64 },
    #[error("isocontour has only {vertices} vertices")]
    DegenerateIsocontour { vertices: usize },
    #[error("boundary has only {cells} cells, need at least 16")]
    TooSmall { cells: usize },
    #[error("need at least {min} points, got {got}")]
    TooFewPoints { got: usize, min: usize },
    #[error("invalid contour: {0}")]
    InvalidContour(String),
    #[error("objective is not finite at the starting point")]
    NonFiniteObjective,
    #[error("simplex dimension {0} not supported (1..=3)")]
    BadDimension(usize),
    #[error("more than half of the curve samples fall on the medial axis")]
    AllSamplesInvalid,
    #[error("sample is flagged invalid")]
    InvalidSample,
    #[error("scale factors must stay positive")]
    DegenerateScale,
    #[error("normal vector is not unit length")]
    NotUnit,
    #[error("reference curvature integral is too close to zero")]
    DegenerateReference,
    #[error("curve lengths must be positive")]
    DegenerateLength,
    #[error("mixing constant must be positive")]
    BadRho,
    #[error("calibration needs at least 10 pairs with nonzero medians")]
    InsufficientSample,
    #[error("need at least {min} values, got {got}")]
    TooFewValues { got: usize, min: usize },
    #[error("sample variance is zero")]
    ZeroVariance,
    #[error("degrees of freedom must be at least 1")]
    BadDof,
    #[error("number of tests must be at least 1")]
    BadN,
    #[error("document {doc} has {got} instances of {symbol}, need 3")]
    TooFewInstances { doc: String, symbol: String, got: usize },
    #[error("cross sample has {got} pairs, need 3")]
    TooFewPairs { got: usize },
    #[error("comparison table is incomplete")]
    IncompleteTable,
    #[error("document {0} shares no symbol with any representative")]
    NoCommonSymbols(String),
    #[error("conflicting record for key {0}")]
    ConflictingRecord(String),
    #[error("record key {0} is not in canonical order")]
    NonCanonicalKey(String),
    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("dataset layout error: {0}")]
    Dataset(String),
    #[error("image decode error: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
