use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time step {step} exceeds the stability bound {bound}")]
    StabilityViolation { step: f64, bound: f64 },
    #[error("invalid Lamé parameters: lambda = {lambda}, mu = {mu}")]
    InvalidLame { lambda: f64, mu: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("bad magic bytes in field file")]
    BadMagic,
    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("non-finite value in field data")]
    NonFiniteData,
    #[error("source support leaves the imaging domain (non-zero value at radius {radius})")]
    SupportViolation { radius: f64 },
    #[error("kernel evaluated too close to its singularity (|x| = {distance})")]
    SingularPoint { distance: f64 },
    #[error("{keep} does not divide {total}")]
    NotDivisor { keep: usize, total: usize },
    #[error("measurement set is empty")]
    EmptyMeasurements,
    #[error("invalid detector array: {0}")]
    InvalidDetectors(String),
    #[error("pencil size {pencil} must satisfy 1 <= p < {len}")]
    BadPencil { pencil: usize, len: usize },
    #[error("duplicate frequency {0}")]
    DuplicateFrequency(f64),
    #[error("index ({k}, {l}) out of range")]
    IndexOutOfRange { k: usize, l: usize },
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("signal length {0} is odd")]
    OddLength(usize),
    #[error("dense matrix with {entries} entries exceeds the storage guard")]
    TooLarge { entries: usize },
    #[error("factorization failed")]
    FactorizationFailure,
    #[error("requested {requested} null vectors but only {available} exist")]
    NullSpaceTooSmall { requested: usize, available: usize },
    #[error("training diverged: loss {loss} vs initial {initial}")]
    Diverged { loss: f64, initial: f64 },
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("coefficient {value} lies within {margin} of the ReLU kink")]
    NearKink { value: f64, margin: f64 },
    #[error("non-finite input")]
    NonFinite,
    #[error("phantom is constant after summation")]
    DegenerateImage,
    #[error("signal power is zero")]
    ZeroSignal,
    #[error("images are identical")]
    IdenticalImages,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::StabilityViolation { .. } => "StabilityViolation",
            Error::InvalidLame { .. } => "InvalidLame",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::DimMismatch(_) => "DimMismatch",
            Error::BadMagic => "BadMagic",
            Error::TruncatedFile { .. } => "TruncatedFile",
            Error::NonFiniteData => "NonFiniteData",
            Error::SupportViolation { .. } => "SupportViolation",
            Error::SingularPoint { .. } => "SingularPoint",
            Error::NotDivisor { .. } => "NotDivisor",
            Error::EmptyMeasurements => "EmptyMeasurements",
            Error::InvalidDetectors(_) => "InvalidDetectors",
            Error::BadPencil { .. } => "BadPencil",
            Error::DuplicateFrequency(_) => "DuplicateFrequency",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::ChannelMismatch(_) => "ChannelMismatch",
            Error::OddLength(_) => "OddLength",
            Error::TooLarge { .. } => "TooLarge",
            Error::FactorizationFailure => "FactorizationFailure",
            Error::NullSpaceTooSmall { .. } => "NullSpaceTooSmall",
            Error::Diverged { .. } => "Diverged",
            Error::BadShape(_) => "BadShape",
            Error::NearKink { .. } => "NearKink",
            Error::NonFinite => "NonFinite",
            Error::DegenerateImage => "DegenerateImage",
            Error::ZeroSignal => "ZeroSignal",
            Error::IdenticalImages => "IdenticalImages",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
