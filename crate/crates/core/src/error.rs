use alloc::string::String;
use core::fmt;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    EmptyCloud,
    /// Correspondence set is collinear or coincident.
    DegenerateConfiguration,
    TooFewPoints { needed: usize, got: usize },
    CoincidentPoints,
    NonFinite,
    InvalidParameter(&'static str),
    LengthMismatch { expected: usize, got: usize },
    AllPixelsInvalid,
    ClassSetMismatch,
    UnknownClass(String),
    MissingPixels,
    InsufficientSupport,
    NoHypothesisFound,
    InsufficientOverlap { matched: usize, required: usize },
    KTooLarge { k: usize, cells: usize },
    DimensionMismatch { expected: usize, got: usize },
    NotVisible,
    ObjectOutOfFrustum { object: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCloud => write!(f, "point cloud is empty"),
            Error::DegenerateConfiguration => {
                write!(f, "source points are collinear or coincident")
            }
            Error::TooFewPoints { needed, got } => {
                write!(f, "too few points: needed {needed}, got {got}")
            }
            Error::CoincidentPoints => write!(f, "point pair is coincident"),
            Error::NonFinite => write!(f, "non-finite coordinate"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            Error::AllPixelsInvalid => write!(f, "depth image has no valid pixels"),
            Error::ClassSetMismatch => write!(f, "heatmaps declare different class sets"),
            Error::UnknownClass(id) => write!(f, "unknown class `{id}`"),
            Error::MissingPixels => write!(f, "point cloud carries no source pixels"),
            Error::InsufficientSupport => {
                write!(f, "fewer than four sampleable scene points")
            }
            Error::NoHypothesisFound => write!(f, "no trial produced a congruent set"),
            Error::InsufficientOverlap { matched, required } => write!(
                f,
                "insufficient overlap: {matched} correspondences, {required} required"
            ),
            Error::KTooLarge { k, cells } => {
                write!(f, "k = {k} exceeds the {cells} available cells")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NotVisible => write!(f, "model is not visible under the reference pose"),
            Error::ObjectOutOfFrustum { object } => {
                write!(f, "object {object} leaves the camera frustum")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
