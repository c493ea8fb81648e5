use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures of the binary tensor container.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic {0:?}, expected \"KCHM\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("malformed header: {0}")]
    MalformedHeader(&'static str),
    #[error("payload size mismatch: expected {expected} bytes, found {actual}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("non-finite value at payload index {0}")]
    NonFinite(usize),
    #[error("expected a {expected} payload, found {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sampling parameters: {0}")]
    InvalidSampling(String),
    #[error("non-positive gap {gap} at index {index}")]
    NonPositiveGap { index: usize, gap: f64 },
    #[error("invalid court template: {0}")]
    InvalidTemplate(String),
    #[error("invalid keypoint layout: {0}")]
    InvalidLayout(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("need at least 4 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("degenerate input: point configuration does not determine a homography")]
    DegenerateInput,
    #[error("singular homography")]
    SingularHomography,
    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("no homography reached the minimum inlier count")]
    NoModel,
    #[error("empty homography list")]
    EmptyHomographyList,

    #[error("class count mismatch: expected {expected}, got {got}")]
    ClassCountMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("prediction is not normalized at pixel {pixel} (sum {sum})")]
    NotNormalized { pixel: usize, sum: f64 },

    #[error("empty dataset")]
    EmptyDataset,
    #[error("view sampler exhausted {0} attempts without an acceptable view")]
    RejectionBudgetExhausted(usize),

    #[error("tensor format: {0}")]
    Format(#[from] FormatError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by unreadable or malformed input data, as
    /// opposed to invalid parameters.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Format(_)
                | Error::Io { .. }
                | Error::Json { .. }
                | Error::Image { .. }
                | Error::InvalidLayout(_)
                | Error::InvalidTemplate(_)
                | Error::SingularHomography
                | Error::ClassCountMismatch { .. }
                | Error::ShapeMismatch(_)
                | Error::EmptyDataset
        )
    }
}
