use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is not positive semi-definite: {0}")]
    NotPositiveSemiDefinite(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("point outside support: {0}")]
    Support(String),

    #[error("degree {requested} exceeds the supported ceiling {ceiling}")]
    DegreeOverflow { requested: usize, ceiling: usize },

    #[error("hypergeometric denominator parameter {0} hits a pole")]
    Pole(f64),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("missing invariant table key {0}")]
    MissingKey(String),

    #[error("calibration degenerate for {key}: {reason}")]
    Degeneracy { key: String, reason: String },

    #[error("calibration ill-conditioned for {key}: {reason}")]
    Conditioning { key: String, reason: String },

    #[error("noncentrality pattern violated: {0}")]
    Pattern(String),

    #[error("table version mismatch: file has {found}, expected {expected}")]
    TableVersion { found: String, expected: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code used in CLI error records.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::NotPositiveSemiDefinite(_) => "not_positive_semidefinite",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::Support(_) => "support",
            Error::DegreeOverflow { .. } => "degree_overflow",
            Error::Pole(_) => "pole",
            Error::Singular(_) => "singular",
            Error::MissingKey(_) => "missing_key",
            Error::Degeneracy { .. } => "degeneracy",
            Error::Conditioning { .. } => "conditioning",
            Error::Pattern(_) => "pattern",
            Error::TableVersion { .. } => "table_version",
            Error::Input(_) => "input",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
