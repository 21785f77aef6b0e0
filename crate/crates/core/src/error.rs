use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between loading a grid and testing a hypothesis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty grid")]
    EmptyGrid,

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {col}: cannot parse {field:?} as a number")]
    Parse {
        row: usize,
        col: usize,
        field: String,
    },

    #[error("row {row}, column {col}: value is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("no interior sites: grid {rows}x{cols} with neighbour margins ({margin_rows}, {margin_cols})")]
    EmptyInterior {
        rows: usize,
        cols: usize,
        margin_rows: usize,
        margin_cols: usize,
    },

    #[error("local system at {x0:?} is singular (condition number {condition:e})")]
    SingularWindow { x0: Vec<f64>, condition: f64 },

    #[error("marginal projection of component {k} at {x} has no estimable evaluation")]
    EmptyProjection { k: usize, x: f64 },

    #[error("abscissa {x} lies outside the curve grid [{lo}, {hi}]")]
    Extrapolation { x: f64, lo: f64, hi: f64 },

    #[error("linear-part Gram matrix is singular (condition number {condition:e}); near-dependent Z components: {components:?}")]
    CollinearDesign {
        components: Vec<usize>,
        condition: f64,
    },

    #[error("covariance estimate is not positive definite (smallest eigenvalue {min_eigenvalue:e}); try a larger lag truncation or check for degenerate residuals")]
    IndefiniteCovariance { min_eigenvalue: f64 },

    #[error("no bandwidth candidate produced a finite cross-validation score")]
    NoFiniteScores,
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyGrid => "EmptyGrid",
            Error::RaggedRow { .. } => "RaggedRow",
            Error::Parse { .. } => "ParseError",
            Error::NonFinite { .. } => "NonFinite",
            Error::Validation(_) => "ValidationError",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptyInterior { .. } => "EmptyInterior",
            Error::SingularWindow { .. } => "SingularWindow",
            Error::EmptyProjection { .. } => "EmptyProjection",
            Error::Extrapolation { .. } => "ExtrapolationError",
            Error::CollinearDesign { .. } => "CollinearDesign",
            Error::IndefiniteCovariance { .. } => "IndefiniteCovariance",
            Error::NoFiniteScores => "NoFiniteScores",
        }
    }

    /// Module the error originates from.
    pub fn module(&self) -> &'static str {
        match self {
            Error::EmptyGrid
            | Error::RaggedRow { .. }
            | Error::Parse { .. }
            | Error::NonFinite { .. }
            | Error::EmptyInterior { .. } => "lattice",
            Error::Validation(_) | Error::DimensionMismatch { .. } => "input",
            Error::SingularWindow { .. } => "smoother",
            Error::EmptyProjection { .. } | Error::Extrapolation { .. } => "projection",
            Error::CollinearDesign { .. } => "plm",
            Error::IndefiniteCovariance { .. } => "inference",
            Error::NoFiniteScores => "bandwidth",
        }
    }

    /// True for errors caused by malformed input or configuration rather than
    /// by the numerics of an otherwise valid problem.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyGrid
                | Error::RaggedRow { .. }
                | Error::Parse { .. }
                | Error::NonFinite { .. }
                | Error::Validation(_)
                | Error::DimensionMismatch { .. }
                | Error::EmptyInterior { .. }
        )
    }
}
