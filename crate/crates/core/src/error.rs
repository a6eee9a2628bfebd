use thiserror::Error;

/// Errors raised by the walk engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid coin: {0}")]
    InvalidCoin(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("mean hitting time is infinite: {0}")]
    InfiniteMht(String),

    #[error("series did not converge within {horizon} steps (survival {survival:e})")]
    NonConvergent { horizon: usize, survival: f64 },

    #[error("imaginary residue {imaginary:e} exceeds tolerance for real part {real:e}")]
    ImaginaryResidue { real: f64, imaginary: f64 },

    #[error("{censored} of {total} trajectories exceeded {max_steps} steps; raise max_steps")]
    CensoringTooHigh {
        censored: usize,
        total: usize,
        max_steps: usize,
    },

    #[error("lattice halfwidth {halfwidth} too small; at least {required} is needed")]
    LatticeTooSmall { halfwidth: usize, required: usize },

    #[error("denominator vanishes at p = {p}")]
    PoleEncountered { p: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable identifier used in CLI output and exit-code mapping.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotSquare { .. } => "NotSquare",
            Error::NonFinite { .. } => "NonFinite",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::InvalidCoin(_) => "InvalidCoin",
            Error::InvalidChannel(_) => "InvalidChannel",
            Error::InfiniteMht(_) => "InfiniteMHT",
            Error::NonConvergent { .. } => "NonConvergent",
            Error::ImaginaryResidue { .. } => "ImaginaryResidue",
            Error::CensoringTooHigh { .. } => "CensoringTooHigh",
            Error::LatticeTooSmall { .. } => "LatticeTooSmall",
            Error::PoleEncountered { .. } => "PoleEncountered",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }

    /// True for errors caused by invalid user input rather than numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidGeometry(_)
                | Error::InvalidCoin(_)
                | Error::InvalidChannel(_)
                | Error::InvalidArgument(_)
                | Error::LatticeTooSmall { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
