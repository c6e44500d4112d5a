use thiserror::Error;

/// Errors produced by the stereo transport pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid intensity {value} at column {column} (expected a finite value in [0, 1])")]
    InvalidIntensity { column: usize, value: f64 },

    #[error("scanline {y} carries no mass")]
    EmptyScanline { y: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("support mismatch at coordinate {index}: zero in exactly one vector")]
    SupportMismatch { index: usize },

    #[error("infeasible projection: target mass {mass} at index {index} but the matrix line sums to zero")]
    InfeasibleProjection { index: usize, mass: f64 },

    #[error("numerical underflow in plain Sinkhorn at row {index}; use the log-domain solver")]
    Underflow { index: usize },

    #[error("shifted Sinkhorn requires a source mass strictly above 1, found {mass}")]
    WrongPath { mass: f64 },

    #[error("mass mismatch: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("brute-force oracle supports d <= {max}, found {found}")]
    TooLarge { max: usize, found: usize },

    #[error("compression vector has no repeated adjacent value")]
    NoPlateau,

    #[error("could not reconcile scanline masses: residual {residual} after {objects} objects")]
    UnresolvedOcclusion {
        residual: f64,
        objects: usize,
        report: Box<crate::disparity::OcclusionReport>,
    },

    #[error("object {index} leaves the frame (columns {start}..={end} shifted by {shift}, width {width})")]
    OutOfFrame {
        index: usize,
        start: i64,
        end: i64,
        shift: i64,
        width: usize,
    },

    #[error("disparity {0} is not positive: point at infinity")]
    AtInfinity(f64),

    #[error("scene: {0}")]
    Scene(String),

    #[error("{count} scanline(s) could not be solved, first at y = {first}: {message}")]
    ScanlinesFailed {
        count: usize,
        first: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    /// Failures of the solver itself rather than of its input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Underflow { .. }
                | Error::UnresolvedOcclusion { .. }
                | Error::InfeasibleProjection { .. }
                | Error::ScanlinesFailed { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
