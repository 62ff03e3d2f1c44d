use std::path::PathBuf;

use thiserror::Error;

use crate::picard::IterationTrace;

/// Errors raised by the solvers and file readers of this crate.
#[derive(Debug, Error)]
pub enum DbarError {
    #[error("invalid grid size: {0}")]
    Sizing(String),

    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular matrix in {context} (condition estimate {condition:e})")]
    Singular { context: String, condition: f64 },

    #[error("resolution too low: {0}")]
    Resolution(String),

    #[error("CGO condition system is singular at k = {k_re}+{k_im}i (possible exceptional point)")]
    ExceptionalPoint { k_re: f64, k_im: f64 },

    #[error("fixed-point iteration did not converge in {} steps (last delta {:e})", .trace.steps, .trace.last_delta())]
    NonConvergence { trace: Box<IterationTrace> },

    #[error("fixed-point iteration diverged after {} steps; the potential may be too large for iteration and need a direct solve", .trace.steps)]
    Divergence { trace: Box<IterationTrace> },

    #[error("malformed potential header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("non-finite sample at line {line}")]
    NonFinite { line: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DbarError {
    /// Short machine-readable tag, used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            DbarError::Sizing(_) => "sizing",
            DbarError::ShapeMismatch { .. } => "shape_mismatch",
            DbarError::InvalidArgument(_) => "invalid_argument",
            DbarError::Singular { .. } => "singular",
            DbarError::Resolution(_) => "resolution",
            DbarError::ExceptionalPoint { .. } => "exceptional_point",
            DbarError::NonConvergence { .. } => "non_convergence",
            DbarError::Divergence { .. } => "divergence",
            DbarError::MalformedHeader { .. } => "malformed_header",
            DbarError::MalformedRecord { .. } => "malformed_record",
            DbarError::NonFinite { .. } => "non_finite",
            DbarError::Io(_) => "io",
        }
    }
}

pub type Result<T, E = DbarError> = std::result::Result<T, E>;
