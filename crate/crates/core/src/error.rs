use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index ({i}, {j}) out of range for {n_x}x{n_y} grid")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        n_x: usize,
        n_y: usize,
    },

    #[error("mask has no sampled cells")]
    EmptyMask,

    #[error("ACS fraction {r_acs} gives zero lines on {n_y} phase-encode lines")]
    DegenerateAcs { r_acs: f64, n_y: usize },

    #[error("acceleration {accel} infeasible: {lines} lines available for the target but ACS needs {acs}")]
    InfeasibleAcceleration { accel: f64, lines: f64, acs: usize },

    #[error("sampling stalled after {draws} draws with {set} of {target} samples placed")]
    SamplingStall {
        draws: usize,
        set: usize,
        target: usize,
    },

    #[error("could not calibrate acceleration {target}: achievable range [{lo}, {hi}]")]
    Calibration { target: f64, lo: f64, hi: f64 },

    #[error("mask carries no ACS region")]
    MissingAcs,

    #[error("sensitivity estimation failed: {0}")]
    Estimation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure after {iterations} iterations: {msg}")]
    Numerical { iterations: usize, msg: String },

    #[error("iteration diverged at step {step}: norm {norm:.3e} exceeds {limit:.3e}")]
    Divergence { step: usize, norm: f64, limit: f64 },

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_)
            | Error::ShapeMismatch(_)
            | Error::IndexOutOfRange { .. }
            | Error::EmptyMask
            | Error::DegenerateAcs { .. }
            | Error::InfeasibleAcceleration { .. }
            | Error::MissingAcs
            | Error::Domain(_) => 2,
            Error::Format { .. } | Error::Truncated { .. } | Error::Io(_) => 3,
            Error::SamplingStall { .. }
            | Error::Calibration { .. }
            | Error::Estimation(_)
            | Error::Numerical { .. }
            | Error::Divergence { .. } => 4,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
