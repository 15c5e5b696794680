//! Error type shared across the crate.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// OBJ/JSON parse failure with a 1-based line number where applicable.
    Parse { line: usize, msg: String },
    /// A face references a vertex index outside the mesh.
    IndexOutOfRange { line: usize, index: usize, n_vertices: usize },
    /// Vertices at or behind the camera near plane; holds offending indices.
    BehindCamera(Vec<usize>),
    /// |det| of a triangle matrix is at or below the degeneracy epsilon.
    DegenerateTriangle { det: f64 },
    /// The rational solver's denominator vanishes at this instant.
    DegenerateAtT { t: f64, den: f64 },
    /// Buffer/image dimensions do not match.
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    /// Backward pass invoked with adjoints that do not match the recorded forward.
    UnrecordedForward(String),
    /// Voxel IoU over an empty union.
    EmptyUnion,
    /// Non-finite value encountered during optimization.
    NonFinite { context: String },
    /// Configuration rejected by validation.
    InvalidConfig(String),
    /// Benchmark aborted because the two solver paths disagreed.
    OutputMismatch(String),
    Io(std::io::Error),
    Image(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Error::IndexOutOfRange { line, index, n_vertices } => write!(
                f,
                "line {line}: face index {index} out of range for {n_vertices} vertices"
            ),
            Error::BehindCamera(idx) => {
                write!(f, "{} vertices at or behind the camera (first: {:?})", idx.len(), &idx[..idx.len().min(8)])
            }
            Error::DegenerateTriangle { det } => {
                write!(f, "degenerate triangle (|det| = {det:.3e})")
            }
            Error::DegenerateAtT { t, den } => {
                write!(f, "triangle degenerate at t = {t} (denominator = {den:.3e})")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected:?}, got {got:?}")
            }
            Error::UnrecordedForward(msg) => write!(f, "backward without matching forward: {msg}"),
            Error::EmptyUnion => write!(f, "voxel IoU undefined: empty union"),
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::OutputMismatch(msg) => write!(f, "solver outputs disagree: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Image(e) => write!(f, "image error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
