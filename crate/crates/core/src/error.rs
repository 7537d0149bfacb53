use std::path::PathBuf;

use thiserror::Error;

use crate::grid::GridDims;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero-sized dimension")]
    ZeroDimension,
    #[error("dims {dims} not divisible by factor {factor}")]
    NotDivisible { dims: GridDims, factor: usize },
    #[error("target {target} smaller than source {from}")]
    TargetTooSmall { from: GridDims, target: GridDims },
    #[error("dims mismatch: {expected} vs {found}")]
    DimsMismatch { expected: GridDims, found: GridDims },
    #[error("non-finite value in score grid")]
    NonFinite,
    #[error("invalid brick shape {0}")]
    InvalidShape(String),
    #[error("unknown shape tag {0:?}")]
    UnknownShape(String),
    #[error("footprint of {shape} at ({i}, {j}, {k}) leaves the grid")]
    OutOfBounds {
        shape: String,
        i: isize,
        j: isize,
        k: isize,
    },
    #[error("empty brick library")]
    EmptyLibrary,
    #[error("initial state has no placements")]
    EmptyState,
    #[error("target occupancy is empty")]
    EmptyTarget,
    #[error("no brick fits the target with a positive score")]
    NoInitialPlacement,
    #[error("buffer underflow: {available} entries, batch needs {needed}")]
    BufferUnderflow { available: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
