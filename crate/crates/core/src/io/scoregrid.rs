//! Binary score-grid format: `"BRCS"`, version (u32 LE), dims X, Y, Z
//! (u32 LE each), then `X·Y·Z` f32 LE values in x-fastest order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridDims, ScoreGrid};

pub const SCORE_MAGIC: &[u8; 4] = b"BRCS";
pub const SCORE_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

/// Values are stored as f32.
pub fn encode_score_grid(grid: &ScoreGrid) -> Vec<u8> {
    let d = grid.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * d.len());
    out.extend_from_slice(SCORE_MAGIC);
    out.extend_from_slice(&SCORE_VERSION.to_le_bytes());
    for n in d.as_array() {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for &v in grid.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_score_grid(bytes: &[u8]) -> Result<ScoreGrid> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != SCORE_MAGIC {
        return Err(Error::Format("not a score grid".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != SCORE_VERSION {
        return Err(Error::Format(format!(
            "unsupported score grid version {version}"
        )));
    }
    let dims = GridDims::new(word(8) as usize, word(12) as usize, word(16) as usize)?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 4 * dims.len() {
        return Err(Error::Format(format!(
            "payload of {} bytes for {dims} ({} expected)",
            payload.len(),
            4 * dims.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    ScoreGrid::from_values(dims, values)
}

pub fn read_score_grid(path: &Path) -> Result<ScoreGrid> {
    decode_score_grid(&super::read_bytes(path)?)
}

pub fn write_score_grid(path: &Path, grid: &ScoreGrid) -> Result<()> {
    super::write_atomic(path, &encode_score_grid(grid))
}
