//! Run-length encoded voxel text format.
//!
//! ```text
//! brecs-vox 1
//! dims X Y Z
//! 0 <count>
//! 1 <count>
//! ...
//! ```
//!
//! Runs follow x-fastest, then y, then z order and their counts sum to
//! `X·Y·Z`. The writer always emits maximal runs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridDims, VoxelGrid};

pub const VOX_MAGIC: &str = "brecs-vox 1";

/// Run-length body, one `"<0|1> <count>\n"` line per run.
pub fn encode_runs(cells: &[bool]) -> String {
    let mut out = String::new();
    let mut iter = cells.iter().copied();
    let Some(mut current) = iter.next() else {
        return out;
    };
    let mut count = 1usize;
    for c in iter {
        if c == current {
            count += 1;
        } else {
            let _ = writeln!(out, "{} {count}", current as u8);
            current = c;
            count = 1;
        }
    }
    let _ = writeln!(out, "{} {count}", current as u8);
    out
}

/// Parses a run body expecting exactly `len` cells.
pub fn decode_runs(body: &str, len: usize) -> Result<Vec<bool>> {
    let mut cells = Vec::with_capacity(len);
    for (n, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("run {}: malformed {line:?}", n + 1));
        let (v, c) = line.split_once(' ').ok_or_else(bad)?;
        let value = match v {
            "0" => false,
            "1" => true,
            _ => return Err(bad()),
        };
        let count: usize = c.trim().parse().map_err(|_| bad())?;
        if count == 0 {
            return Err(bad());
        }
        if cells.len() + count > len {
            return Err(Error::Format(format!("run counts exceed {len} cells")));
        }
        cells.resize(cells.len() + count, value);
    }
    if cells.len() != len {
        return Err(Error::Format(format!(
            "run counts sum to {}, expected {len}",
            cells.len()
        )));
    }
    Ok(cells)
}

pub fn encode_vox(grid: &VoxelGrid) -> String {
    let d = grid.dims();
    format!(
        "{VOX_MAGIC}\ndims {} {} {}\n{}",
        d.x,
        d.y,
        d.z,
        encode_runs(grid.cells())
    )
}

pub fn decode_vox(text: &str) -> Result<VoxelGrid> {
    let mut lines = text.splitn(3, '\n');
    let magic = lines.next().unwrap_or_default().trim_end();
    if magic != VOX_MAGIC {
        return Err(Error::Format(format!("bad voxel header {magic:?}")));
    }
    let dims_line = lines.next().unwrap_or_default().trim_end();
    let dims = parse_dims_line(dims_line)?;
    let cells = decode_runs(lines.next().unwrap_or_default(), dims.len())?;
    VoxelGrid::from_cells(dims, cells)
}

fn parse_dims_line(line: &str) -> Result<GridDims> {
    let bad = || Error::Format(format!("bad dims line {line:?}"));
    let mut parts = line.split_whitespace();
    if parts.next() != Some("dims") {
        return Err(bad());
    }
    let mut v = [0usize; 3];
    for slot in &mut v {
        *slot = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    }
    if parts.next().is_some() {
        return Err(bad());
    }
    GridDims::new(v[0], v[1], v[2])
}

pub fn read_vox(path: &Path) -> Result<VoxelGrid> {
    decode_vox(&super::read_string(path)?)
}

pub fn write_vox(path: &Path, grid: &VoxelGrid) -> Result<()> {
    super::write_atomic(path, encode_vox(grid).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_text() {
        let d = GridDims::new(2, 2, 1).unwrap();
        let g = VoxelGrid::from_cells(d, vec![false, true, true, false]).unwrap();
        let text = encode_vox(&g);
        assert_eq!(text, "brecs-vox 1\ndims 2 2 1\n0 1\n1 2\n0 1\n");
        assert_eq!(decode_vox(&text).unwrap(), g);
    }

    #[test]
    fn rejects_bad_counts() {
        assert!(decode_vox("brecs-vox 1\ndims 2 2 1\n0 3\n").is_err());
        assert!(decode_vox("brecs-vox 1\ndims 2 2 1\n0 5\n").is_err());
        assert!(decode_vox("brecs-vox 1\ndims 2 2 1\n0 0\n0 4\n").is_err());
        assert!(decode_vox("brecs-vox 1\ndims 2 2 1\n2 4\n").is_err());
        assert!(decode_vox("brecs-vox 2\ndims 2 2 1\n0 4\n").is_err());
        assert!(decode_vox("brecs-vox 1\ndims 2 0 1\n").is_err());
        assert!(decode_vox("brecs-vox 1\ndims 2 2\n0 4\n").is_err());
    }

    #[test]
    fn accepts_split_runs() {
        let g = decode_vox("brecs-vox 1\ndims 2 2 1\n0 1\n0 3\n").unwrap();
        assert_eq!(encode_vox(&g), "brecs-vox 1\ndims 2 2 1\n0 4\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip(x in 1usize..6, y in 1usize..6, z in 1usize..6, seed in any::<u64>()) {
                let d = GridDims::new(x, y, z).unwrap();
                let cells = (0..d.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
                let g = VoxelGrid::from_cells(d, cells).unwrap();
                let text = encode_vox(&g);
                let back = decode_vox(&text).unwrap();
                prop_assert_eq!(&back, &g);
                prop_assert_eq!(encode_vox(&back), text);
            }
        }
    }
}
