//! LDraw export for viewing assemblies in standard LEGO viewers.
//!
//! Grid x maps to LDraw X, grid y to LDraw Z and layers stack along LDraw -Y.
//! Each part is positioned at the top centre of its footprint, which is where
//! LDraw places the origin of a standard brick.

use std::fmt::Write as _;
use std::path::Path;

use crate::assembler::Episode;
use crate::brick::Placement;
use crate::error::{Error, Result};

pub const CELL_LDU: isize = 20;
pub const LAYER_LDU: isize = 24;
pub const PALETTE: [u32; 8] = [4, 1, 14, 2, 15, 0, 25, 71];

const IDENTITY: [i32; 9] = [1, 0, 0, 0, 1, 0, 0, 0, 1];
// 90° about the vertical axis.
const QUARTER_TURN: [i32; 9] = [0, 0, 1, 0, 1, 0, -1, 0, 0];

/// Part file and rotation for a shape. The 3001 part is long along LDraw X.
fn part(p: &Placement) -> Result<(&'static str, [i32; 9])> {
    match (p.shape.width(), p.shape.depth()) {
        (4, 2) => Ok(("3001.dat", IDENTITY)),
        (2, 4) => Ok(("3001.dat", QUARTER_TURN)),
        (2, 2) => Ok(("3003.dat", IDENTITY)),
        _ => Err(Error::UnknownShape(p.shape.tag())),
    }
}

/// LDraw position of a placement's top centre, in LDU.
pub fn placement_origin(p: &Placement) -> [isize; 3] {
    let [i, j, k] = p.signed_at();
    let ([x0, x1], [y0, y1]) = p.shape.extent(i, j);
    [
        (x0 + x1 + 1) * CELL_LDU / 2,
        -(k + 1) * LAYER_LDU,
        (y0 + y1 + 1) * CELL_LDU / 2,
    ]
}

pub fn export_ldraw(episode: &Episode) -> Result<String> {
    let mut out = String::new();
    let name = episode.target_path.as_deref().unwrap_or("assembly");
    let _ = writeln!(out, "0 {name}");
    let _ = writeln!(out, "0 Name: {name}.ldr");
    let _ = writeln!(out, "0 Author: brecs");
    for p in &episode.placements {
        let (file, m) = part(p)?;
        let [x, y, z] = placement_origin(p);
        let color = PALETTE[p.step % PALETTE.len()];
        let _ = write!(out, "1 {color} {x} {y} {z}");
        for v in m {
            let _ = write!(out, " {v}");
        }
        let _ = writeln!(out, " {file}");
    }
    Ok(out)
}

pub fn write_ldraw(path: &Path, episode: &Episode) -> Result<()> {
    super::write_atomic(path, export_ldraw(episode)?.as_bytes())
}
