//! Brick footprints, the reference-cell convention and attachable offsets.
//!
//! A brick of width `w` (x extent) and depth `d` (y extent) occupies one layer.
//! Its position is given by a reference cell sitting at
//! `(⌊(w-1)/2⌋, ⌊(d-1)/2⌋)` from the footprint's minimum corner, so a brick
//! referenced at `(i, j, k)` covers `x ∈ [i-rw, i-rw+w-1]`, `y ∈ [j-rd, j-rd+d-1]`
//! on layer `k`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridDims;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BrickShape {
    width: usize,
    depth: usize,
}

impl BrickShape {
    pub fn new(width: usize, depth: usize) -> Result<Self> {
        if width == 0 || depth == 0 {
            return Err(Error::InvalidShape(format!("{width}x{depth}")));
        }
        Ok(Self { width, depth })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn area(&self) -> usize {
        self.width * self.depth
    }

    /// The same brick rotated 90° about the vertical axis.
    pub fn rotated(&self) -> Self {
        Self {
            width: self.depth,
            depth: self.width,
        }
    }

    /// Orientation tag, e.g. `"2x4"` vs `"4x2"`.
    pub fn tag(&self) -> String {
        self.to_string()
    }

    /// Offset of the reference cell from the footprint's minimum corner.
    pub fn reference_offset(&self) -> (usize, usize) {
        ((self.width - 1) / 2, (self.depth - 1) / 2)
    }

    /// Inclusive x and y ranges covered when referenced at `(i, j)`.
    pub fn extent(&self, i: isize, j: isize) -> ([isize; 2], [isize; 2]) {
        let (rw, rd) = self.reference_offset();
        let x0 = i - rw as isize;
        let y0 = j - rd as isize;
        (
            [x0, x0 + self.width as isize - 1],
            [y0, y0 + self.depth as isize - 1],
        )
    }

    pub fn fits(&self, dims: GridDims, at: [isize; 3]) -> bool {
        let ([x0, x1], [y0, y1]) = self.extent(at[0], at[1]);
        dims.contains(x0, y0, at[2]) && dims.contains(x1, y1, at[2])
    }
}

impl fmt::Display for BrickShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.depth)
    }
}

impl FromStr for BrickShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (w, d) = s
            .trim()
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::UnknownShape(s.to_string()))?;
        let parse = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::UnknownShape(s.to_string()))
        };
        BrickShape::new(parse(w)?, parse(d)?)
    }
}

impl Serialize for BrickShape {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BrickShape {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Position of a new brick's reference cell relative to its pivot's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[isize; 3]", try_from = "[isize; 3]")]
pub struct Offset {
    pub x: isize,
    pub y: isize,
    /// Always −1 or +1.
    pub z: isize,
}

impl Offset {
    pub fn new(x: isize, y: isize, z: isize) -> Result<Self> {
        if z != -1 && z != 1 {
            return Err(Error::Format(format!("offset z must be ±1, got {z}")));
        }
        Ok(Self { x, y, z })
    }

    pub fn apply(&self, at: [usize; 3]) -> [isize; 3] {
        [
            at[0] as isize + self.x,
            at[1] as isize + self.y,
            at[2] as isize + self.z,
        ]
    }
}

impl From<Offset> for [isize; 3] {
    fn from(o: Offset) -> Self {
        [o.x, o.y, o.z]
    }
}

impl TryFrom<[isize; 3]> for Offset {
    type Error = Error;

    fn try_from(v: [isize; 3]) -> Result<Self> {
        Offset::new(v[0], v[1], v[2])
    }
}

/// A brick placed in the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Placement {
    pub shape: BrickShape,
    /// Reference cell `(i, j, k)`.
    pub at: [usize; 3],
    pub step: usize,
}

impl Placement {
    pub fn new(shape: BrickShape, at: [usize; 3], step: usize, dims: GridDims) -> Result<Self> {
        let p = Self { shape, at, step };
        p.check_bounds(dims)?;
        Ok(p)
    }

    pub fn check_bounds(&self, dims: GridDims) -> Result<()> {
        if self.shape.fits(dims, self.signed_at()) {
            Ok(())
        } else {
            let [i, j, k] = self.signed_at();
            Err(Error::OutOfBounds {
                shape: self.shape.tag(),
                i,
                j,
                k,
            })
        }
    }

    pub fn signed_at(&self) -> [isize; 3] {
        [
            self.at[0] as isize,
            self.at[1] as isize,
            self.at[2] as isize,
        ]
    }

    /// Cells covered by the footprint, x-fastest. Errors if any leaves `dims`.
    pub fn footprint_cells(&self, dims: GridDims) -> Result<Vec<[usize; 3]>> {
        self.check_bounds(dims)?;
        Ok(footprint_cells_unbounded(self.shape, self.signed_at())
            .into_iter()
            .map(|[i, j, k]| [i as usize, j as usize, k as usize])
            .collect())
    }

    /// Linear indices of the footprint; the placement must already be in bounds.
    pub(crate) fn footprint_indices(&self, dims: GridDims) -> impl Iterator<Item = usize> + '_ {
        let ([x0, x1], [y0, y1]) = self.shape.extent(self.at[0] as isize, self.at[1] as isize);
        let k = self.at[2];
        (y0..=y1).flat_map(move |j| (x0..=x1).map(move |i| dims.index(i as usize, j as usize, k)))
    }

    /// Stud connection: adjacent layers with intersecting xy footprints.
    pub fn is_connected_to(&self, other: &Placement) -> bool {
        self.at[2].abs_diff(other.at[2]) == 1 && self.xy_intersects(other)
    }

    pub fn xy_intersects(&self, other: &Placement) -> bool {
        let (ax, ay) = self.shape.extent(self.at[0] as isize, self.at[1] as isize);
        let (bx, by) = other
            .shape
            .extent(other.at[0] as isize, other.at[1] as isize);
        ax[0] <= bx[1] && bx[0] <= ax[1] && ay[0] <= by[1] && by[0] <= ay[1]
    }

    pub fn overlaps(&self, other: &Placement) -> bool {
        self.at[2] == other.at[2] && self.xy_intersects(other)
    }
}

/// Footprint cells without any grid bounds.
pub fn footprint_cells_unbounded(shape: BrickShape, at: [isize; 3]) -> Vec<[isize; 3]> {
    let (rw, rd) = shape.reference_offset();
    let mut cells = Vec::with_capacity(shape.area());
    for dy in 0..shape.depth() {
        for dx in 0..shape.width() {
            cells.push([
                at[0] - rw as isize + dx as isize,
                at[1] - rd as isize + dy as isize,
                at[2],
            ]);
        }
    }
    cells
}

/// Physical overlap by explicit cell enumeration. Independent of the interval
/// arithmetic used by [`attachable_offsets`].
pub fn overlap_oracle(
    shape_a: BrickShape,
    at_a: [isize; 3],
    shape_b: BrickShape,
    at_b: [isize; 3],
) -> bool {
    let a: HashSet<[isize; 3]> = footprint_cells_unbounded(shape_a, at_a)
        .into_iter()
        .collect();
    footprint_cells_unbounded(shape_b, at_b)
        .iter()
        .any(|c| a.contains(c))
}

/// Inclusive range of reference-cell displacements along one axis for which a
/// new brick of length `new_len` intersects a pivot of length `pivot_len`.
fn attach_range(new_len: usize, pivot_len: usize) -> (isize, isize) {
    let r_new = ((new_len - 1) / 2) as isize;
    let r_pivot = ((pivot_len - 1) / 2) as isize;
    (
        r_new - r_pivot - new_len as isize + 1,
        r_new - r_pivot + pivot_len as isize - 1,
    )
}

/// The symmetric floor/ceil bounds `[-(⌊(a+b)/2⌋-1), ⌈(a+b)/2⌉-1]`.
///
/// Equal to [`attach_range`] whenever `a` and `b` have the same parity; for
/// mixed parity the two differ by one cell (see the tests).
pub fn floor_ceil_range(new_len: usize, pivot_len: usize) -> (isize, isize) {
    let sum = new_len + pivot_len;
    let lo = -((sum / 2) as isize - 1);
    let hi = sum.div_ceil(2) as isize - 1;
    (lo, hi)
}

/// Offsets at which a `new` brick connects to a `pivot` brick through studs,
/// ordered by z, then x, then y ascending.
pub fn attachable_offsets(new: BrickShape, pivot: BrickShape) -> Vec<Offset> {
    let (x0, x1) = attach_range(new.width(), pivot.width());
    let (y0, y1) = attach_range(new.depth(), pivot.depth());
    let mut out = Vec::with_capacity(((x1 - x0 + 1) * (y1 - y0 + 1) * 2) as usize);
    for z in [-1, 1] {
        for x in x0..=x1 {
            for y in y0..=y1 {
                out.push(Offset { x, y, z });
            }
        }
    }
    out
}

/// Brick types in assembly order. Each phase holds the orientations of one
/// physical brick type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrickLibrary {
    phases: Vec<Vec<BrickShape>>,
}

impl BrickLibrary {
    pub fn from_phases(phases: Vec<Vec<BrickShape>>) -> Result<Self> {
        if phases.is_empty() || phases.iter().any(|p| p.is_empty()) {
            return Err(Error::EmptyLibrary);
        }
        for phase in &phases {
            let distinct: HashSet<_> = phase.iter().collect();
            if distinct.len() != phase.len() {
                return Err(Error::Config(format!(
                    "duplicate orientation in phase {phase:?}"
                )));
            }
        }
        Ok(Self { phases })
    }

    /// Parses a comma-separated list of brick types, e.g. `"2x4,2x2"`. Each
    /// type expands to itself plus its rotation when distinct.
    pub fn from_types(types: &str) -> Result<Self> {
        let mut phases = Vec::new();
        for tag in types.split(',').filter(|t| !t.trim().is_empty()) {
            let shape: BrickShape = tag.parse()?;
            let mut phase = vec![shape];
            if shape.rotated() != shape {
                phase.push(shape.rotated());
            }
            phases.push(phase);
        }
        Self::from_phases(phases)
    }

    pub fn phases(&self) -> &[Vec<BrickShape>] {
        &self.phases
    }

    pub fn first_shape(&self) -> BrickShape {
        self.phases[0][0]
    }

    pub fn shapes(&self) -> impl Iterator<Item = BrickShape> + '_ {
        self.phases.iter().flatten().copied()
    }
}

impl Default for BrickLibrary {
    fn default() -> Self {
        Self::from_types("2x4").expect("static library")
    }
}
