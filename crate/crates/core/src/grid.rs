//! Dense 3D occupancy and score grids.
//!
//! Cells are stored x-fastest, then y, then z: the linear index of `(i, j, k)`
//! is `i + x * (j + y * k)`. The voxel and score-grid file formats use the same
//! order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell counts along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[usize; 3]", try_from = "[usize; 3]")]
pub struct GridDims {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl GridDims {
    pub fn new(x: usize, y: usize, z: usize) -> Result<Self> {
        if x == 0 || y == 0 || z == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { x, y, z })
    }

    pub fn cube(a: usize) -> Result<Self> {
        Self::new(a, a, a)
    }

    pub fn len(&self) -> usize {
        self.x * self.y * self.z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.x && j < self.y && k < self.z);
        i + self.x * (j + self.y * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.x;
        let rest = idx / self.x;
        [i, rest % self.y, rest / self.y]
    }

    #[inline]
    pub fn contains(&self, i: isize, j: isize, k: isize) -> bool {
        i >= 0
            && j >= 0
            && k >= 0
            && (i as usize) < self.x
            && (j as usize) < self.y
            && (k as usize) < self.z
    }

    /// Linear index of a signed coordinate, or `None` outside the grid.
    #[inline]
    pub fn checked_index(&self, i: isize, j: isize, k: isize) -> Option<usize> {
        self.contains(i, j, k)
            .then(|| self.index(i as usize, j as usize, k as usize))
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<GridDims> for [usize; 3] {
    fn from(d: GridDims) -> Self {
        d.as_array()
    }
}

impl TryFrom<[usize; 3]> for GridDims {
    type Error = Error;

    fn try_from(v: [usize; 3]) -> Result<Self> {
        GridDims::new(v[0], v[1], v[2])
    }
}

impl std::fmt::Display for GridDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.x, self.y, self.z)
    }
}

/// Boolean occupancy grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VoxelGrid {
    dims: GridDims,
    cells: Vec<bool>,
}

impl VoxelGrid {
    pub fn new(dims: GridDims, fill: bool) -> Self {
        Self {
            dims,
            cells: vec![fill; dims.len()],
        }
    }

    pub fn from_cells(dims: GridDims, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != dims.len() {
            return Err(Error::Format(format!(
                "expected {} cells for {dims}, got {}",
                dims.len(),
                cells.len()
            )));
        }
        Ok(Self { dims, cells })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    /// Panics when `(i, j, k)` is outside the grid.
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        assert!(
            i < self.dims.x && j < self.dims.y && k < self.dims.z,
            "cell ({i}, {j}, {k}) outside {}",
            self.dims
        );
        self.cells[self.dims.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        assert!(
            i < self.dims.x && j < self.dims.y && k < self.dims.z,
            "cell ({i}, {j}, {k}) outside {}",
            self.dims
        );
        let idx = self.dims.index(i, j, k);
        self.cells[idx] = value;
    }

    pub fn get_signed(&self, i: isize, j: isize, k: isize) -> Option<bool> {
        self.dims.checked_index(i, j, k).map(|idx| self.cells[idx])
    }

    pub(crate) fn set_index(&mut self, idx: usize, value: bool) {
        self.cells[idx] = value;
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    pub fn iter_occupied(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(idx, _)| self.dims.coords(idx))
    }

    /// True when every occupied cell of `self` is occupied in `other`.
    pub fn is_subset_of(&self, other: &VoxelGrid) -> bool {
        self.dims == other.dims && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    /// Block-max downscale: an output cell is occupied iff any cell of its
    /// `factor`³ block is.
    pub fn downscale(&self, factor: usize) -> Result<VoxelGrid> {
        let d = self.dims;
        if factor == 0 || ![d.x, d.y, d.z].iter().all(|n| n.is_multiple_of(factor)) {
            return Err(Error::NotDivisible { dims: d, factor });
        }
        let out_dims = GridDims::new(d.x / factor, d.y / factor, d.z / factor)?;
        let mut out = VoxelGrid::new(out_dims, false);
        for [i, j, k] in self.iter_occupied() {
            out.set(i / factor, j / factor, k / factor, true);
        }
        Ok(out)
    }

    /// Copies the grid into a larger one at offset `⌊(target - dims) / 2⌋`.
    pub fn embed_centered(&self, target: GridDims) -> Result<VoxelGrid> {
        let d = self.dims;
        if target.x < d.x || target.y < d.y || target.z < d.z {
            return Err(Error::TargetTooSmall { from: d, target });
        }
        let off = [
            (target.x - d.x) / 2,
            (target.y - d.y) / 2,
            (target.z - d.z) / 2,
        ];
        let mut out = VoxelGrid::new(target, false);
        for [i, j, k] in self.iter_occupied() {
            out.set(i + off[0], j + off[1], k + off[2], true);
        }
        Ok(out)
    }

    pub fn to_scores(&self) -> ScoreGrid {
        ScoreGrid {
            dims: self.dims,
            values: self
                .cells
                .iter()
                .map(|&c| if c { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Real-valued grid. Values are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrid {
    dims: GridDims,
    values: Vec<f64>,
}

impl ScoreGrid {
    pub fn filled(dims: GridDims, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            dims,
            values: vec![value; dims.len()],
        })
    }

    pub fn zeros(dims: GridDims) -> Self {
        Self {
            dims,
            values: vec![0.0; dims.len()],
        }
    }

    pub fn from_values(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::Format(format!(
                "expected {} values for {dims}, got {}",
                dims.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { dims, values })
    }

    /// Internal constructor for kernel outputs that are finite by construction.
    pub(crate) fn from_raw(dims: GridDims, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), dims.len());
        Self { dims, values }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        assert!(
            i < self.dims.x && j < self.dims.y && k < self.dims.z,
            "cell ({i}, {j}, {k}) outside {}",
            self.dims
        );
        self.values[self.dims.index(i, j, k)]
    }

    pub fn get_signed(&self, i: isize, j: isize, k: isize) -> Option<f64> {
        self.dims.checked_index(i, j, k).map(|idx| self.values[idx])
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        let idx = self.dims.index(i, j, k);
        self.values[idx] = value;
        Ok(())
    }

    /// Clamps every value into `[0, 1]`, returning how many were changed.
    pub fn clamp_unit(&mut self) -> usize {
        let mut changed = 0;
        for v in &mut self.values {
            let c = v.clamp(0.0, 1.0);
            if c != *v {
                *v = c;
                changed += 1;
            }
        }
        changed
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}
