//! Footprint sums (all-ones correlation with a brick-sized kernel), the
//! overlap validity mask, and masked placement scores.
//!
//! `footprint_sum(src, shape)[i, j, k]` is the sum of `src` over the cells a
//! brick of `shape` would cover when referenced at `(i, j, k)`. Cells outside
//! the grid contribute zero. The fast path runs two 1D box filters (x, then y)
//! built from prefix sums, so its cost per cell does not depend on the brick
//! area.

use std::ops::{Add, Sub};

use crate::brick::BrickShape;
use crate::error::{Error, Result};
use crate::grid::{GridDims, ScoreGrid, VoxelGrid};

/// Borrowed input for [`footprint_sum`].
#[derive(Debug, Clone, Copy)]
pub enum GridRef<'a> {
    Voxel(&'a VoxelGrid),
    Score(&'a ScoreGrid),
}

impl GridRef<'_> {
    pub fn dims(&self) -> GridDims {
        match self {
            GridRef::Voxel(g) => g.dims(),
            GridRef::Score(g) => g.dims(),
        }
    }

    fn value(&self, idx: usize) -> f64 {
        match self {
            GridRef::Voxel(g) => {
                if g.cells()[idx] {
                    1.0
                } else {
                    0.0
                }
            }
            GridRef::Score(g) => g.values()[idx],
        }
    }
}

impl<'a> From<&'a VoxelGrid> for GridRef<'a> {
    fn from(g: &'a VoxelGrid) -> Self {
        GridRef::Voxel(g)
    }
}

impl<'a> From<&'a ScoreGrid> for GridRef<'a> {
    fn from(g: &'a ScoreGrid) -> Self {
        GridRef::Score(g)
    }
}

/// Per-position flag: a brick referenced here is inside the grid and does not
/// overlap any occupied cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    dims: GridDims,
    flags: Vec<bool>,
}

impl ValidityMask {
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.flags[self.dims.index(i, j, k)]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

trait Accum: Copy + Default + Add<Output = Self> + Sub<Output = Self> {}
impl Accum for f64 {}
impl Accum for i32 {}

/// 1D box filter along x for every row. `lo = i - r`, `hi = lo + len - 1`.
fn box_x<T: Accum>(src: &[T], dims: GridDims, len: usize, r: usize, out: &mut [T]) {
    let nx = dims.x;
    let mut prefix = vec![T::default(); nx + 1];
    for (row_in, row_out) in src.chunks_exact(nx).zip(out.chunks_exact_mut(nx)) {
        let mut acc = T::default();
        for (p, &v) in prefix[1..].iter_mut().zip(row_in) {
            acc = acc + v;
            *p = acc;
        }
        for (i, o) in row_out.iter_mut().enumerate() {
            let lo = i.saturating_sub(r);
            let hi = (i + len - r).min(nx);
            *o = prefix[hi] - prefix[lo];
        }
    }
}

/// 1D box filter along y, whole rows at a time.
fn box_y<T: Accum>(src: &[T], dims: GridDims, len: usize, r: usize, out: &mut [T]) {
    let (nx, ny) = (dims.x, dims.y);
    let plane = nx * ny;
    let mut prefix = vec![T::default(); (ny + 1) * nx];
    for (pl_in, pl_out) in src.chunks_exact(plane).zip(out.chunks_exact_mut(plane)) {
        for j in 0..ny {
            let (done, rest) = prefix.split_at_mut((j + 1) * nx);
            let prev = &done[j * nx..];
            let row = &pl_in[j * nx..(j + 1) * nx];
            for ((p, &a), &v) in rest[..nx].iter_mut().zip(prev).zip(row) {
                *p = a + v;
            }
        }
        for (j, row_out) in pl_out.chunks_exact_mut(nx).enumerate() {
            let lo = j.saturating_sub(r);
            let hi = (j + len - r).min(ny);
            let upper = &prefix[hi * nx..(hi + 1) * nx];
            let lower = &prefix[lo * nx..(lo + 1) * nx];
            for ((o, &u), &l) in row_out.iter_mut().zip(upper).zip(lower) {
                *o = u - l;
            }
        }
    }
}

fn separable<T: Accum>(src: &[T], dims: GridDims, shape: BrickShape) -> Vec<T> {
    let (rw, rd) = shape.reference_offset();
    // Unit-length passes are skipped so 1-wide kernels stay exact for floats.
    let mut tmp = src.to_vec();
    if shape.width() > 1 {
        box_x(src, dims, shape.width(), rw, &mut tmp);
    }
    if shape.depth() == 1 {
        return tmp;
    }
    let mut out = vec![T::default(); src.len()];
    box_y(&tmp, dims, shape.depth(), rd, &mut out);
    out
}

/// Number of occupied cells under each candidate footprint.
pub fn footprint_counts(occupancy: &VoxelGrid, shape: BrickShape) -> Vec<i32> {
    let src: Vec<i32> = occupancy.cells().iter().map(|&c| c as i32).collect();
    separable(&src, occupancy.dims(), shape)
}

/// Fast footprint sum with zero padding.
pub fn footprint_sum<'a>(src: impl Into<GridRef<'a>>, shape: BrickShape) -> ScoreGrid {
    let src = src.into();
    let dims = src.dims();
    match src {
        GridRef::Voxel(g) => {
            let counts = footprint_counts(g, shape);
            ScoreGrid::from_raw(dims, counts.into_iter().map(f64::from).collect())
        }
        GridRef::Score(g) => ScoreGrid::from_raw(dims, separable(g.values(), dims, shape)),
    }
}

/// Reference implementation: for every output cell, walk the footprint.
pub fn footprint_sum_naive<'a>(src: impl Into<GridRef<'a>>, shape: BrickShape) -> ScoreGrid {
    let src = src.into();
    let dims = src.dims();
    let (rw, rd) = shape.reference_offset();
    let mut out = vec![0.0; dims.len()];
    for k in 0..dims.z {
        for j in 0..dims.y {
            for i in 0..dims.x {
                let mut acc = 0.0;
                for dy in 0..shape.depth() {
                    for dx in 0..shape.width() {
                        let x = i as isize - rw as isize + dx as isize;
                        let y = j as isize - rd as isize + dy as isize;
                        if let Some(idx) = dims.checked_index(x, y, k as isize) {
                            acc += src.value(idx);
                        }
                    }
                }
                out[dims.index(i, j, k)] = acc;
            }
        }
    }
    ScoreGrid::from_raw(dims, out)
}

/// Positions whose footprint stays inside the grid.
pub fn bounds_mask(dims: GridDims, shape: BrickShape) -> ValidityMask {
    let mut flags = vec![false; dims.len()];
    let (rw, rd) = shape.reference_offset();
    if shape.width() <= dims.x && shape.depth() <= dims.y {
        let (x0, x1) = (rw, dims.x - shape.width() + rw);
        let (y0, y1) = (rd, dims.y - shape.depth() + rd);
        for k in 0..dims.z {
            for j in y0..=y1 {
                let base = dims.index(0, j, k);
                flags[base + x0..=base + x1].fill(true);
            }
        }
    }
    ValidityMask { dims, flags }
}

/// In-bounds and overlap-free positions for `shape`.
pub fn validity_mask(occupancy: &VoxelGrid, shape: BrickShape) -> ValidityMask {
    let counts = footprint_counts(occupancy, shape);
    let mut mask = bounds_mask(occupancy.dims(), shape);
    for (f, &c) in mask.flags.iter_mut().zip(&counts) {
        *f = *f && c == 0;
    }
    mask
}

/// Validity flags for layer `k` only, x-fastest. Placements never span
/// layers, so a new brick changes the mask on its own layer and nowhere else.
pub fn validity_layer(occupancy: &VoxelGrid, shape: BrickShape, k: usize) -> Vec<bool> {
    let d = occupancy.dims();
    let plane = d.x * d.y;
    let layer = GridDims::new(d.x, d.y, 1).expect("non-zero");
    let src: Vec<i32> = occupancy.cells()[k * plane..(k + 1) * plane]
        .iter()
        .map(|&c| c as i32)
        .collect();
    let counts = separable(&src, layer, shape);
    let bounds = bounds_mask(layer, shape);
    bounds
        .flags
        .iter()
        .zip(&counts)
        .map(|(&b, &c)| b && c == 0)
        .collect()
}

/// Zeroes `scores` wherever `mask` is false.
pub fn apply_mask(scores: &ScoreGrid, mask: &ValidityMask) -> Result<ScoreGrid> {
    if scores.dims() != mask.dims() {
        return Err(Error::DimsMismatch {
            expected: mask.dims(),
            found: scores.dims(),
        });
    }
    let values = scores
        .values()
        .iter()
        .zip(&mask.flags)
        .map(|(&v, &ok)| if ok { v } else { 0.0 })
        .collect();
    Ok(ScoreGrid::from_raw(scores.dims(), values))
}

/// Masked placement score: the footprint-summed prediction at every valid
/// position, zero elsewhere. Predictions are clamped into `[0, 1]` first.
pub fn masked_scores(
    occupancy: &VoxelGrid,
    prediction: &ScoreGrid,
    shape: BrickShape,
) -> Result<ScoreGrid> {
    if occupancy.dims() != prediction.dims() {
        return Err(Error::DimsMismatch {
            expected: occupancy.dims(),
            found: prediction.dims(),
        });
    }
    let mut pred = prediction.clone();
    pred.clamp_unit();
    let summed = score_sum(&pred, shape);
    apply_mask(&summed, &validity_mask(occupancy, shape))
}

/// Footprint sum of a prediction already clamped into `[0, 1]`, pinned to
/// `[0, area]` to absorb prefix-sum rounding.
pub fn score_sum(prediction: &ScoreGrid, shape: BrickShape) -> ScoreGrid {
    let mut out = footprint_sum(prediction, shape);
    let cap = shape.area() as f64;
    for v in out.values_mut() {
        *v = v.clamp(0.0, cap);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(tag: &str) -> BrickShape {
        tag.parse().unwrap()
    }

    fn cube(a: usize) -> GridDims {
        GridDims::cube(a).unwrap()
    }

    #[test]
    fn empty_occupancy_sums_to_zero() {
        let g = VoxelGrid::new(cube(64), false);
        assert_eq!(footprint_sum(&g, s("2x4")).max(), 0.0);
    }

    #[test]
    fn single_cell_spreads_over_referencing_positions() {
        let mut g = VoxelGrid::new(cube(64), false);
        g.set(5, 5, 5, true);
        let out = footprint_sum(&g, s("2x4"));
        let mut hits = Vec::new();
        for (idx, &v) in out.values().iter().enumerate() {
            if v != 0.0 {
                assert_eq!(v, 1.0);
                hits.push(cube(64).coords(idx));
            }
        }
        hits.sort();
        let mut want = Vec::new();
        for i in 4..=5 {
            for j in 3..=6 {
                want.push([i, j, 5]);
            }
        }
        want.sort();
        assert_eq!(hits, want);
    }

    #[test]
    fn all_ones_with_zero_padding() {
        let g = ScoreGrid::filled(cube(16), 1.0).unwrap();
        let out = footprint_sum(&g, s("2x2"));
        assert_eq!(out.get(0, 0, 0), 4.0);
        assert_eq!(out.get(14, 14, 7), 4.0);
        assert_eq!(out.get(15, 3, 0), 2.0);
        assert_eq!(out.get(3, 15, 0), 2.0);
        assert_eq!(out.get(15, 15, 0), 1.0);
        assert_eq!(out, footprint_sum_naive(&g, s("2x2")));
    }

    #[test]
    fn unit_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = GridDims::new(7, 5, 3).unwrap();
        let vals: Vec<f64> = (0..d.len()).map(|_| rng.random::<f64>()).collect();
        let g = ScoreGrid::from_values(d, vals).unwrap();
        assert_eq!(footprint_sum_naive(&g, s("1x1")), g);
        assert_eq!(footprint_sum(&g, s("1x1")), g);
    }

    #[test]
    fn fast_matches_naive_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = GridDims::new(13, 9, 4).unwrap();
        for shape in ["1x1", "2x2", "2x4", "4x2", "3x2", "5x1", "9x9"] {
            let cells: Vec<bool> = (0..d.len()).map(|_| rng.random_bool(0.3)).collect();
            let g = VoxelGrid::from_cells(d, cells).unwrap();
            assert_eq!(
                footprint_sum(&g, s(shape)),
                footprint_sum_naive(&g, s(shape))
            );
            let vals: Vec<f64> = (0..d.len()).map(|_| rng.random::<f64>()).collect();
            let sg = ScoreGrid::from_values(d, vals).unwrap();
            let fast = footprint_sum(&sg, s(shape));
            let slow = footprint_sum_naive(&sg, s(shape));
            for (a, b) in fast.values().iter().zip(slow.values()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn validity_on_empty_grid_is_bounds_only() {
        let g = VoxelGrid::new(cube(64), false);
        let m = validity_mask(&g, s("2x4"));
        assert!(!m.get(10, 0, 10));
        assert!(m.get(10, 1, 10));
        assert!(m.get(10, 61, 10));
        assert!(!m.get(10, 62, 10));
        assert!(!m.get(63, 10, 10));
        assert_eq!(m.count(), 63 * 61 * 64);
    }

    #[test]
    fn validity_around_one_brick() {
        let dims = cube(64);
        let mut g = VoxelGrid::new(dims, false);
        let p = crate::brick::Placement::new(s("2x4"), [32, 32, 32], 0, dims).unwrap();
        for [i, j, k] in p.footprint_cells(dims).unwrap() {
            g.set(i, j, k, true);
        }
        let m = validity_mask(&g, s("2x4"));
        let free = validity_mask(&VoxelGrid::new(dims, false), s("2x4"));
        let mut blocked = Vec::new();
        for idx in 0..dims.len() {
            if free.flags()[idx] && !m.flags()[idx] {
                blocked.push(dims.coords(idx));
            }
        }
        blocked.sort();
        let mut want = Vec::new();
        for j in 1..=61 {
            for i in 0..=62 {
                let probe = [i as isize, j as isize, 32];
                if crate::brick::overlap_oracle(s("2x4"), probe, s("2x4"), p.signed_at()) {
                    want.push([i, j, 32]);
                }
            }
        }
        want.sort();
        assert_eq!(blocked.len(), 21);
        assert_eq!(blocked, want);
        assert!(m.get(32, 32, 31));
        assert!(m.get(32, 32, 33));
    }

    #[test]
    fn full_layer_blocks_only_that_layer() {
        let dims = cube(16);
        let mut g = VoxelGrid::new(dims, false);
        for j in 0..16 {
            for i in 0..16 {
                g.set(i, j, 4, true);
            }
        }
        let m = validity_mask(&g, s("2x2"));
        for j in 0..16 {
            for i in 0..16 {
                assert!(!m.get(i, j, 4));
            }
        }
        assert!(m.get(3, 3, 3));
        assert!(m.get(3, 3, 5));
    }

    #[test]
    fn masked_scores_examples() {
        let dims = cube(64);
        let empty = VoxelGrid::new(dims, false);
        let ones = ScoreGrid::filled(dims, 1.0).unwrap();
        let c = masked_scores(&empty, &ones, s("2x4")).unwrap();
        assert_eq!(c.get(20, 20, 20), 8.0);
        assert_eq!(c.get(20, 0, 20), 0.0);
        assert!(c.max() <= 8.0 && c.min() >= 0.0);

        let zeros = ScoreGrid::zeros(dims);
        assert_eq!(masked_scores(&empty, &zeros, s("2x4")).unwrap().max(), 0.0);

        let mut occ = empty.clone();
        let p = crate::brick::Placement::new(s("2x4"), [32, 32, 32], 0, dims).unwrap();
        for [i, j, k] in p.footprint_cells(dims).unwrap() {
            occ.set(i, j, k, true);
        }
        let c = masked_scores(&occ, &ones, s("2x4")).unwrap();
        let m = validity_mask(&occ, s("2x4"));
        for (idx, &v) in c.values().iter().enumerate() {
            if !m.flags()[idx] {
                assert_eq!(v, 0.0);
            }
        }
        assert_eq!(c.get(32, 32, 33), 8.0);
        assert_eq!(c.get(32, 32, 32), 0.0);
    }

    #[test]
    fn masked_scores_dim_mismatch() {
        let occ = VoxelGrid::new(cube(8), false);
        let pred = ScoreGrid::zeros(cube(4));
        assert!(matches!(
            masked_scores(&occ, &pred, s("2x2")),
            Err(Error::DimsMismatch { .. })
        ));
    }

    #[test]
    fn masked_scores_clamps_prediction() {
        let dims = cube(8);
        let occ = VoxelGrid::new(dims, false);
        let pred = ScoreGrid::filled(dims, 3.0).unwrap();
        let c = masked_scores(&occ, &pred, s("2x2")).unwrap();
        assert_eq!(c.max(), 4.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        fn occupancy() -> impl Strategy<Value = VoxelGrid> {
            (1usize..10, 1usize..10, 1usize..4).prop_flat_map(|(x, y, z)| {
                let d = GridDims::new(x, y, z).unwrap();
                proptest::collection::vec(any::<bool>(), d.len())
                    .prop_map(move |c| VoxelGrid::from_cells(d, c).unwrap())
            })
        }

        fn shape() -> impl Strategy<Value = BrickShape> {
            (1usize..=4, 1usize..=4).prop_map(|(w, d)| BrickShape::new(w, d).unwrap())
        }

        proptest! {
            #[test]
            fn fast_equals_naive(g in occupancy(), sh in shape()) {
                prop_assert_eq!(footprint_sum(&g, sh), footprint_sum_naive(&g, sh));
            }

            #[test]
            fn adding_a_cell_never_validates(g in occupancy(), sh in shape(), pick in any::<prop::sample::Index>()) {
                let before = validity_mask(&g, sh);
                let mut g2 = g.clone();
                let idx = pick.index(g.dims().len());
                g2.set_index(idx, true);
                let after = validity_mask(&g2, sh);
                for (b, a) in before.flags().iter().zip(after.flags()) {
                    prop_assert!(*b || !*a);
                }
            }

            #[test]
            fn masked_scores_bounded(g in occupancy(), sh in shape(), seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let d = g.dims();
                let vals = (0..d.len()).map(|_| rng.random::<f64>()).collect();
                let pred = ScoreGrid::from_values(d, vals).unwrap();
                let c = masked_scores(&g, &pred, sh).unwrap();
                prop_assert!(c.min() >= 0.0);
                prop_assert!(c.max() <= sh.area() as f64 + 1e-9);
            }
        }
    }
}
