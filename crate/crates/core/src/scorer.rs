//! Occupancy predictors that drive the assembler, and the voxel-wise
//! binary cross-entropy used to evaluate external predictions.

use crate::assembler::AssemblyState;
use crate::error::{Error, Result};
use crate::grid::{GridDims, ScoreGrid, VoxelGrid};

pub const DEFAULT_BCE_EPSILON: f64 = 1e-7;

/// Produces a per-voxel occupancy probability for the current state.
///
/// Implementations must return a grid of the engine dims with values in
/// `[0, 1]`, and must be deterministic for a given state.
pub trait ScoreSource: Send + Sync {
    fn predict(&self, state: &AssemblyState) -> Result<ScoreGrid>;

    /// True when the prediction ignores the state. Lets the assembler reuse
    /// footprint sums across steps.
    fn is_static(&self) -> bool {
        false
    }
}

/// Predicts the ground-truth occupancy itself.
#[derive(Debug, Clone)]
pub struct TargetOracle {
    target: VoxelGrid,
    prediction: ScoreGrid,
}

impl TargetOracle {
    pub fn new(target: VoxelGrid) -> Self {
        let prediction = target.to_scores();
        Self { target, prediction }
    }

    pub fn target(&self) -> &VoxelGrid {
        &self.target
    }
}

impl ScoreSource for TargetOracle {
    fn predict(&self, state: &AssemblyState) -> Result<ScoreGrid> {
        check_dims(self.target.dims(), state.dims())?;
        Ok(self.prediction.clone())
    }

    fn is_static(&self) -> bool {
        true
    }
}

/// A single prediction grid loaded from outside (e.g. a trained network).
#[derive(Debug, Clone)]
pub struct FileScorer {
    prediction: ScoreGrid,
    clamped: usize,
}

impl FileScorer {
    /// Clamps values into `[0, 1]`; [`FileScorer::clamped`] reports how many
    /// needed it.
    pub fn new(mut prediction: ScoreGrid) -> Self {
        let clamped = prediction.clamp_unit();
        Self {
            prediction,
            clamped,
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(Self::new(crate::io::scoregrid::read_score_grid(path)?))
    }

    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn prediction(&self) -> &ScoreGrid {
        &self.prediction
    }
}

impl ScoreSource for FileScorer {
    fn predict(&self, state: &AssemblyState) -> Result<ScoreGrid> {
        check_dims(self.prediction.dims(), state.dims())?;
        Ok(self.prediction.clone())
    }

    fn is_static(&self) -> bool {
        true
    }
}

/// Same probability everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer {
    value: f64,
}

impl ConstantScorer {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            value: value.clamp(0.0, 1.0),
        })
    }
}

impl ScoreSource for ConstantScorer {
    fn predict(&self, state: &AssemblyState) -> Result<ScoreGrid> {
        ScoreGrid::filled(state.dims(), self.value)
    }

    fn is_static(&self) -> bool {
        true
    }
}

fn check_dims(expected: GridDims, found: GridDims) -> Result<()> {
    if expected != found {
        return Err(Error::DimsMismatch { expected, found });
    }
    Ok(())
}

/// Mean voxel-wise binary cross-entropy with predictions clamped to
/// `[epsilon, 1 - epsilon]`.
pub fn bce_loss(prediction: &ScoreGrid, target: &VoxelGrid, epsilon: f64) -> Result<f64> {
    check_dims(target.dims(), prediction.dims())?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Config(format!("epsilon {epsilon} outside (0, 0.5)")));
    }
    let total: f64 = prediction
        .values()
        .iter()
        .zip(target.cells())
        .map(|(&p, &y)| {
            let p = p.clamp(epsilon, 1.0 - epsilon);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / prediction.values().len() as f64)
}
