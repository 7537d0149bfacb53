//! Brick assembly on voxel grids.
//!
//! Structures are built one brick at a time. Each step scores candidate
//! positions by correlating a per-voxel prediction with the brick footprint,
//! masks out positions that would overlap or leave the grid, samples an
//! existing brick as a pivot and attaches the new brick at the best stud
//! offset around it.

pub mod assembler;
pub mod brick;
pub mod conv;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod scorer;

pub use assembler::{
    derive_seed, run_episode, seeded_rng, step, Assembler, AssemblyConfig, AssemblyState, Episode,
    StepRecord, StepResult, TerminalReason, Toggles,
};
pub use brick::{BrickLibrary, BrickShape, Offset, Placement};
pub use error::{Error, Result};
pub use grid::{GridDims, ScoreGrid, VoxelGrid};
pub use metrics::{iou, validate_structure, SummaryReport, ValidationReport};
pub use pipeline::{generate_sequence, make_partial, sliding_pairs, BufferScheduler, TrainingPair};
pub use scorer::{ConstantScorer, FileScorer, ScoreSource, TargetOracle};
