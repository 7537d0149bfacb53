//! Episode JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembler::{AssemblyConfig, Episode, StepRecord, TerminalReason, Toggles};
use crate::brick::{BrickLibrary, BrickShape, Offset, Placement};
use crate::error::{Error, Result};
use crate::grid::GridDims;

pub const EPISODE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigRecord {
    pub dims: GridDims,
    pub budget: usize,
    #[serde(default)]
    pub phase_budget: Option<usize>,
    pub tau: f64,
    pub seed: u64,
    pub phases: Vec<Vec<BrickShape>>,
    pub toggles: Toggles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementRecord {
    pub step: usize,
    pub shape: BrickShape,
    #[serde(rename = "ref")]
    pub at: [usize; 3],
    #[serde(default)]
    pub pivot: Option<usize>,
    #[serde(default)]
    pub offset: Option<Offset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeFile {
    pub version: u32,
    pub config: ConfigRecord,
    pub initial_placements: usize,
    pub placements: Vec<PlacementRecord>,
    pub terminal_reason: TerminalReason,
    pub wall_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_path: Option<String>,
}

impl From<&Episode> for EpisodeFile {
    fn from(ep: &Episode) -> Self {
        let c = &ep.config;
        Self {
            version: EPISODE_VERSION,
            config: ConfigRecord {
                dims: c.dims,
                budget: c.budget,
                phase_budget: c.phase_budget,
                tau: c.tau,
                seed: c.seed,
                phases: c.library.phases().to_vec(),
                toggles: c.toggles,
            },
            initial_placements: ep.initial_count,
            placements: ep
                .placements
                .iter()
                .zip(&ep.records)
                .map(|(p, r)| PlacementRecord {
                    step: p.step,
                    shape: p.shape,
                    at: p.at,
                    pivot: r.map(|r| r.pivot),
                    offset: r.map(|r| r.offset),
                })
                .collect(),
            terminal_reason: ep.terminal,
            wall_seconds: ep.wall_seconds,
            target_path: ep.target_path.clone(),
        }
    }
}

impl TryFrom<EpisodeFile> for Episode {
    type Error = Error;

    fn try_from(f: EpisodeFile) -> Result<Self> {
        if f.version != EPISODE_VERSION {
            return Err(Error::Format(format!(
                "unsupported episode version {}",
                f.version
            )));
        }
        let c = f.config;
        let config = AssemblyConfig {
            dims: c.dims,
            library: BrickLibrary::from_phases(c.phases)?,
            budget: c.budget,
            phase_budget: c.phase_budget,
            tau: c.tau,
            seed: c.seed,
            toggles: c.toggles,
        };
        config.validate()?;
        if f.initial_placements > f.placements.len() {
            return Err(Error::Format(format!(
                "{} initial placements but only {} recorded",
                f.initial_placements,
                f.placements.len()
            )));
        }
        let mut placements = Vec::with_capacity(f.placements.len());
        let mut records = Vec::with_capacity(f.placements.len());
        for (idx, r) in f.placements.into_iter().enumerate() {
            placements.push(Placement::new(r.shape, r.at, r.step, config.dims)?);
            let record = match (r.pivot, r.offset) {
                (Some(pivot), Some(offset)) if pivot < idx => Some(StepRecord { pivot, offset }),
                (None, None) => None,
                _ => {
                    return Err(Error::Format(format!(
                        "placement {idx}: inconsistent pivot/offset"
                    )))
                }
            };
            records.push(record);
        }
        Ok(Episode {
            config,
            target_path: f.target_path,
            placements,
            records,
            initial_count: f.initial_placements,
            terminal: f.terminal_reason,
            wall_seconds: f.wall_seconds,
        })
    }
}

pub fn encode_episode(ep: &Episode) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&EpisodeFile::from(ep))?;
    s.push('\n');
    Ok(s)
}

pub fn decode_episode(text: &str) -> Result<Episode> {
    let f: EpisodeFile = serde_json::from_str(text)?;
    Episode::try_from(f)
}

pub fn read_episode(path: &Path) -> Result<Episode> {
    decode_episode(&super::read_string(path)?)
}

pub fn write_episode(path: &Path, ep: &Episode) -> Result<()> {
    super::write_atomic(path, encode_episode(ep)?.as_bytes())
}
