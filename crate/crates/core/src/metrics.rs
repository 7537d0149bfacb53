//! IoU, structure validation and run summaries.

use serde::{Deserialize, Serialize};

use crate::assembler::Episode;
use crate::brick::Placement;
use crate::error::{Error, Result};
use crate::grid::{GridDims, VoxelGrid};

/// Intersection over union. Two empty grids count as identical (1.0).
pub fn iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimsMismatch {
            expected: a.dims(),
            found: b.dims(),
        });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.cells().iter().zip(b.cells()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub overlap_ok: bool,
    pub connectivity_ok: bool,
    pub vertical_ok: bool,
    /// Pairs of placement indices whose footprints intersect.
    pub overlapping: Vec<[usize; 2]>,
    /// Connected components by placement index, largest first. A single
    /// component means the structure is connected.
    pub components: Vec<Vec<usize>>,
    /// Bricks with no stud connection to any other brick.
    pub unsupported: Vec<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.overlap_ok && self.connectivity_ok && self.vertical_ok
    }
}

/// Checks no-overlap, connectivity through stud connections only, and that
/// every brick (in structures of two or more) has a stud connection.
pub fn validate_structure(placements: &[Placement], dims: GridDims) -> Result<ValidationReport> {
    for p in placements {
        p.check_bounds(dims)?;
    }
    let n = placements.len();
    let mut overlapping = Vec::new();
    let mut adjacency = vec![Vec::new(); n];
    for a in 0..n {
        for b in a + 1..n {
            let (pa, pb) = (&placements[a], &placements[b]);
            if pa.overlaps(pb) {
                overlapping.push([a, b]);
            }
            if pa.is_connected_to(pb) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
    }

    let mut component = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        component[start] = id;
        let mut cursor = 0;
        while cursor < members.len() {
            let v = members[cursor];
            cursor += 1;
            for &w in &adjacency[v] {
                if component[w] == usize::MAX {
                    component[w] = id;
                    members.push(w);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));

    let unsupported: Vec<usize> = if n > 1 {
        (0..n).filter(|&i| adjacency[i].is_empty()).collect()
    } else {
        Vec::new()
    };

    Ok(ValidationReport {
        overlap_ok: overlapping.is_empty(),
        connectivity_ok: components.len() <= 1,
        vertical_ok: unsupported.is_empty(),
        overlapping,
        components,
        unsupported,
    })
}

/// True when the bricks form a single stud-connected component.
pub(crate) fn is_connected(placements: &[&Placement]) -> bool {
    let n = placements.len();
    if n <= 1 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for w in 0..n {
            if !seen[w] && placements[v].is_connected_to(placements[w]) {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub name: String,
    pub bricks: usize,
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
    pub wall_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub episodes: Vec<EpisodeSummary>,
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_iou: Option<f64>,
    pub percent_valid: f64,
    pub mean_bricks: f64,
    /// Mean over episodes that recorded a wall-clock time.
    pub mean_wall_seconds: Option<f64>,
}

/// Aggregates per-episode metrics. `targets`, when given, pairs one-to-one
/// with `episodes`.
pub fn summarize(
    episodes: &[(String, Episode)],
    targets: Option<&[VoxelGrid]>,
) -> Result<SummaryReport> {
    if let Some(t) = targets {
        if t.len() != episodes.len() {
            return Err(Error::Config(format!(
                "{} targets for {} episodes",
                t.len(),
                episodes.len()
            )));
        }
    }
    let mut rows = Vec::with_capacity(episodes.len());
    for (idx, (name, ep)) in episodes.iter().enumerate() {
        let report = validate_structure(&ep.placements, ep.config.dims)?;
        let iou = match targets {
            Some(t) => Some(iou(&ep.occupancy_after(ep.len()), &t[idx])?),
            None => None,
        };
        rows.push(EpisodeSummary {
            name: name.clone(),
            bricks: ep.len(),
            valid: report.is_valid(),
            iou,
            wall_seconds: ep.wall_seconds,
        });
    }
    let count = rows.len();
    let mean = |vals: Vec<f64>| {
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    Ok(SummaryReport {
        mean_iou: targets.and_then(|_| mean(rows.iter().filter_map(|r| r.iou).collect())),
        percent_valid: if count == 0 {
            0.0
        } else {
            100.0 * rows.iter().filter(|r| r.valid).count() as f64 / count as f64
        },
        mean_bricks: mean(rows.iter().map(|r| r.bricks as f64).collect()).unwrap_or(0.0),
        mean_wall_seconds: mean(rows.iter().filter_map(|r| r.wall_seconds).collect()),
        count,
        episodes: rows,
    })
}
