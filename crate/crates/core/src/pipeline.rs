//! Training-data generation: ground-truth assembly sequences, k-step state
//! pairs, the replay-buffer batch scheduler, and partial structures for
//! completion runs.
//!
//! A sequence `B̃_0 … B̃_T` is read from an episode: `B̃_t` is the occupancy
//! after the initial bricks plus `t` more, so `T = len - initial_count`.

use rand::Rng;

use crate::assembler::{run_episode, AssemblyConfig, AssemblyState, Episode};
use crate::brick::Placement;
use crate::conv::masked_scores;
use crate::error::{Error, Result};
use crate::grid::VoxelGrid;
use crate::metrics::is_connected;
use crate::scorer::TargetOracle;

/// Assembles `target` with the target itself as the predictor.
///
/// The first brick goes where the footprint covers the most target cells
/// (first position in grid order, then library order, on ties).
pub fn generate_sequence<R: Rng + ?Sized>(
    target: &VoxelGrid,
    config: &AssemblyConfig,
    rng: &mut R,
) -> Result<Episode> {
    if target.dims() != config.dims {
        return Err(Error::DimsMismatch {
            expected: config.dims,
            found: target.dims(),
        });
    }
    if target.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let initial = best_initial_state(target, config)?;
    run_episode(initial, &TargetOracle::new(target.clone()), config, rng)
}

fn best_initial_state(target: &VoxelGrid, config: &AssemblyConfig) -> Result<AssemblyState> {
    let dims = config.dims;
    let empty = VoxelGrid::new(dims, false);
    let pred = target.to_scores();
    let shapes = &config.library.phases()[0];
    let scores = shapes
        .iter()
        .map(|&s| masked_scores(&empty, &pred, s))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(usize, usize, f64)> = None;
    for idx in 0..dims.len() {
        for (s, c) in scores.iter().enumerate() {
            let v = c.values()[idx];
            if v > config.tau && best.is_none_or(|(_, _, b)| v > b) {
                best = Some((idx, s, v));
            }
        }
    }
    let (idx, s, _) = best.ok_or(Error::NoInitialPlacement)?;
    let mut state = AssemblyState::new(dims);
    state.place(shapes[s], dims.coords(idx))?;
    Ok(state)
}

/// Length `T` of the state sequence held by an episode.
pub fn sequence_length(episode: &Episode) -> usize {
    episode.len().saturating_sub(episode.initial_count)
}

/// `B̃_t` of an episode.
pub fn sequence_state(episode: &Episode, t: usize) -> VoxelGrid {
    episode.occupancy_after(episode.initial_count + t)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub source: String,
    pub t: usize,
    pub k: usize,
    pub input: VoxelGrid,
    pub target: VoxelGrid,
}

impl TrainingPair {
    pub fn is_superset_consistent(&self) -> bool {
        self.input.is_subset_of(&self.target)
    }
}

/// All pairs `(B̃_t, B̃_{t+k})` for `t = 0..=T-k`. Empty when `T < k`.
pub fn sliding_pairs(source: &str, episode: &Episode, k: usize) -> Vec<TrainingPair> {
    let len = sequence_length(episode);
    if k == 0 || len < k {
        return Vec::new();
    }
    (0..=len - k)
        .map(|t| TrainingPair {
            source: source.to_string(),
            t,
            k,
            input: sequence_state(episode, t),
            target: sequence_state(episode, t + k),
        })
        .collect()
}

/// A buffer slot: a sequence and the cursor of its next pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferEntry {
    pub sequence: usize,
    pub t: usize,
}

/// Replay-buffer scheduler over a store of sequences.
///
/// The buffer is filled with fresh entries (cursor 0, sequence drawn
/// uniformly) before the first batch. Each batch removes `batch` entries drawn
/// uniformly without replacement; afterwards, in batch order, an entry whose
/// pair reached the end of its sequence is replaced by a fresh one and every
/// other entry goes back with its cursor advanced by one.
pub struct BufferScheduler<'a, R: Rng> {
    store: &'a [(String, Episode)],
    usable: Vec<usize>,
    batch: usize,
    k: usize,
    buffer: Vec<BufferEntry>,
    rng: R,
}

impl<'a, R: Rng> BufferScheduler<'a, R> {
    /// Sequences shorter than `k` are skipped.
    pub fn new(
        store: &'a [(String, Episode)],
        batch: usize,
        k: usize,
        buffer_size: usize,
        rng: R,
    ) -> Result<Self> {
        if batch == 0 || k == 0 {
            return Err(Error::Config("batch size and k must be positive".into()));
        }
        if buffer_size < batch {
            return Err(Error::Config(format!(
                "buffer size {buffer_size} smaller than batch size {batch}"
            )));
        }
        let usable: Vec<usize> = store
            .iter()
            .enumerate()
            .filter(|(_, (_, ep))| sequence_length(ep) >= k)
            .map(|(i, _)| i)
            .collect();
        if usable.is_empty() {
            return Err(Error::BufferUnderflow {
                available: 0,
                needed: batch,
            });
        }
        let mut sched = Self {
            store,
            usable,
            batch,
            k,
            buffer: Vec::with_capacity(buffer_size),
            rng,
        };
        for _ in 0..buffer_size {
            let e = sched.fresh();
            sched.buffer.push(e);
        }
        Ok(sched)
    }

    fn fresh(&mut self) -> BufferEntry {
        let pick = self.rng.random_range(0..self.usable.len());
        BufferEntry {
            sequence: self.usable[pick],
            t: 0,
        }
    }

    pub fn buffer(&self) -> &[BufferEntry] {
        &self.buffer
    }

    /// Indices into the store of sequences long enough to use.
    pub fn usable(&self) -> &[usize] {
        &self.usable
    }

    pub fn next_batch(&mut self) -> Result<Vec<BufferEntry>> {
        if self.buffer.len() < self.batch {
            return Err(Error::BufferUnderflow {
                available: self.buffer.len(),
                needed: self.batch,
            });
        }
        let mut picked = Vec::with_capacity(self.batch);
        for _ in 0..self.batch {
            let i = self.rng.random_range(0..self.buffer.len());
            picked.push(self.buffer.remove(i));
        }
        for e in &picked {
            let len = sequence_length(&self.store[e.sequence].1);
            let next = if e.t + self.k == len {
                self.fresh()
            } else {
                BufferEntry {
                    sequence: e.sequence,
                    t: e.t + 1,
                }
            };
            self.buffer.push(next);
        }
        Ok(picked)
    }

    pub fn materialize(&self, entry: BufferEntry) -> TrainingPair {
        let (name, ep) = &self.store[entry.sequence];
        TrainingPair {
            source: name.clone(),
            t: entry.t,
            k: self.k,
            input: sequence_state(ep, entry.t),
            target: sequence_state(ep, entry.t + self.k),
        }
    }
}

/// Emits `num_batches` batches of training pairs to `consumer`.
pub fn buffer_schedule<R, F>(
    store: &[(String, Episode)],
    batch: usize,
    k: usize,
    buffer_size: usize,
    rng: R,
    num_batches: usize,
    mut consumer: F,
) -> Result<()>
where
    R: Rng,
    F: FnMut(usize, Vec<TrainingPair>) -> Result<()>,
{
    let mut sched = BufferScheduler::new(store, batch, k, buffer_size, rng)?;
    for b in 0..num_batches {
        let entries = sched.next_batch()?;
        let pairs = entries.into_iter().map(|e| sched.materialize(e)).collect();
        consumer(b, pairs)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Partial {
    pub state: AssemblyState,
    pub removed: usize,
    /// False when no brick could be removed without disconnecting the rest
    /// before the quota was met.
    pub complete: bool,
}

impl Partial {
    /// Episode holding the partial structure as its initial bricks.
    pub fn into_episode(self, source: &Episode) -> Episode {
        let n = self.state.placements().len();
        Episode {
            config: source.config.clone(),
            target_path: source.target_path.clone(),
            placements: self.state.placements().to_vec(),
            records: vec![None; n],
            initial_count: n,
            terminal: source.terminal,
            wall_seconds: None,
        }
    }
}

/// Removes `⌈fraction · N⌉` bricks, one at a time, each drawn uniformly from
/// the bricks whose removal keeps the structure connected.
pub fn make_partial<R: Rng + ?Sized>(
    episode: &Episode,
    fraction: f64,
    rng: &mut R,
) -> Result<Partial> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!("fraction {fraction} outside [0, 1)")));
    }
    let n = episode.len();
    let quota = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if n == 0 || quota >= n {
        return Err(Error::Config(format!(
            "removing {quota} of {n} bricks leaves nothing"
        )));
    }
    let mut kept: Vec<Placement> = episode.placements.clone();
    let mut removed = 0;
    while removed < quota {
        let candidates: Vec<usize> = (0..kept.len())
            .filter(|&i| {
                let rest: Vec<&Placement> = kept
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, p)| p)
                    .collect();
                is_connected(&rest)
            })
            .collect();
        if candidates.is_empty() {
            break;
        }
        let pick = candidates[rng.random_range(0..candidates.len())];
        kept.remove(pick);
        removed += 1;
    }
    let ordered = connected_order(kept);
    Ok(Partial {
        state: AssemblyState::from_placements(episode.config.dims, ordered)?,
        removed,
        complete: removed == quota,
    })
}

/// Reorders placements so that every prefix is connected, keeping the
/// original order wherever it already is. Steps are renumbered.
pub fn connected_order(placements: Vec<Placement>) -> Vec<Placement> {
    let mut remaining = placements;
    let mut out: Vec<Placement> = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let next = remaining
            .iter()
            .position(|p| out.iter().any(|q| p.is_connected_to(q)))
            .unwrap_or(0);
        out.push(remaining.remove(next));
    }
    for (i, p) in out.iter_mut().enumerate() {
        p.step = i;
    }
    out
}
