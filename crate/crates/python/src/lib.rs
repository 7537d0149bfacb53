//! Python bindings: voxel grids, brick shapes, episodes and the assembly,
//! sequence and evaluation entry points.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use brecs_core::assembler::init_generation;
use brecs_core::brick::attachable_offsets;
use brecs_core::conv;
use brecs_core::io::{episode as episode_io, ldraw, scoregrid, vox};
use brecs_core::{
    metrics, pipeline, run_episode, seeded_rng, AssemblyConfig, BrickLibrary, BrickShape,
    ConstantScorer, Error, FileScorer, GridDims, ScoreSource, TargetOracle, Toggles,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn dims_of(d: (usize, usize, usize)) -> PyResult<GridDims> {
    GridDims::new(d.0, d.1, d.2).map_err(py_err)
}

fn shape_of(tag: &str) -> PyResult<BrickShape> {
    tag.parse().map_err(py_err)
}

#[pyclass(name = "VoxelGrid", module = "brecs", eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyVoxelGrid {
    inner: brecs_core::VoxelGrid,
}

#[pymethods]
impl PyVoxelGrid {
    #[new]
    #[pyo3(signature = (dims, fill = false))]
    fn new(dims: (usize, usize, usize), fill: bool) -> PyResult<Self> {
        Ok(Self {
            inner: brecs_core::VoxelGrid::new(dims_of(dims)?, fill),
        })
    }

    /// Cells in x-fastest order.
    #[staticmethod]
    fn from_cells(dims: (usize, usize, usize), cells: Vec<bool>) -> PyResult<Self> {
        Ok(Self {
            inner: brecs_core::VoxelGrid::from_cells(dims_of(dims)?, cells).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: vox::read_vox(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        vox::write_vox(&path, &self.inner).map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        let d = self.inner.dims();
        (d.x, d.y, d.z)
    }

    fn get(&self, i: usize, j: usize, k: usize) -> PyResult<bool> {
        if !self
            .inner
            .dims()
            .contains(i as isize, j as isize, k as isize)
        {
            return Err(PyIndexError::new_err(format!(
                "({i}, {j}, {k}) outside grid"
            )));
        }
        Ok(self.inner.get(i, j, k))
    }

    fn set(&mut self, i: usize, j: usize, k: usize, value: bool) -> PyResult<()> {
        if !self
            .inner
            .dims()
            .contains(i as isize, j as isize, k as isize)
        {
            return Err(PyIndexError::new_err(format!(
                "({i}, {j}, {k}) outside grid"
            )));
        }
        self.inner.set(i, j, k, value);
        Ok(())
    }

    fn cells(&self) -> Vec<bool> {
        self.inner.cells().to_vec()
    }

    fn occupied(&self) -> usize {
        self.inner.occupied()
    }

    fn downscale(&self, factor: usize) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.downscale(factor).map_err(py_err)?,
        })
    }

    fn embed_centered(&self, dims: (usize, usize, usize)) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.embed_centered(dims_of(dims)?).map_err(py_err)?,
        })
    }

    fn to_rle(&self) -> String {
        vox::encode_vox(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "VoxelGrid({}, occupied={})",
            self.inner.dims(),
            self.inner.occupied()
        )
    }
}

#[pyclass(name = "Episode", module = "brecs", skip_from_py_object)]
#[derive(Clone)]
pub struct PyEpisode {
    inner: brecs_core::Episode,
}

#[pymethods]
impl PyEpisode {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: episode_io::decode_episode(text).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        episode_io::encode_episode(&self.inner).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: episode_io::read_episode(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        episode_io::write_episode(&path, &self.inner).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(shape tag, (i, j, k), step)` per brick, in placement order.
    fn placements(&self) -> Vec<(String, (usize, usize, usize), usize)> {
        self.inner
            .placements
            .iter()
            .map(|p| (p.shape.tag(), (p.at[0], p.at[1], p.at[2]), p.step))
            .collect()
    }

    #[getter]
    fn initial_count(&self) -> usize {
        self.inner.initial_count
    }

    #[getter]
    fn terminal_reason(&self) -> PyResult<String> {
        let v = serde_json::to_value(self.inner.terminal)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(v.as_str().unwrap_or_default().to_string())
    }

    /// Occupancy after the first `n` bricks (all of them by default).
    #[pyo3(signature = (n = None))]
    fn occupancy(&self, n: Option<usize>) -> PyVoxelGrid {
        let n = n.unwrap_or(self.inner.len()).min(self.inner.len());
        PyVoxelGrid {
            inner: self.inner.occupancy_after(n),
        }
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = metrics::validate_structure(&self.inner.placements, self.inner.config.dims)
            .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("valid", r.is_valid())?;
        d.set_item("overlap_ok", r.overlap_ok)?;
        d.set_item("connectivity_ok", r.connectivity_ok)?;
        d.set_item("vertical_ok", r.vertical_ok)?;
        Ok(d)
    }

    fn to_ldraw(&self) -> PyResult<String> {
        ldraw::export_ldraw(&self.inner).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Episode(bricks={}, dims={})",
            self.inner.len(),
            self.inner.config.dims
        )
    }
}

fn make_config(
    dims: GridDims,
    bricks: &str,
    budget: usize,
    seed: u64,
    tau: f64,
    validity_check: bool,
    sampling: bool,
) -> PyResult<AssemblyConfig> {
    let config = AssemblyConfig {
        dims,
        library: BrickLibrary::from_types(bricks).map_err(py_err)?,
        budget,
        phase_budget: None,
        tau,
        seed,
        toggles: Toggles {
            validity_check,
            pivot_sampling: sampling,
        },
    };
    config.validate().map_err(py_err)?;
    Ok(config)
}

/// Assembles from one centred brick. Scores come from `score_grid` when
/// given, otherwise every voxel scores 1.
#[pyfunction]
#[pyo3(signature = (size = 64, budget = 150, seed = 0, bricks = "2x4", tau = 0.0,
                    validity_check = true, sampling = true, score_grid = None))]
#[allow(clippy::too_many_arguments)]
fn generate(
    py: Python<'_>,
    size: usize,
    budget: usize,
    seed: u64,
    bricks: &str,
    tau: f64,
    validity_check: bool,
    sampling: bool,
    score_grid: Option<PathBuf>,
) -> PyResult<PyEpisode> {
    let scorer = score_grid
        .map(|p| FileScorer::load(&p))
        .transpose()
        .map_err(py_err)?;
    let dims = match &scorer {
        Some(s) => s.prediction().dims(),
        None => GridDims::cube(size).map_err(py_err)?,
    };
    let config = make_config(dims, bricks, budget, seed, tau, validity_check, sampling)?;
    let constant = ConstantScorer::new(1.0).map_err(py_err)?;
    let source: &dyn ScoreSource = match &scorer {
        Some(s) => s,
        None => &constant,
    };
    let ep = py
        .detach(|| {
            let mut rng = config.rng();
            let initial = init_generation(&config, &mut rng)?;
            run_episode(initial, source, &config, &mut rng)
        })
        .map_err(py_err)?;
    Ok(PyEpisode { inner: ep })
}

/// Continues `partial` towards `target`, using the target as the score source.
#[pyfunction]
#[pyo3(signature = (target, partial, budget = 150, seed = 0, bricks = "2x4", tau = 0.0))]
fn complete(
    py: Python<'_>,
    target: &PyVoxelGrid,
    partial: &PyEpisode,
    budget: usize,
    seed: u64,
    bricks: &str,
    tau: f64,
) -> PyResult<PyEpisode> {
    let dims = target.inner.dims();
    if partial.inner.config.dims != dims {
        return Err(py_err(Error::DimsMismatch {
            expected: dims,
            found: partial.inner.config.dims,
        }));
    }
    let config = make_config(dims, bricks, budget, seed, tau, true, true)?;
    let oracle = TargetOracle::new(target.inner.clone());
    let ep = py
        .detach(|| {
            let state = partial.inner.final_state()?;
            run_episode(state, &oracle, &config, &mut config.rng())
        })
        .map_err(py_err)?;
    Ok(PyEpisode { inner: ep })
}

/// Ground-truth assembly sequence for a target shape.
#[pyfunction]
#[pyo3(signature = (target, budget = 150, seed = 0, bricks = "2x4", tau = 0.0))]
fn generate_sequence(
    py: Python<'_>,
    target: &PyVoxelGrid,
    budget: usize,
    seed: u64,
    bricks: &str,
    tau: f64,
) -> PyResult<PyEpisode> {
    let config = make_config(target.inner.dims(), bricks, budget, seed, tau, true, true)?;
    let ep = py
        .detach(|| pipeline::generate_sequence(&target.inner, &config, &mut config.rng()))
        .map_err(py_err)?;
    Ok(PyEpisode { inner: ep })
}

/// All `(t, input, target)` pairs `k` steps apart.
#[pyfunction]
fn sliding_pairs(episode: &PyEpisode, k: usize) -> Vec<(usize, PyVoxelGrid, PyVoxelGrid)> {
    pipeline::sliding_pairs("", &episode.inner, k)
        .into_iter()
        .map(|p| {
            (
                p.t,
                PyVoxelGrid { inner: p.input },
                PyVoxelGrid { inner: p.target },
            )
        })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (episode, fraction = 0.5, seed = 0))]
fn make_partial(episode: &PyEpisode, fraction: f64, seed: u64) -> PyResult<PyEpisode> {
    let part =
        pipeline::make_partial(&episode.inner, fraction, &mut seeded_rng(seed)).map_err(py_err)?;
    Ok(PyEpisode {
        inner: part.into_episode(&episode.inner),
    })
}

#[pyfunction]
fn iou(a: &PyVoxelGrid, b: &PyVoxelGrid) -> PyResult<f64> {
    metrics::iou(&a.inner, &b.inner).map_err(py_err)
}

/// Relative offsets `(x, y, z)` at which `new` attaches to `pivot`.
#[pyfunction]
fn attachable(new: &str, pivot: &str) -> PyResult<Vec<(isize, isize, isize)>> {
    Ok(attachable_offsets(shape_of(new)?, shape_of(pivot)?)
        .into_iter()
        .map(|o| (o.x, o.y, o.z))
        .collect())
}

/// Masked placement scores for `shape`, x-fastest.
#[pyfunction]
fn masked_scores(occupancy: &PyVoxelGrid, prediction: Vec<f64>, shape: &str) -> PyResult<Vec<f64>> {
    let pred =
        brecs_core::ScoreGrid::from_values(occupancy.inner.dims(), prediction).map_err(py_err)?;
    let c = conv::masked_scores(&occupancy.inner, &pred, shape_of(shape)?).map_err(py_err)?;
    Ok(c.values().to_vec())
}

/// Writes a prediction grid in the binary score-grid format.
#[pyfunction]
fn write_score_grid(path: PathBuf, dims: (usize, usize, usize), values: Vec<f64>) -> PyResult<()> {
    let grid = brecs_core::ScoreGrid::from_values(dims_of(dims)?, values).map_err(py_err)?;
    scoregrid::write_score_grid(&path, &grid).map_err(py_err)
}

#[pymodule]
fn brecs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVoxelGrid>()?;
    m.add_class::<PyEpisode>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(complete, m)?)?;
    m.add_function(wrap_pyfunction!(generate_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(sliding_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(make_partial, m)?)?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(attachable, m)?)?;
    m.add_function(wrap_pyfunction!(masked_scores, m)?)?;
    m.add_function(wrap_pyfunction!(write_score_grid, m)?)?;
    Ok(())
}
