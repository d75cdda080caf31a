//! Python bindings: dataset generation, trajectory recording, scoring,
//! selection, and evaluation.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use foqus_core::config::{load_config, ArchKind, ModelConfig, TrainSection};
use foqus_core::dataset::{self, DatasetSpec, ModulationClass, Split};
use foqus_core::dynamics::{self, TrajectoryStore};
use foqus_core::eval;
use foqus_core::nn::{ModelSpec, TrainConfig};
use foqus_core::scoring::{self, ScoreTable};
use foqus_core::selection::{self, Method, SelectionConfig};

fn py_err(e: foqus_core::Error) -> PyErr {
    match e {
        foqus_core::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn model_spec(arch: &str, frame_len: usize, num_classes: usize) -> PyResult<ModelSpec> {
    let kind = match arch {
        "mlp" => ArchKind::Mlp,
        "cnn1d" => ArchKind::Cnn1d,
        other => return Err(PyValueError::new_err(format!("unknown architecture `{other}`"))),
    };
    ModelConfig::of(kind).resolve(frame_len, num_classes).map_err(py_err)
}

fn train_config(epochs: usize, seed: u64) -> TrainConfig {
    TrainSection {
        epochs,
        ..TrainSection::default()
    }
    .with_seed(seed)
}

/// A labeled I/Q dataset with train and test splits.
#[pyclass(name = "Dataset", frozen)]
pub struct PyDataset {
    inner: dataset::Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: dataset::read_dataset(&path).map_err(py_err)?,
        })
    }

    #[pyo3(signature = (path, force = false))]
    fn write(&self, path: PathBuf, force: bool) -> PyResult<()> {
        dataset::write_dataset(&path, &self.inner, force).map_err(py_err)
    }

    #[getter]
    fn frame_len(&self) -> usize {
        self.inner.frame_len
    }

    #[getter]
    fn classes(&self) -> Vec<&'static str> {
        self.inner.classes.iter().map(|c| c.name()).collect()
    }

    fn train_ids(&self) -> Vec<u64> {
        self.inner.train().map(|f| f.sample_id).collect()
    }

    fn test_ids(&self) -> Vec<u64> {
        self.inner.test().map(|f| f.sample_id).collect()
    }

    /// (i, q, label, snr_db) of one frame.
    fn frame(&self, sample_id: u64) -> PyResult<(Vec<f32>, Vec<f32>, usize, i32)> {
        let f = self
            .inner
            .frames
            .iter()
            .find(|f| f.sample_id == sample_id)
            .ok_or_else(|| PyValueError::new_err(format!("no sample {sample_id}")))?;
        Ok((f.i.clone(), f.q.clone(), f.label, f.snr_db))
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn __len__(&self) -> usize {
        self.inner.frames.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(train={}, test={}, classes={}, L={})",
            self.inner.count(Split::Train),
            self.inner.count(Split::Test),
            self.inner.num_classes(),
            self.inner.frame_len
        )
    }
}

/// Per-sample correctness bits and losses from one training run.
#[pyclass(name = "Trajectories", frozen)]
pub struct PyTrajectories {
    inner: TrajectoryStore,
}

#[pymethods]
impl PyTrajectories {
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(PyTrajectories {
            inner: dynamics::read_store(&path).map_err(py_err)?,
        })
    }

    #[pyo3(signature = (path, force = false))]
    fn write(&self, path: PathBuf, force: bool) -> PyResult<()> {
        dynamics::write_store(&path, &self.inner, force).map_err(py_err)
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.meta.epochs
    }

    fn accuracy_per_epoch(&self) -> Vec<f64> {
        self.inner.accuracy_per_epoch()
    }

    fn correctness(&self, sample_id: u64) -> PyResult<Vec<bool>> {
        self.inner
            .records
            .iter()
            .find(|r| r.sample_id == sample_id)
            .map(|r| r.correctness.clone())
            .ok_or_else(|| PyValueError::new_err(format!("no sample {sample_id}")))
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Score table: one row per training sample, ordered by sample id.
#[pyclass(name = "Scores", frozen)]
pub struct PyScores {
    inner: ScoreTable,
}

#[pymethods]
impl PyScores {
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(PyScores {
            inner: scoring::read_scores(&path).map_err(py_err)?,
        })
    }

    #[pyo3(signature = (path, force = false))]
    fn write(&self, path: PathBuf, force: bool) -> PyResult<()> {
        scoring::write_scores(&path, &self.inner, force).map_err(py_err)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.meta.beta
    }

    fn sample_ids(&self) -> Vec<u64> {
        self.inner.rows.iter().map(|r| r.sample_id).collect()
    }

    fn foqus(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.s_foqus).collect()
    }

    /// All fields of one row as a dict.
    fn row(&self, index: usize) -> PyResult<HashMap<&'static str, f64>> {
        let r = self
            .inner
            .rows
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("row {index} out of range")))?;
        Ok(HashMap::from([
            ("sample_id", r.sample_id as f64),
            ("label", r.label as f64),
            ("snr_db", r.snr_db as f64),
            ("s_forget", r.s_forget as f64),
            ("s_persist", r.s_persist as f64),
            ("l_accum", r.l_accum),
            ("l_count", r.l_count as f64),
            ("s_quality", r.s_quality),
            ("s_foqus", r.s_foqus),
            ("entropy", r.aux.entropy),
            ("margin", r.aux.margin),
            ("confidence", r.aux.confidence),
            ("grand", r.aux.grand),
        ]))
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }
}

#[pyfunction]
#[pyo3(signature = (frames_per_class = 200, frame_len = 128, snr_db = vec![18], classes = None, seed = 0))]
fn generate_dataset(
    frames_per_class: usize,
    frame_len: usize,
    snr_db: Vec<i32>,
    classes: Option<Vec<String>>,
    seed: u64,
) -> PyResult<PyDataset> {
    let classes = match classes {
        Some(names) => names
            .iter()
            .map(|n| n.parse::<ModulationClass>())
            .collect::<foqus_core::Result<Vec<_>>>()
            .map_err(py_err)?,
        None => ModulationClass::ALL.to_vec(),
    };
    let spec = DatasetSpec {
        classes,
        snr_grid_db: snr_db,
        frames_per_class_per_snr: frames_per_class,
        frame_len,
        base_seed: seed,
        ..DatasetSpec::default()
    };
    Ok(PyDataset {
        inner: dataset::generate_dataset(&spec).map_err(py_err)?,
    })
}

/// Trains `arch` on the train split and records per-epoch dynamics.
#[pyfunction]
#[pyo3(signature = (data, arch = "mlp", epochs = 20, seed = 0))]
fn record(data: &PyDataset, arch: &str, epochs: usize, seed: u64) -> PyResult<PyTrajectories> {
    let ds = &data.inner;
    let spec = model_spec(arch, ds.frame_len, ds.num_classes())?;
    Ok(PyTrajectories {
        inner: dynamics::record_training(ds, &spec, &train_config(epochs, seed)).map_err(py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (traj, beta = scoring::DEFAULT_BETA))]
fn score(traj: &PyTrajectories, beta: f64) -> PyResult<PyScores> {
    Ok(PyScores {
        inner: scoring::score_dataset(&traj.inner, Some(beta)).map_err(py_err)?,
    })
}

/// Selected sample ids, ascending.
#[pyfunction]
#[pyo3(signature = (scores, method, rate, seed = 0, tiers = None, traj = None, snr_stratified = false))]
fn select(
    scores: &PyScores,
    method: &str,
    rate: f64,
    seed: u64,
    tiers: Option<[f64; 3]>,
    traj: Option<&PyTrajectories>,
    snr_stratified: bool,
) -> PyResult<Vec<u64>> {
    let method: Method = method.parse().map_err(py_err)?;
    let cfg = SelectionConfig {
        tiers: tiers.unwrap_or(selection::EQUAL_TIERS),
        snr_stratified,
        ..SelectionConfig::new(method, rate, seed)
    };
    cfg.validate().map_err(py_err)?;
    let coreset = selection::select(&scores.inner, traj.map(|t| &t.inner), &cfg).map_err(py_err)?;
    Ok(coreset.indices)
}

/// Test accuracy after training a fresh model on `ids`.
#[pyfunction]
#[pyo3(signature = (data, ids, arch = "mlp", epochs = 50, seed = 0))]
fn train_and_eval(data: &PyDataset, ids: Vec<u64>, arch: &str, epochs: usize, seed: u64) -> PyResult<f64> {
    let ds = &data.inner;
    let spec = model_spec(arch, ds.frame_len, ds.num_classes())?;
    let out = eval::train_and_eval(ds, &ids, &spec, &train_config(epochs, seed)).map_err(py_err)?;
    Ok(out.accuracy)
}

#[pyfunction]
fn transition_scores(bits: Vec<bool>) -> PyResult<(usize, usize)> {
    scoring::transition_scores(&bits).map_err(py_err)
}

/// (l_accum, l_count, s_quality)
#[pyfunction]
#[pyo3(signature = (losses, bits, beta = scoring::DEFAULT_BETA))]
fn quality_score(losses: Vec<f64>, bits: Vec<bool>, beta: f64) -> PyResult<(f64, usize, f64)> {
    let q = scoring::quality_score(&losses, &bits, beta).map_err(py_err)?;
    Ok((q.l_accum, q.l_count, q.s_quality))
}

#[pyfunction]
fn foqus_score(s_forget: usize, s_persist: usize, s_quality: f64, epochs: usize) -> PyResult<f64> {
    scoring::foqus_score(s_forget, s_persist, s_quality, epochs).map_err(py_err)
}

#[pyfunction]
fn aux_metrics(probs: Vec<f64>, embedding: Vec<f64>, label: usize) -> PyResult<HashMap<&'static str, f64>> {
    let a = scoring::aux_metrics(&probs, &embedding, label).map_err(py_err)?;
    Ok(HashMap::from([
        ("entropy", a.entropy),
        ("margin", a.margin),
        ("confidence", a.confidence),
        ("grand", a.grand),
    ]))
}

/// Runs a configured experiment grid and returns the results CSV text.
#[pyfunction]
#[pyo3(signature = (config = "default"))]
fn run_experiment(config: &str) -> PyResult<String> {
    let cfg = load_config(config).map_err(py_err)?;
    let exp = eval::run_experiment(&cfg).map_err(py_err)?;
    Ok(exp.table.to_csv())
}

#[pyfunction]
fn methods() -> Vec<&'static str> {
    Method::ALL.iter().map(|m| m.name()).collect()
}

#[pymodule]
pub fn pyfoqus(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTrajectories>()?;
    m.add_class::<PyScores>()?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(record, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(train_and_eval, m)?)?;
    m.add_function(wrap_pyfunction!(transition_scores, m)?)?;
    m.add_function(wrap_pyfunction!(quality_score, m)?)?;
    m.add_function(wrap_pyfunction!(foqus_score, m)?)?;
    m.add_function(wrap_pyfunction!(aux_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(methods, m)?)?;
    m.add("DEFAULT_BETA", scoring::DEFAULT_BETA)?;
    Ok(())
}
