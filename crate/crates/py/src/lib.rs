//! Python bindings. Option structs cross the boundary as plain dicts with
//! the same keys as the JSON config sections of the command-line tool.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use bsg_core::belief::{self, BeliefSceneGraph, BsgOptions, ShareBase};
use bsg_core::ceci::{self, checkpoint, CeciModel, TrainConfig, TrainLog};
use bsg_core::dataset::{self, DatasetSample, Split, SynthConfig};
use bsg_core::error::{BeliefError, Error, ModelError, SearchError};
use bsg_core::metrics::{self, BeliefSource, Grouping, MeanBeliefs, OracleBeliefs};
use bsg_core::search::{batch_eval, BatchConfig};
use bsg_core::{ClassCatalog, NodeId};
use pyo3::create_exception;
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(bsg, BsgError, PyRuntimeError, "Raised for invalid input or failed operations.");
create_exception!(bsg, NumericError, BsgError, "Raised when training diverges or produces non-finite values.");

fn numeric(e: &ModelError) -> bool {
    matches!(e, ModelError::Diverged { .. } | ModelError::NonFinite { .. })
}

fn to_py_err(e: Error) -> PyErr {
    let is_numeric = match &e {
        Error::Model(m) | Error::Belief(BeliefError::Model(m)) | Error::Search(SearchError::Model(m)) => numeric(m),
        _ => false,
    };
    if is_numeric {
        NumericError::new_err(e.to_string())
    } else {
        BsgError::new_err(e.to_string())
    }
}

trait OrRaise<T> {
    fn or_raise(self) -> PyResult<T>;
}

impl<T, E: Into<Error>> OrRaise<T> for Result<T, E> {
    fn or_raise(self) -> PyResult<T> {
        self.map_err(|e| to_py_err(e.into()))
    }
}

/// Deserializes an optional dict through JSON so unknown keys are rejected.
fn from_py<T: DeserializeOwned + Default>(py: Python<'_>, obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    let Some(obj) = obj.filter(|o| !o.is_none()) else {
        return Ok(T::default());
    };
    let text: String = PyModule::import(py, "json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

fn json_bytes_to_py<'py>(py: Python<'py>, bytes: &[u8]) -> PyResult<Bound<'py, PyAny>> {
    let text = std::str::from_utf8(bytes).map_err(|e| PyValueError::new_err(e.to_string()))?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

fn utf8(bytes: Vec<u8>) -> PyResult<String> {
    String::from_utf8(bytes).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "Catalog", module = "bsg", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCatalog {
    inner: Arc<ClassCatalog>,
}

#[pymethods]
impl PyCatalog {
    /// The built-in catalog when `labels` is omitted.
    #[new]
    #[pyo3(signature = (labels=None))]
    fn new(labels: Option<Vec<String>>) -> PyResult<Self> {
        let inner = match labels {
            None => ClassCatalog::default_catalog(),
            Some(l) => ClassCatalog::new(l).or_raise()?,
        };
        Ok(Self { inner: Arc::new(inner) })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(ClassCatalog::from_file(path).or_raise()?),
        })
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint_hex()
    }

    fn index_of(&self, label: &str) -> Option<usize> {
        self.inner.index_of(label)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Catalog({} classes)", self.inner.len())
    }
}

fn catalog_or_default(catalog: Option<&PyCatalog>) -> Arc<ClassCatalog> {
    catalog.map_or_else(|| Arc::new(ClassCatalog::default_catalog()), |c| c.inner.clone())
}

#[pyclass(name = "SceneGraph", module = "bsg", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySceneGraph {
    inner: bsg_core::SceneGraph,
}

#[pymethods]
impl PySceneGraph {
    #[staticmethod]
    #[pyo3(signature = (text, catalog=None))]
    fn from_json(text: &str, catalog: Option<&PyCatalog>) -> PyResult<Self> {
        let inner =
            bsg_core::SceneGraph::from_json_with_catalog(text.as_bytes(), catalog.map(|c| &c.inner)).or_raise()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, catalog=None))]
    fn load(path: PathBuf, catalog: Option<&PyCatalog>) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| BsgError::new_err(format!("{}: {e}", path.display())))?;
        let inner = bsg_core::SceneGraph::from_json_with_catalog(&bytes, catalog.map(|c| &c.inner)).or_raise()?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write(path).or_raise()
    }

    fn to_json(&self) -> PyResult<String> {
        utf8(self.inner.to_json().or_raise()?)
    }

    #[getter]
    fn catalog(&self) -> PyCatalog {
        PyCatalog {
            inner: self.inner.catalog_arc().clone(),
        }
    }

    fn room_ids(&self) -> Vec<String> {
        self.inner.room_ids().iter().map(|r| r.as_str().to_owned()).collect()
    }

    #[getter]
    fn object_count(&self) -> usize {
        self.inner.object_count()
    }

    #[getter]
    fn blind_count(&self) -> usize {
        self.inner.blind_nodes().count()
    }

    /// Object counts per class below `node`.
    #[pyo3(signature = (node, include_blind=false))]
    fn histogram(&self, node: &str, include_blind: bool) -> PyResult<Vec<u64>> {
        Ok(self
            .inner
            .node_histogram(&NodeId::new(node), include_blind)
            .or_raise()?
            .counts()
            .to_vec())
    }

    /// Violated structural rules, one message each.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().violations.iter().map(|v| v.to_string()).collect()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "SceneGraph({} rooms, {} objects)",
            self.inner.room_ids().len(),
            self.inner.object_count()
        )
    }
}

#[pyclass(name = "Dataset", module = "bsg", frozen)]
struct PyDataset {
    split: Split<DatasetSample>,
    seed: u64,
    fraction: f64,
}

impl PyDataset {
    fn part(&self, name: &str) -> PyResult<&[DatasetSample]> {
        match name {
            "train" => Ok(&self.split.train),
            "val" => Ok(&self.split.val),
            "test" => Ok(&self.split.test),
            other => Err(PyValueError::new_err(format!("unknown split {other:?}"))),
        }
    }

    fn sample(&self, name: &str, index: usize) -> PyResult<&DatasetSample> {
        self.part(name)?
            .get(index)
            .ok_or_else(|| PyKeyError::new_err(format!("{name}[{index}]")))
    }
}

#[pymethods]
impl PyDataset {
    /// Seeded synthetic buildings split 80/10/10.
    #[staticmethod]
    #[pyo3(signature = (count, partials=4, fraction=0.5, seed=0, catalog=None, synth=None))]
    fn synthetic(
        py: Python<'_>,
        count: i64,
        partials: usize,
        fraction: f64,
        seed: u64,
        catalog: Option<&PyCatalog>,
        synth: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let mut config: SynthConfig = from_py(py, synth)?;
        config.seed = seed;
        let catalog = catalog_or_default(catalog);
        let split = py
            .detach(|| {
                let samples = dataset::synthetic_samples(&config, count, partials, fraction, &catalog)?;
                dataset::split(samples, seed)
            })
            .or_raise()?;
        Ok(Self { split, seed, fraction })
    }

    #[staticmethod]
    #[pyo3(signature = (path, catalog=None))]
    fn load(path: PathBuf, catalog: Option<&PyCatalog>) -> PyResult<Self> {
        let (manifest, split) = dataset::read_dataset(&path, &catalog_or_default(catalog)).or_raise()?;
        Ok(Self {
            split,
            seed: manifest.seed,
            fraction: manifest.fraction,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dataset::write_dataset(&path, &self.split, &[], self.seed, self.fraction).or_raise()?;
        Ok(())
    }

    fn ids(&self, split: &str) -> PyResult<Vec<String>> {
        Ok(self.part(split)?.iter().map(|s| s.source_id.clone()).collect())
    }

    fn sizes(&self) -> BTreeMap<&'static str, usize> {
        BTreeMap::from([
            ("train", self.split.train.len()),
            ("val", self.split.val.len()),
            ("test", self.split.test.len()),
        ])
    }

    fn ground_truth(&self, split: &str, index: usize) -> PyResult<PySceneGraph> {
        Ok(PySceneGraph {
            inner: self.sample(split, index)?.ground_truth.clone(),
        })
    }

    #[pyo3(signature = (split, index, k=0))]
    fn partial(&self, split: &str, index: usize, k: usize) -> PyResult<PySceneGraph> {
        let s = self.sample(split, index)?;
        let inner = s
            .partials
            .get(k)
            .cloned()
            .ok_or_else(|| PyKeyError::new_err(format!("partial {k} of {}", s.source_id)))?;
        Ok(PySceneGraph { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(train={}, val={}, test={})",
            self.split.train.len(),
            self.split.val.len(),
            self.split.test.len()
        )
    }
}

#[pyclass(name = "Model", module = "bsg", frozen)]
struct PyModel {
    inner: CeciModel,
    log: Option<TrainLog>,
}

#[pymethods]
impl PyModel {
    /// Trains on the train split, selecting the epoch with the lowest
    /// validation MSE. `config` keys: epochs, batch_size, learning_rate,
    /// weight_decay, decay_mode, dropout, hidden, seed.
    #[staticmethod]
    #[pyo3(signature = (dataset, config=None))]
    fn train(py: Python<'_>, dataset: &PyDataset, config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let config: TrainConfig = from_py(py, config)?;
        let catalog = dataset
            .split
            .train
            .first()
            .map(|s| s.ground_truth.catalog_arc().clone())
            .ok_or_else(|| BsgError::new_err("training split is empty"))?;
        let (inner, log) = py
            .detach(|| -> Result<_, ModelError> {
                let tr = ceci::examples_from_samples(&dataset.split.train)?;
                let va = ceci::examples_from_samples(&dataset.split.val)?;
                ceci::train(&tr, &va, &catalog, &config)
            })
            .or_raise()?;
        Ok(Self { inner, log: Some(log) })
    }

    #[staticmethod]
    #[pyo3(signature = (path, catalog=None))]
    fn load(path: PathBuf, catalog: Option<&PyCatalog>) -> PyResult<Self> {
        let inner = match catalog {
            Some(c) => checkpoint::load_for(path, &c.inner),
            None => checkpoint::load(path),
        }
        .or_raise()?;
        Ok(Self { inner, log: None })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        checkpoint::save(&self.inner, path).or_raise()
    }

    /// Training history, or None for a loaded checkpoint.
    #[getter]
    fn log<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyAny>>> {
        self.log.as_ref().map(|l| to_py(py, l)).transpose()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint_hex()
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.parameter_count()
    }

    /// Predicted counts for each building and room of `graph`.
    fn predict(&self, graph: &PySceneGraph) -> PyResult<BTreeMap<String, Vec<f64>>> {
        let out = ceci::predict_histograms(&self.inner, &graph.inner, graph.inner.catalog()).or_raise()?;
        Ok(out.into_iter().map(|(k, v)| (k.as_str().to_owned(), v)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Model(hidden={}, classes={})", self.inner.hidden(), self.inner.classes())
    }
}

#[pyclass(name = "BeliefGraph", module = "bsg", frozen)]
struct PyBeliefGraph {
    inner: BeliefSceneGraph,
}

fn share_base(name: &str) -> PyResult<ShareBase> {
    serde_json::from_value(serde_json::Value::String(name.into())).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymethods]
impl PyBeliefGraph {
    #[staticmethod]
    #[pyo3(signature = (text, catalog=None))]
    fn from_json(text: &str, catalog: Option<&PyCatalog>) -> PyResult<Self> {
        Ok(Self {
            inner: BeliefSceneGraph::from_json(text.as_bytes(), catalog.map(|c| &c.inner)).or_raise()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        utf8(self.inner.to_json().or_raise()?)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write(path).or_raise()
    }

    /// The partial graph plus blind nodes.
    #[getter]
    fn graph(&self) -> PySceneGraph {
        PySceneGraph {
            inner: self.inner.graph().clone(),
        }
    }

    #[getter]
    fn blind_count(&self) -> usize {
        self.inner.blind_count()
    }

    fn strip_blind(&self) -> PySceneGraph {
        PySceneGraph {
            inner: self.inner.strip_blind(),
        }
    }

    fn beliefs(&self) -> BTreeMap<String, Vec<f64>> {
        self.inner
            .belief_counts()
            .into_iter()
            .map(|(k, v)| (k.as_str().to_owned(), v))
            .collect()
    }

    /// `(class, share_percent)` for the room's most expected unseen classes.
    #[pyo3(signature = (room, k=3, share_base="all_classes"))]
    fn top_k(&self, room: &str, k: usize, share_base: &str) -> PyResult<Vec<(String, f64)>> {
        let rows = self
            .inner
            .top_k_unseen(&NodeId::new(room), k, self::share_base(share_base)?)
            .or_raise()?;
        Ok(rows.into_iter().map(|r| (r.class, r.share)).collect())
    }
}

/// Adds blind nodes to `partial` from the model's predictions. `options`
/// keys: rounding, mode, share_base.
#[pyfunction]
#[pyo3(signature = (partial, model, options=None))]
fn build_bsg(
    py: Python<'_>,
    partial: &PySceneGraph,
    model: &PyModel,
    options: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyBeliefGraph> {
    let options: BsgOptions = from_py(py, options)?;
    Ok(PyBeliefGraph {
        inner: belief::build_bsg(&partial.inner, &model.inner, &options).or_raise()?,
    })
}

#[pyfunction]
fn wasserstein_1d(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    metrics::wasserstein_1d(&p, &q).or_raise()
}

#[pyfunction]
fn energy_distance(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    metrics::energy_distance_1d(&p, &q).or_raise()
}

fn belief_source(dataset: &PyDataset, source: &Bound<'_, PyAny>) -> PyResult<Box<dyn BeliefSource + Send + Sync>> {
    if let Ok(model) = source.cast::<PyModel>() {
        return Ok(Box::new(model.get().inner.clone()));
    }
    match source.extract::<String>()?.as_str() {
        "oracle" => Ok(Box::new(OracleBeliefs)),
        "mean" => Ok(Box::new(MeanBeliefs::fit(&dataset.split.train).or_raise()?)),
        other => Err(PyValueError::new_err(format!(
            "source must be a Model, \"oracle\" or \"mean\", not {other:?}"
        ))),
    }
}

/// Distribution distances and correlation structure on the test split.
#[pyfunction]
#[pyo3(signature = (dataset, source, grouping="pooled"))]
fn evaluate<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    source: &Bound<'py, PyAny>,
    grouping: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let grouping: Grouping = serde_json::from_value(serde_json::Value::String(grouping.into()))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let source = belief_source(dataset, source)?;
    let report = py
        .detach(|| metrics::evaluate(source.as_ref(), &dataset.split.test, grouping))
        .or_raise()?;
    json_bytes_to_py(py, &report.to_json())
}

/// Baseline versus belief-guided search on the test split. Returns the
/// report dict with an added `episodes` list.
#[pyfunction]
#[pyo3(signature = (dataset, model, config=None, max_graphs=None))]
fn search<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    model: &PyModel,
    config: Option<&Bound<'py, PyAny>>,
    max_graphs: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let config: BatchConfig = from_py(py, config)?;
    let graphs: Vec<(String, bsg_core::SceneGraph)> = dataset
        .split
        .test
        .iter()
        .take(max_graphs.unwrap_or(usize::MAX))
        .map(|s| (s.source_id.clone(), s.ground_truth.clone()))
        .collect();
    let report = py
        .detach(|| batch_eval(&graphs, &model.inner, &config))
        .or_raise()?;
    let out = json_bytes_to_py(py, &report.to_json())?;
    out.set_item("episodes", to_py(py, &report.episodes)?)?;
    Ok(out)
}

#[pymodule]
fn bsg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BsgError", m.py().get_type::<BsgError>())?;
    m.add("NumericError", m.py().get_type::<NumericError>())?;
    m.add_class::<PyCatalog>()?;
    m.add_class::<PySceneGraph>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyBeliefGraph>()?;
    m.add_function(wrap_pyfunction!(build_bsg, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein_1d, m)?)?;
    m.add_function(wrap_pyfunction!(energy_distance, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    Ok(())
}
