//! Python bindings: tensors, similarity reports, the metric primitives and
//! the pipeline stages.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ferbench::config::RunConfig;
use ferbench::eval::PerformanceTensor as CoreTensor;
use ferbench::labels::ExpressionLabel;
use ferbench::manifest::DatasetManifest as CoreManifest;
use ferbench::metrics::{build_similarity_report, render_local_global_table, Cell, SimilarityReport as CoreReport};
use ferbench::normalize::{ClassMap, SamplingStrategy};
use ferbench::pipeline::{self, Selection, Stage};
use ferbench::training::{EarlyStopping, StopDecision};

fn err(e: ferbench::Error) -> PyErr {
    match e {
        ferbench::Error::Config(_) | ferbench::Error::Precondition(_) | ferbench::Error::UndefinedScore(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Mean macro F1 per (architecture, train dataset, test dataset).
#[pyclass(name = "PerformanceTensor", from_py_object)]
#[derive(Clone, Default)]
struct PyTensor {
    inner: CoreTensor,
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        CoreTensor::from_csv_str(text, std::path::Path::new("<string>"))
            .map(|inner| PyTensor { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        CoreTensor::read_csv(&path).map(|inner| PyTensor { inner }).map_err(err)
    }

    fn insert(&mut self, architecture: &str, train: &str, test: &str, score: f64) -> PyResult<()> {
        if !(0.0..=1.0).contains(&score) {
            return Err(PyValueError::new_err(format!("score {score} is outside [0, 1]")));
        }
        self.inner.insert(architecture, train, test, score);
        Ok(())
    }

    fn get(&self, architecture: &str, train: &str, test: &str) -> Option<f64> {
        self.inner.get(architecture, train, test)
    }

    fn datasets(&self) -> Vec<String> {
        self.inner.datasets()
    }

    fn architectures(&self) -> Vec<String> {
        self.inner.architectures()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PerformanceTensor({} entries, {} datasets)",
            self.inner.len(),
            self.inner.datasets().len()
        )
    }
}

fn cell_py(c: Cell) -> Option<f64> {
    c.value()
}

fn cell_status(c: Cell) -> &'static str {
    match c {
        Cell::Value(_) => "value",
        Cell::Missing => "missing",
        Cell::Undefined => "undefined",
    }
}

/// CS, LS, GS and PS over a tensor. Accessors return None when a value is
/// missing or undefined; `status` tells which.
#[pyclass(name = "SimilarityReport", skip_from_py_object)]
struct PyReport {
    inner: CoreReport,
}

#[pymethods]
impl PyReport {
    #[new]
    fn new(tensor: &PyTensor) -> Self {
        PyReport {
            inner: build_similarity_report(&tensor.inner),
        }
    }

    #[getter]
    fn datasets(&self) -> Vec<String> {
        self.inner.datasets.clone()
    }

    #[getter]
    fn models(&self) -> Vec<String> {
        self.inner.models.clone()
    }

    fn cs(&self, d1: &str, d2: &str) -> Option<f64> {
        cell_py(self.inner.cs_of(d1, d2))
    }

    fn ls(&self, dataset: &str) -> Option<f64> {
        cell_py(self.inner.ls_of(dataset))
    }

    fn gs(&self, dataset: &str) -> Option<f64> {
        cell_py(self.inner.gs_of(dataset))
    }

    fn ps(&self, train: &str, test: &str) -> Option<f64> {
        cell_py(self.inner.ps_of(train, test))
    }

    /// "value", "missing" or "undefined" for a PS cell.
    fn ps_status(&self, train: &str, test: &str) -> &'static str {
        cell_status(self.inner.ps_of(train, test))
    }

    fn missing_pairs(&self) -> Vec<(String, String)> {
        self.inner.missing_pairs.clone()
    }

    fn local_global_table(&self) -> String {
        render_local_global_table(&self.inner)
    }

    fn paired_similarity_csv(&self) -> String {
        self.inner.paired_similarity_csv()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("report serializes")
    }
}

/// Dataset manifest read from a JSON-lines file.
#[pyclass(name = "DatasetManifest", skip_from_py_object)]
struct PyManifest {
    inner: CoreManifest,
}

#[pymethods]
impl PyManifest {
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        CoreManifest::read(&path).map(|inner| PyManifest { inner }).map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }

    fn included_count(&self) -> usize {
        self.inner.included().count()
    }

    /// Non-excluded samples per canonical label.
    fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in self.inner.included() {
            if let Some(l) = r.label {
                *out.entry(l.as_str().to_string()).or_default() += 1;
            }
        }
        out
    }

    fn exclusion_reasons(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.inner.samples {
            if let Some(reason) = &r.exclusion_reason {
                *out.entry(reason.clone()).or_default() += 1;
            }
        }
        out
    }

    fn validate(&self) -> Vec<String> {
        ferbench::manifest::validate_manifest(&self.inner)
            .iter()
            .map(|v| v.to_string())
            .collect()
    }
}

/// Macro F1 of a confusion matrix (rows truth, columns prediction).
#[pyfunction]
fn macro_f1(confusion: Vec<Vec<u64>>) -> PyResult<f64> {
    ferbench::eval::macro_f1(&confusion).map_err(err)
}

/// Frame indices kept from a clip of `frame_count` frames.
#[pyfunction]
fn sample_frames(frame_count: u32, strategy: &str) -> PyResult<Vec<u32>> {
    let strategy = match strategy {
        "uniform_five" => SamplingStrategy::UniformFive,
        "neutral_plus_apex" => SamplingStrategy::NeutralPlusApex,
        "passthrough" => SamplingStrategy::Passthrough,
        other => return Err(PyValueError::new_err(format!("unknown strategy `{other}`"))),
    };
    ferbench::normalize::sample_frames(frame_count, strategy, "<python>")
        .map(|f| f.into_iter().map(|s| s.index).collect())
        .map_err(err)
}

/// Canonical label for a raw label under the built-in class map, or None.
#[pyfunction]
#[pyo3(signature = (raw_label, dataset = "*"))]
fn unify_label(raw_label: &str, dataset: &str) -> Option<String> {
    ClassMap::standard()
        .unify(raw_label, dataset)
        .label()
        .map(|l: ExpressionLabel| l.as_str().to_string())
}

/// "stop" or "continue" for a validation-accuracy history.
#[pyfunction]
#[pyo3(signature = (history, min_delta = 0.01, patience = 5, max_epochs = 20))]
fn early_stop_decision(history: Vec<f64>, min_delta: f64, patience: usize, max_epochs: usize) -> &'static str {
    let rule = EarlyStopping {
        min_delta,
        patience,
        max_epochs,
    };
    match rule.decide(&history) {
        StopDecision::Stop => "stop",
        StopDecision::Continue => "continue",
    }
}

/// Writes the synthetic desk-scale datasets under `directory` plus a
/// `ferbench.toml` for them; returns the config path.
#[pyfunction]
#[pyo3(signature = (directory, seed = 0))]
fn write_synthetic_run(directory: PathBuf, seed: u64) -> PyResult<PathBuf> {
    let cfg = pipeline::synthetic_run(&directory, seed).map_err(err)?;
    let path = directory.join("ferbench.toml");
    ferbench::fsutil::write_string_atomic(&path, &cfg.to_toml()).map_err(err)?;
    Ok(path)
}

fn load(config: &PathBuf, jobs: Option<usize>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig::load(config).map_err(err)?;
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Runs one stage; returns its notes and planned jobs.
#[pyfunction]
#[pyo3(signature = (stage, config, datasets = Vec::new(), dry_run = false, jobs = None))]
fn run_stage(
    py: Python<'_>,
    stage: &str,
    config: PathBuf,
    datasets: Vec<String>,
    dry_run: bool,
    jobs: Option<usize>,
) -> PyResult<Vec<String>> {
    let stage: Stage = stage.parse().map_err(err)?;
    let cfg = load(&config, jobs)?;
    let sel = Selection {
        datasets,
        dry_run,
        ..Default::default()
    };
    let out = py.detach(|| pipeline::run_stage(stage, &cfg, &sel)).map_err(err)?;
    Ok(out.planned.into_iter().chain(out.notes).collect())
}

/// Runs every stage in order and returns the run's output directory.
#[pyfunction]
#[pyo3(signature = (config, jobs = None))]
fn run_all(py: Python<'_>, config: PathBuf, jobs: Option<usize>) -> PyResult<PathBuf> {
    let cfg = load(&config, jobs)?;
    py.detach(|| pipeline::run_all(&cfg, &Selection::default())).map_err(err)?;
    Ok(cfg.output_root)
}

#[pymodule]
fn ferbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyManifest>()?;
    m.add_function(wrap_pyfunction!(macro_f1, m)?)?;
    m.add_function(wrap_pyfunction!(sample_frames, m)?)?;
    m.add_function(wrap_pyfunction!(unify_label, m)?)?;
    m.add_function(wrap_pyfunction!(early_stop_decision, m)?)?;
    m.add_function(wrap_pyfunction!(write_synthetic_run, m)?)?;
    m.add_function(wrap_pyfunction!(run_stage, m)?)?;
    m.add_function(wrap_pyfunction!(run_all, m)?)?;
    m.add("STAGES", Stage::ALL.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
    Ok(())
}
