//! Python bindings: datasets, correlation statistics, hybrid selection,
//! classifiers, metrics, importance and the full pipeline.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use flowsieve::classifiers::{ClassifierModel, ClassifierSpec};
use flowsieve::evaluation::{self, ConfusionMatrix};
use flowsieve::explain::{self, ImportanceMode};
use flowsieve::hybridselect::{self, SelectionConfig, SelectionTrace};
use flowsieve::pipeline::{self, PipelineConfig};
use flowsieve::scaling::{self, ScalerParams};
use flowsieve::synth::{self as synthetic, SynthSpec};
use flowsieve::{stats, Dataset, Error};

create_exception!(
    _flowsieve,
    FlowsieveError,
    PyValueError,
    "Raised for any flowsieve failure."
);

fn err(e: Error) -> PyErr {
    FlowsieveError::new_err(e.to_string())
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for flowsieve::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

/// Keyword arguments as a JSON object, via the standard `json` module.
fn kwargs_json(py: Python<'_>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<serde_json::Value> {
    match kwargs {
        None => Ok(serde_json::json!({})),
        Some(d) => {
            let text: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
            serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
        }
    }
}

/// Labelled feature matrix. Labels are 0 (benign) or 1 (attack).
#[pyclass(name = "Dataset", module = "flowsieve")]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// `rows` is a list of equal-length feature rows.
    #[new]
    fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>, y: Vec<u8>) -> PyResult<Self> {
        let p = feature_names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(PyValueError::new_err(format!(
                "row {bad} has {} values, expected {p}",
                rows[bad].len()
            )));
        }
        let x = rows.into_iter().flatten().collect();
        Ok(PyDataset {
            inner: Dataset::new(feature_names, x, y).py()?,
        })
    }

    /// Reads flow CSVs with a named profile (`cic-ids2017`, `cic-iot2023`, `custom`).
    #[staticmethod]
    #[pyo3(signature = (paths, profile = "custom", label_column = None))]
    fn from_csv(paths: Vec<std::path::PathBuf>, profile: &str, label_column: Option<String>) -> PyResult<Self> {
        let cfg = PipelineConfig::from_json(
            &serde_json::json!({
                "inputs": paths,
                "profile": profile,
                "label_column": label_column,
                "seed": 0,
                "output_dir": ".",
            })
            .to_string(),
        )
        .py()?;
        let (inner, _) = flowsieve::flowdata::ingest(&cfg.inputs, &cfg.ingest_options().py()?).py()?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: Dataset::load(path).py()?,
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save(path).py()
    }

    #[pyo3(signature = (path, label_column = "label"))]
    fn to_csv(&self, path: std::path::PathBuf, label_column: &str) -> PyResult<()> {
        self.inner.write_csv(path, label_column).py()
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    #[getter]
    fn y(&self) -> Vec<u8> {
        self.inner.y().to_vec()
    }

    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        let j = self
            .inner
            .feature_index(name)
            .ok_or_else(|| PyValueError::new_err(format!("no feature `{name}`")))?;
        Ok(self.inner.column(j))
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.n_rows() {
            return Err(pyo3::exceptions::PyIndexError::new_err(i));
        }
        Ok(self.inner.row(i).to_vec())
    }

    fn class_counts(&self) -> (usize, usize) {
        let [a, b] = self.inner.class_counts();
        (a, b)
    }

    /// Keeps the named features, in the given order.
    fn select_features(&self, names: Vec<String>) -> PyResult<Self> {
        Ok(PyDataset {
            inner: self.inner.select_features(&names).py()?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn __repr__(&self) -> String {
        let [neg, pos] = self.inner.class_counts();
        format!(
            "Dataset(rows={}, features={}, benign={neg}, attack={pos})",
            self.inner.n_rows(),
            self.inner.n_features()
        )
    }
}

/// Per-feature z-score parameters.
#[pyclass(name = "Scaler", module = "flowsieve")]
struct PyScaler {
    inner: ScalerParams,
}

#[pymethods]
impl PyScaler {
    fn transform(&self, d: &PyDataset) -> PyResult<PyDataset> {
        Ok(PyDataset {
            inner: self.inner.transform(&d.inner).py()?,
        })
    }

    fn means(&self) -> Vec<f64> {
        (0..self.inner.feature_names().len())
            .map(|j| self.inner.mean(j))
            .collect()
    }

    fn stds(&self) -> Vec<f64> {
        (0..self.inner.feature_names().len())
            .map(|j| self.inner.std(j))
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py()
    }
}

#[pyfunction]
fn fit_scaler(d: &PyDataset) -> PyResult<PyScaler> {
    Ok(PyScaler {
        inner: scaling::fit_scaler(&d.inner).py()?,
    })
}

type StatRow = (String, Option<f64>, Option<f64>, Option<f64>, f64);

/// Outcome of hybrid selection: the six feature sets plus every statistic.
#[pyclass(name = "SelectionTrace", module = "flowsieve")]
struct PyTrace {
    inner: SelectionTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn a1(&self) -> Vec<String> {
        self.inner.a1.clone()
    }
    #[getter]
    fn a2(&self) -> Vec<String> {
        self.inner.a2.clone()
    }
    #[getter]
    fn a3(&self) -> Vec<String> {
        self.inner.a3.clone()
    }
    #[getter]
    fn a4(&self) -> Vec<String> {
        self.inner.a4.clone()
    }
    #[getter]
    fn a5(&self) -> Vec<String> {
        self.inner.a5.clone()
    }
    /// The selected features.
    #[getter]
    fn a6(&self) -> Vec<String> {
        self.inner.a6.clone()
    }

    /// `[(feature, pearson, spearman, kendall, info_gain)]`; undefined correlations are `None`.
    fn statistics(&self) -> Vec<StatRow> {
        self.inner
            .table
            .features
            .iter()
            .map(|f| (f.feature.clone(), f.pearson, f.spearman, f.kendall, f.info_gain))
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyTrace {
            inner: SelectionTrace::from_json(text).py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!("SelectionTrace(selected={:?})", self.inner.a6)
    }
}

/// Hybrid selection. Keyword arguments override the selection settings
/// (`bins`, `inclusive_positive`, `inclusive_negative`, `ig_strict`, `rank_mean_scope`).
#[pyfunction]
#[pyo3(signature = (d, **settings))]
fn select(py: Python<'_>, d: &PyDataset, settings: Option<&Bound<'_, PyDict>>) -> PyResult<PyTrace> {
    let cfg: SelectionConfig =
        serde_json::from_value(kwargs_json(py, settings)?).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(PyTrace {
        inner: hybridselect::select(&d.inner, &cfg).py()?,
    })
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<Option<f64>> {
    stats::pearson(&x, &y).py()
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<Option<f64>> {
    stats::spearman(&x, &y).py()
}

#[pyfunction]
fn kendall_tau_b(x: Vec<f64>, y: Vec<f64>) -> PyResult<Option<f64>> {
    stats::kendall_tau_b(&x, &y).py()
}

#[pyfunction]
#[pyo3(signature = (x, y, bins = 10))]
fn information_gain(x: Vec<f64>, y: Vec<u8>, bins: usize) -> PyResult<f64> {
    stats::information_gain(&x, &y, bins).py()
}

/// Gaussian blobs. Returns `(dataset, informative_names, noise_names)`.
#[pyfunction]
#[pyo3(signature = (rows = 1000, informative = 3, noise = 5, imbalance = 0.5, separation = 6.0, label_noise = 0.0, seed = 42))]
fn synth(
    rows: usize,
    informative: usize,
    noise: usize,
    imbalance: f64,
    separation: f64,
    label_noise: f64,
    seed: u64,
) -> PyResult<(PyDataset, Vec<String>, Vec<String>)> {
    let out = synthetic::generate(&SynthSpec {
        n_rows: rows,
        n_informative: informative,
        n_noise: noise,
        imbalance,
        label_noise,
        separation,
        seed,
    })
    .py()?;
    Ok((PyDataset { inner: out.dataset }, out.informative, out.noise))
}

/// A trained classifier.
#[pyclass(name = "Model", module = "flowsieve")]
struct PyModel {
    inner: ClassifierModel,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    /// Returns `(labels, class-1 scores)`.
    fn predict(&self, d: &PyDataset) -> PyResult<(Vec<u8>, Vec<f64>)> {
        let p = self.inner.predict(&d.inner).py()?;
        Ok((p.labels, p.scores))
    }

    fn predict_rows(&self, rows: Vec<Vec<f64>>) -> PyResult<(Vec<u8>, Vec<f64>)> {
        let p = self.inner.n_features();
        let x: Vec<f64> = rows.into_iter().flatten().collect();
        let pred = self.inner.predict_matrix(&x, p).py()?;
        Ok((pred.labels, pred.scores))
    }

    /// `[(feature, importance, normalized)]`, most important first.
    #[pyo3(signature = (feature_names, mode = "gain"))]
    fn feature_importance(&self, feature_names: Vec<String>, mode: &str) -> PyResult<Vec<(String, f64, f64)>> {
        let mode: ImportanceMode = mode.parse().py()?;
        let r = explain::feature_importance(&self.inner, &feature_names, mode).py()?;
        Ok(r.ranking
            .into_iter()
            .map(|e| (e.feature, e.importance, e.normalized))
            .collect())
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModel {
            inner: ClassifierModel::from_json(text).py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(kind={}, features={})",
            self.inner.kind(),
            self.inner.n_features()
        )
    }
}

fn spec_from(py: Python<'_>, kind: &str, seed: u64, params: Option<&Bound<'_, PyDict>>) -> PyResult<ClassifierSpec> {
    let mut v = kwargs_json(py, params)?;
    v["kind"] = kind.into();
    let spec: ClassifierSpec =
        serde_json::from_value(v).map_err(|e| FlowsieveError::new_err(format!("model `{kind}`: {e}")))?;
    Ok(spec.with_seed(seed))
}

/// Trains `kind` (tree, forest, gbdt, knn); keyword arguments are hyperparameters.
#[pyfunction]
#[pyo3(signature = (d, kind = "gbdt", seed = 0, **params))]
fn train(
    py: Python<'_>,
    d: &PyDataset,
    kind: &str,
    seed: u64,
    params: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyModel> {
    let spec = spec_from(py, kind, seed, params)?;
    let inner = py.detach(|| spec.train(&d.inner)).py()?;
    Ok(PyModel { inner })
}

/// Stratified split; returns `(train, test)`.
#[pyfunction]
#[pyo3(signature = (d, test_fraction = 0.3, seed = 0))]
fn stratified_split(d: &PyDataset, test_fraction: f64, seed: u64) -> PyResult<(PyDataset, PyDataset)> {
    let (a, b) = evaluation::stratified_split(&d.inner, test_fraction, seed).py()?;
    Ok((PyDataset { inner: a }, PyDataset { inner: b }))
}

/// Fold accuracies of stratified k-fold cross-validation.
#[pyfunction]
#[pyo3(signature = (d, k = 5, kind = "gbdt", seed = 0, **params))]
fn kfold_cv(
    py: Python<'_>,
    d: &PyDataset,
    k: usize,
    kind: &str,
    seed: u64,
    params: Option<&Bound<'_, PyDict>>,
) -> PyResult<Vec<f64>> {
    let spec = spec_from(py, kind, seed, params)?;
    let report = py.detach(|| evaluation::kfold_cv(&d.inner, k, &spec, seed)).py()?;
    Ok(report.fold_accuracies)
}

fn metrics_dict<'py>(py: Python<'py>, cm: &ConfusionMatrix) -> PyResult<Bound<'py, PyDict>> {
    let m = evaluation::metrics(cm).py()?;
    let v = serde_json::to_value(&m).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let json = py.import("json")?;
    let out = json.call_method1("loads", (v.to_string(),))?.cast_into::<PyDict>()?;
    for (k, n) in [("tp", cm.tp), ("tn", cm.tn), ("fp", cm.fp), ("fn", cm.fn_)] {
        out.set_item(k, n)?;
    }
    Ok(out)
}

/// Accuracy, attack-class and support-weighted precision / recall / F1.
#[pyfunction]
fn metrics<'py>(py: Python<'py>, predicted: Vec<u8>, actual: Vec<u8>) -> PyResult<Bound<'py, PyDict>> {
    let cm = evaluation::confusion(&predicted, &actual).py()?;
    metrics_dict(py, &cm)
}

#[pyfunction]
fn metrics_from_counts<'py>(py: Python<'py>, tp: u64, tn: u64, fp: u64, fn_: u64) -> PyResult<Bound<'py, PyDict>> {
    metrics_dict(py, &ConfusionMatrix { tp, tn, fp, fn_ })
}

/// Runs the whole pipeline from a JSON configuration; returns a summary dict.
#[pyfunction]
fn run_pipeline<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = PipelineConfig::from_json(config_json).py()?;
    let o = py.detach(|| pipeline::run_pipeline(&cfg)).py()?;
    let out = PyDict::new(py);
    out.set_item("config_hash", &o.config_hash)?;
    out.set_item("selected", o.trace.a6.clone())?;
    out.set_item("accuracy", o.eval.metrics.accuracy)?;
    out.set_item("f1_weighted", o.eval.metrics.f1_weighted)?;
    out.set_item(
        "artifacts",
        o.artifacts.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    )?;
    Ok(out)
}

#[pymodule]
fn _flowsieve(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FlowsieveError", m.py().get_type::<FlowsieveError>())?;
    m.add("SCHEMA_VERSION", flowsieve::SCHEMA_VERSION)?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyScaler>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyModel>()?;
    for f in [
        wrap_pyfunction!(fit_scaler, m)?,
        wrap_pyfunction!(select, m)?,
        wrap_pyfunction!(pearson, m)?,
        wrap_pyfunction!(spearman, m)?,
        wrap_pyfunction!(kendall_tau_b, m)?,
        wrap_pyfunction!(information_gain, m)?,
        wrap_pyfunction!(synth, m)?,
        wrap_pyfunction!(train, m)?,
        wrap_pyfunction!(stratified_split, m)?,
        wrap_pyfunction!(kfold_cv, m)?,
        wrap_pyfunction!(metrics, m)?,
        wrap_pyfunction!(metrics_from_counts, m)?,
        wrap_pyfunction!(run_pipeline, m)?,
    ] {
        m.add_function(f)?;
    }
    Ok(())
}
