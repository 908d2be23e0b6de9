//! Python bindings: benchmarks, proximal operators, training runs and
//! checkpoint evaluation.

use std::path::PathBuf;

use prox_evi::benchmarks::{BenchmarkCase, LossVariant, PointSet, BENCHMARK_NAMES};
use prox_evi::cli::{eval_checkpoint, read_config, write_config, write_bundle, CONFIG_FILE};
use prox_evi::prox;
use prox_evi::trainer::{self, ErrorMetrics, RunConfig, RunOutcome};
use prox_evi::EviError;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(prox_evi_py, ProxEviError, PyException);

fn to_py(e: EviError) -> PyErr {
    match e {
        EviError::Argument(_) => PyValueError::new_err(e.to_string()),
        _ => ProxEviError::new_err(e.to_string()),
    }
}

fn parse_variant(s: &str) -> PyResult<LossVariant> {
    match s {
        "hard" => Ok(LossVariant::Hard),
        "soft" => Ok(LossVariant::Soft),
        "primal" => Ok(LossVariant::Primal),
        "shrink" => Ok(LossVariant::Shrink),
        _ => Err(PyValueError::new_err(format!("unknown loss variant {s:?}"))),
    }
}

fn rows(points: &PointSet) -> Vec<Vec<f64>> {
    points.iter().map(<[f64]>::to_vec).collect()
}

fn flatten(points: &[Vec<f64>], dim: usize) -> PyResult<Vec<f64>> {
    let mut flat = Vec::with_capacity(points.len() * dim);
    for p in points {
        if p.len() != dim {
            return Err(PyValueError::new_err(format!("expected points of dimension {dim}, got {}", p.len())));
        }
        flat.extend_from_slice(p);
    }
    Ok(flat)
}

fn errors_dict<'py>(py: Python<'py>, e: &ErrorMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("l2_rel", e.l2_rel)?;
    d.set_item("linf_rel", e.linf_rel)?;
    d.set_item("max_abs", e.max_abs)?;
    d.set_item("mean_rel", e.mean_rel)?;
    d.set_item("absolute", e.absolute)?;
    Ok(d)
}

/// Names of the built-in benchmarks.
#[pyfunction]
fn benchmarks() -> Vec<&'static str> {
    BENCHMARK_NAMES.to_vec()
}

/// A benchmark problem with its exact solution.
#[pyclass(name = "Benchmark", module = "prox_evi_py")]
struct PyBenchmark {
    case: BenchmarkCase,
}

#[pymethods]
impl PyBenchmark {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(Self {
            case: BenchmarkCase::from_name(name).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.case.label()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.case.dim()
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.case.eta
    }

    /// Exact solution at each point.
    fn exact_u(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        points.iter().map(|x| self.case.exact_u(x).map_err(to_py)).collect()
    }

    /// Uniform grid with `n` nodes per axis.
    fn grid(&self, n: usize) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.case.domain.grid(n).map_err(to_py)?))
    }

    /// The fixed test layout with `size` points.
    fn test_points(&self, size: usize) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.case.test_points(size).map_err(to_py)?))
    }

    fn __repr__(&self) -> String {
        format!("Benchmark({:?})", self.case.label())
    }
}

/// Projection of `w` onto `[psi, ∞)`.
#[pyfunction]
fn obstacle_clamp(w: f64, psi: f64) -> f64 {
    prox::obstacle_clamp(w, psi)
}

/// Scalar soft threshold `sign(w)·max(|w| − kappa, 0)`.
#[pyfunction]
fn soft_threshold(w: f64, kappa: f64) -> PyResult<f64> {
    prox::soft_threshold(w, kappa).map_err(to_py)
}

/// Projection onto the closed unit ball.
#[pyfunction]
fn unit_ball_project(q: Vec<f64>) -> Vec<f64> {
    prox::unit_ball_project(&q)
}

/// Vector shrinkage `w·max(1 − kappa/|w|, 0)`.
#[pyfunction]
fn vector_shrink(w: Vec<f64>, kappa: f64) -> PyResult<Vec<f64>> {
    prox::vector_shrink(&w, kappa).map_err(to_py)
}

/// Training configuration; starts from the benchmark defaults.
#[pyclass(name = "RunConfig", module = "prox_evi_py", from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[new]
    fn new(benchmark: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RunConfig::for_benchmark(benchmark).map_err(to_py)?,
        })
    }

    /// Reads a `config.json` written by a previous run.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: read_config(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_config(&self.inner, &path).map_err(to_py)
    }

    /// Raises `ValueError` if the configuration is inconsistent.
    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map(|_| ()).map_err(to_py)
    }

    #[getter]
    fn benchmark(&self) -> String {
        self.inner.benchmark.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.epochs
    }

    #[setter]
    fn set_epochs(&mut self, v: usize) {
        self.inner.epochs = v;
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[setter]
    fn set_eta(&mut self, v: f64) {
        self.inner.eta = v;
    }

    #[getter]
    fn lr(&self) -> f64 {
        self.inner.lr
    }

    #[setter]
    fn set_lr(&mut self, v: f64) {
        self.inner.lr = v;
    }

    #[getter]
    fn loss_variant(&self) -> String {
        self.inner.loss_variant.to_string()
    }

    #[setter]
    fn set_loss_variant(&mut self, v: &str) -> PyResult<()> {
        self.inner.loss_variant = parse_variant(v)?;
        Ok(())
    }

    #[getter]
    fn train_size(&self) -> usize {
        self.inner.train_size
    }

    #[setter]
    fn set_train_size(&mut self, v: usize) {
        self.inner.train_size = v;
    }

    #[getter]
    fn test_size(&self) -> usize {
        self.inner.test_size
    }

    #[setter]
    fn set_test_size(&mut self, v: usize) {
        self.inner.test_size = v;
    }

    #[getter]
    fn hidden_layers(&self) -> usize {
        self.inner.hidden_layers
    }

    #[setter]
    fn set_hidden_layers(&mut self, v: usize) {
        self.inner.hidden_layers = v;
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[setter]
    fn set_width(&mut self, v: usize) {
        self.inner.width = v;
    }

    #[getter]
    fn log_every(&self) -> usize {
        self.inner.log_every
    }

    #[setter]
    fn set_log_every(&mut self, v: usize) {
        self.inner.log_every = v;
    }

    #[getter]
    fn batch_size(&self) -> Option<usize> {
        self.inner.batch_size
    }

    #[setter]
    fn set_batch_size(&mut self, v: Option<usize>) {
        self.inner.batch_size = v;
    }

    #[getter]
    fn out_dir(&self) -> PathBuf {
        self.inner.out_dir.clone()
    }

    #[setter]
    fn set_out_dir(&mut self, v: PathBuf) {
        self.inner.out_dir = v;
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "RunConfig(benchmark={:?}, seed={}, epochs={}, eta={:e}, lr={:e}, loss_variant={:?})",
            c.benchmark, c.seed, c.epochs, c.eta, c.lr, c.loss_variant.to_string()
        )
    }
}

/// A finished training run.
#[pyclass(name = "RunResult", module = "prox_evi_py")]
struct PyRunResult {
    outcome: RunOutcome,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn config(&self) -> PyRunConfig {
        PyRunConfig {
            inner: self.outcome.config.clone(),
        }
    }

    /// Error norms on the test points.
    #[getter]
    fn errors<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        errors_dict(py, &self.outcome.errors)
    }

    /// `(epoch, loss, l2_rel, linf_rel)` rows.
    #[getter]
    fn log(&self) -> Vec<(usize, f64, f64, f64)> {
        self.outcome.log.records.iter().map(|r| (r.epoch, r.loss, r.l2_rel, r.linf_rel)).collect()
    }

    #[getter]
    fn diverged(&self) -> Option<(usize, String)> {
        self.outcome.diverged.clone()
    }

    #[getter]
    fn test_points(&self) -> Vec<Vec<f64>> {
        rows(&self.outcome.test_points)
    }

    #[getter]
    fn exact(&self) -> Vec<f64> {
        self.outcome.exact.clone()
    }

    #[getter]
    fn predicted(&self) -> Vec<f64> {
        self.outcome.predicted.clone()
    }

    /// Surrogate solution at arbitrary points.
    fn predict(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let cfg = &self.outcome.config;
        let case = cfg.validate().map_err(to_py)?;
        let field = cfg.surrogate(&case, self.outcome.net.clone()).map_err(to_py)?;
        field.predict_u(&flatten(&points, case.dim())?).map_err(to_py)
    }

    /// Writes the run bundle to `out_dir` (default: the configured output
    /// directory) and returns the directory.
    #[pyo3(signature = (out_dir=None))]
    fn save(&self, out_dir: Option<PathBuf>) -> PyResult<PathBuf> {
        let mut outcome = self.outcome.clone();
        if let Some(d) = out_dir {
            outcome.config.out_dir = d;
        }
        write_bundle(&outcome).map_err(to_py)
    }
}

/// Trains a surrogate. Divergence is reported through `RunResult.diverged`.
#[pyfunction]
fn run(py: Python<'_>, config: &PyRunConfig) -> PyResult<PyRunResult> {
    let cfg = config.inner.clone();
    let outcome = py.detach(move || trainer::run(&cfg)).map_err(to_py)?;
    Ok(PyRunResult { outcome })
}

/// Evaluates a checkpoint on an `n`-per-axis grid. The configuration
/// defaults to the `config.json` next to the checkpoint. Returns
/// `(points, exact, predicted, errors)`.
#[pyfunction]
#[pyo3(signature = (checkpoint, grid, config=None))]
fn evaluate_checkpoint<'py>(
    py: Python<'py>,
    checkpoint: PathBuf,
    grid: usize,
    config: Option<PyRunConfig>,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Bound<'py, PyDict>)> {
    let cfg = match config {
        Some(c) => c.inner,
        None => {
            let dir = checkpoint.parent().map_or_else(|| PathBuf::from("."), PathBuf::from);
            read_config(&dir.join(CONFIG_FILE)).map_err(to_py)?
        }
    };
    let (points, exact, pred, errors) = eval_checkpoint(&checkpoint, &cfg, grid).map_err(to_py)?;
    Ok((rows(&points), exact, pred, errors_dict(py, &errors)?))
}

#[pymodule]
fn prox_evi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ProxEviError", m.py().get_type::<ProxEviError>())?;
    m.add_class::<PyBenchmark>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(benchmarks, m)?)?;
    m.add_function(wrap_pyfunction!(obstacle_clamp, m)?)?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(unit_ball_project, m)?)?;
    m.add_function(wrap_pyfunction!(vector_shrink, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_checkpoint, m)?)?;
    Ok(())
}
