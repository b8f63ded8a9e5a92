//! Python module `pynsdb`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use nsdb::config::{preset, RunConfig};
use nsdb::experiments::{build_setup, run_experiment, run_setup, validate_config, DriverOptions, RunSummary, Setup};
use nsdb::output;
use nsdb::stepper::{RunOptions, Trajectory};
use nsdb::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Parameter(_) | Error::BoundViolation { .. } | Error::MeshFormat(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serializable value to a plain Python object via the json module.
fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A run configuration.
#[pyclass(name = "Config", module = "pynsdb", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        RunConfig::from_json(text).map(|inner| PyConfig { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        RunConfig::load(&path).map(|inner| PyConfig { inner }).map_err(py_err)
    }

    /// One of `buoyant_cavity`, `buoyant_cavity_quasistatic`,
    /// `diffusion_eigenmode`, `zero`, `manufactured`.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        preset(name).map(|inner| PyConfig { inner }).ok_or_else(|| PyValueError::new_err(format!("unknown preset {name:?}")))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    /// Full validation including material bounds and sigma calibration.
    fn validate(&self) -> PyResult<()> {
        validate_config(&self.inner).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Config(experiment={:?}, hash={})", self.inner.experiment.name(), &self.inner.hash()[..12])
    }
}

/// A configuration built into mesh, material and initial state.
#[pyclass(name = "Simulation", module = "pynsdb", frozen)]
struct PySimulation {
    setup: Setup,
}

#[pymethods]
impl PySimulation {
    #[new]
    fn new(config: &PyConfig) -> PyResult<Self> {
        build_setup(&config.inner).map(|setup| PySimulation { setup }).map_err(py_err)
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.setup.problem.params.sigma
    }

    #[getter]
    fn num_steps(&self) -> usize {
        self.setup.problem.params.num_steps()
    }

    #[getter]
    fn num_dofs(&self) -> usize {
        let dofs = &self.setup.problem.dofs;
        nsdb::fem::Field::ALL.iter().map(|&f| dofs.field_len(f)).sum()
    }

    fn calibration<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.setup.calibration)
    }

    /// Runs to the final time; the GIL is released meanwhile.
    fn run(&self, py: Python<'_>) -> PyTrajectory {
        let (traj, summary) = py.detach(|| run_setup(&self.setup, &RunOptions::default()));
        PyTrajectory { traj, summary, setup: self.setup.clone() }
    }
}

/// Result of `Simulation.run`.
#[pyclass(name = "Trajectory", module = "pynsdb", frozen)]
struct PyTrajectory {
    traj: Trajectory,
    summary: RunSummary,
    setup: Setup,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn num_steps(&self) -> usize {
        self.traj.num_steps()
    }

    #[getter]
    fn completed(&self) -> bool {
        self.traj.completed()
    }

    #[getter]
    fn aborted(&self) -> Option<String> {
        self.traj.aborted.clone()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.traj.states.iter().map(|s| s.t).collect()
    }

    /// Certificates of the run as a dict.
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.summary)
    }

    /// Per-step energy rows as dicts.
    fn energy<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let rows: Vec<_> = self.traj.diagnostics.iter().map(|d| (d.step, d.t, d.picard_iters, d.energy)).collect();
        to_py(py, &rows)
    }

    fn energy_csv(&self) -> String {
        output::energy_csv(&self.traj.diagnostics)
    }

    /// Coefficient vectors of state `k` keyed by field name.
    fn state<'py>(&self, py: Python<'py>, k: usize) -> PyResult<Bound<'py, PyAny>> {
        let s = self.traj.states.get(k).ok_or_else(|| PyIndexError::new_err(format!("no state {k}")))?;
        to_py(py, s)
    }

    /// Writes `mesh.txt`, `energy.csv` and snapshots to `directory`.
    #[pyo3(signature = (directory, snapshot_stride = 10))]
    fn write(&self, directory: PathBuf, snapshot_stride: usize) -> PyResult<()> {
        output::write_outputs(&directory, &self.traj, &self.setup, snapshot_stride).map_err(py_err)
    }
}

/// Runs the experiment named in the configuration and returns its report.
#[pyfunction]
#[pyo3(signature = (config, out, quiet = true))]
fn run_experiment_report<'py>(py: Python<'py>, config: &PyConfig, out: PathBuf, quiet: bool) -> PyResult<Bound<'py, PyAny>> {
    let opts = DriverOptions { out: Some(out), dump_systems: None, quiet };
    let outcome = py.detach(|| run_experiment(&config.inner, &opts)).map_err(py_err)?;
    to_py(py, &outcome.report)
}

#[pymodule]
fn pynsdb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySimulation>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(run_experiment_report, m)?)?;
    Ok(())
}
