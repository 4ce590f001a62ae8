//! Python bindings for `fracsub`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fracsub::harness::{self, ExperimentConfig, GOLDEN};
use fracsub::inverse_time::{self, InverseStableLaw};
use fracsub::solver::{self, ClockMode, ReferenceDensity};
use fracsub::spatial::{InnovationSpec, Scheme, SchemeConfig};
use fracsub::{subord, Error, StreamFactory};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Parameter { .. } | Error::Config(_) | Error::Singularity(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn clock_mode(name: &str) -> PyResult<ClockMode> {
    match name {
        "path" => Ok(ClockMode::Path),
        "exact-law" => Ok(ClockMode::ExactLaw),
        "dyadic" => Ok(ClockMode::Dyadic),
        other => Err(PyValueError::new_err(format!(
            "unknown clock mode `{other}` (expected path, exact-law or dyadic)"
        ))),
    }
}

/// Density `p_Z(T, u)` of the inverse stable subordinator.
#[pyfunction]
#[pyo3(name = "inverse_density")]
fn py_inverse_density(beta: f64, horizon: f64, u: f64) -> PyResult<f64> {
    inverse_time::inverse_density(beta, horizon, u).map_err(py_err)
}

/// Draws of `S_1` with Laplace transform `exp(-λ^β)`.
#[pyfunction]
#[pyo3(signature = (beta, n, seed = 0))]
fn sample_positive_stable(py: Python<'_>, beta: f64, n: u64, seed: u64) -> PyResult<Vec<f64>> {
    py.detach(|| solver::parallel_map(StreamFactory::new(seed), n, |_, rng| subord::sample_positive_stable(beta, rng)))
        .map_err(py_err)
}

/// Exact draws of `Z_T`.
#[pyfunction]
#[pyo3(signature = (beta, horizon, n, seed = 0))]
fn sample_inverse_time(py: Python<'_>, beta: f64, horizon: f64, n: u64, seed: u64) -> PyResult<Vec<f64>> {
    py.detach(|| {
        solver::parallel_map(StreamFactory::new(seed), n, |_, rng| inverse_time::sample_inverse_time(beta, horizon, rng))
    })
    .map_err(py_err)
}

/// Caputo derivative of samples on a uniform grid.
#[pyfunction]
fn caputo_derivative(values: Vec<f64>, dt: f64, beta: f64) -> PyResult<Vec<f64>> {
    solver::caputo_derivative(&values, dt, beta).map_err(py_err)
}

/// Riemann–Liouville derivative of samples on a uniform grid.
#[pyfunction]
fn riemann_liouville_derivative(values: Vec<f64>, dt: f64, beta: f64) -> PyResult<Vec<f64>> {
    solver::riemann_liouville_derivative(&values, dt, beta).map_err(py_err)
}

/// Runs an experiment described by TOML text and returns the CSV output.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_toml: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml(config_toml).map_err(py_err)?;
    cfg.validate().map_err(py_err)?;
    py.detach(|| harness::run(&cfg)).map(|t| t.render()).map_err(py_err)
}

/// Runs the golden-value suite; returns `(passed, failing case names)`.
#[pyfunction]
fn selftest(py: Python<'_>) -> PyResult<(bool, Vec<String>)> {
    let report = py.detach(|| harness::run_selftest(GOLDEN)).map_err(py_err)?;
    Ok((report.passed(), report.failures().into_iter().map(String::from).collect()))
}

/// Law of the inverse stable subordinator `Z_T`.
#[pyclass(name = "InverseStableLaw", frozen)]
struct PyInverseStableLaw(InverseStableLaw);

#[pymethods]
impl PyInverseStableLaw {
    #[new]
    fn new(beta: f64) -> PyResult<Self> {
        InverseStableLaw::new(beta).map(Self).map_err(py_err)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    fn density(&self, horizon: f64, u: f64) -> PyResult<f64> {
        self.0.density(horizon, u).map_err(py_err)
    }

    fn cdf(&self, horizon: f64, u: f64) -> PyResult<f64> {
        self.0.cdf(horizon, u).map_err(py_err)
    }
}

/// Constant-coefficient density `q(T, z)` by subordination.
#[pyclass(name = "ReferenceDensity", frozen)]
struct PyReferenceDensity(ReferenceDensity);

#[pymethods]
impl PyReferenceDensity {
    #[new]
    #[pyo3(signature = (beta, alpha = 2.0, dim = 1, drift = vec![0.0], sigma = 1.0))]
    fn new(beta: f64, alpha: f64, dim: usize, drift: Vec<f64>, sigma: f64) -> PyResult<Self> {
        ReferenceDensity::new(beta, alpha, dim, &drift, sigma).map(Self).map_err(py_err)
    }

    fn density(&self, horizon: f64, z: Vec<f64>) -> PyResult<f64> {
        self.0.density(horizon, &z).map_err(py_err)
    }

    /// `q(T, ·)` convolved with a Gaussian kernel of bandwidth `bw`.
    fn density_smoothed(&self, horizon: f64, z: Vec<f64>, bw: f64) -> PyResult<f64> {
        self.0.density_smoothed(horizon, &z, bw).map_err(py_err)
    }
}

/// Time-changed Euler scheme with constant unit coefficients.
#[pyclass(name = "Scheme", frozen)]
struct PyScheme(Scheme);

#[pymethods]
impl PyScheme {
    #[new]
    #[pyo3(signature = (beta, alpha = 2.0, h = 1e-3, horizon = 1.0, dim = 1, n_paths = 10_000, seed = 0))]
    fn new(beta: f64, alpha: f64, h: f64, horizon: f64, dim: usize, n_paths: u64, seed: u64) -> PyResult<Self> {
        let cfg = SchemeConfig {
            alpha,
            innovation: InnovationSpec::Gaussian,
            n_paths,
            seed,
            ..SchemeConfig::brownian(beta, h, horizon, dim)
        };
        Scheme::new(cfg).map(Self).map_err(py_err)
    }

    /// Endpoints `X^h_{Z_T^{β,h}}`, flattened row-major.
    #[pyo3(signature = (clock = "path"))]
    fn sample_endpoints(&self, py: Python<'_>, clock: &str) -> PyResult<Vec<f64>> {
        let mode = clock_mode(clock)?;
        py.detach(|| solver::sample_endpoints(&self.0, mode)).map_err(py_err)
    }

    /// Monte Carlo `E[X_1^order]` from the origin; returns `(mean, stderr)`.
    #[pyo3(signature = (order, clock = "path"))]
    fn moment(&self, py: Python<'_>, order: i32, clock: &str) -> PyResult<(f64, f64)> {
        let mode = clock_mode(clock)?;
        let x = self.0.config().start_point();
        py.detach(|| solver::solve_fractional_cauchy(|y| y[0].powi(order), &x, &self.0, mode))
            .map(|e| (e.mean, e.stderr))
            .map_err(py_err)
    }
}

#[pymodule]
fn fracsub_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", harness::VERSION)?;
    m.add_function(wrap_pyfunction!(py_inverse_density, m)?)?;
    m.add_function(wrap_pyfunction!(sample_positive_stable, m)?)?;
    m.add_function(wrap_pyfunction!(sample_inverse_time, m)?)?;
    m.add_function(wrap_pyfunction!(caputo_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(riemann_liouville_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    m.add_class::<PyInverseStableLaw>()?;
    m.add_class::<PyReferenceDensity>()?;
    m.add_class::<PyScheme>()?;
    Ok(())
}
