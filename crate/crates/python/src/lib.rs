//! Python bindings. Structured reports cross the boundary as JSON and come back as dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use degapprox::diag;
use degapprox::error::Error;
use degapprox::experiments::{self, ExperimentConfig};
use degapprox::franklin::{self, SeqMode, SequenceSampler};
use degapprox::grid::{Grid, GridFn};
use degapprox::kernel::{sample_native, KernelSpec};
use degapprox::lacunar;
use degapprox::mercer::{self, DEFAULT_DROP_TOL};
use degapprox::trig::{self, ApproxTarget, BestErrorMode};

fn err(e: Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_py(py: Python<'_>, v: &impl Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn periodic_fn(values: Vec<f64>) -> Result<GridFn, Error> {
    GridFn::new(Grid::periodic(values.len())?, values)
}

/// Nyström eigen-decomposition of a named kernel.
#[pyclass(name = "MercerDecomposition", module = "degapprox", frozen)]
struct PyMercer(mercer::MercerDecomposition);

#[pymethods]
impl PyMercer {
    #[new]
    #[pyo3(signature = (kernel, grid = 1024, drop_tol = DEFAULT_DROP_TOL))]
    fn new(kernel: &str, grid: usize, drop_tol: f64) -> PyResult<Self> {
        let gk = sample_native(&kernel.parse::<KernelSpec>().map_err(err)?, grid).map_err(err)?;
        mercer::nystrom_decompose(&gk, drop_tol).map(Self).map_err(err)
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues.clone()
    }

    #[getter]
    fn n_kept(&self) -> usize {
        self.0.n_kept
    }

    #[getter]
    fn trace_residual(&self) -> f64 {
        self.0.trace_residual
    }

    #[getter]
    fn negative_mass(&self) -> f64 {
        self.0.negative_mass
    }

    #[getter]
    fn points(&self) -> Vec<f64> {
        self.0.grid.points()
    }

    /// Values of the `k`-th eigenfunction (1-based) at the grid nodes.
    fn eigenfunction(&self, k: usize) -> PyResult<Vec<f64>> {
        if k == 0 || k > self.0.n_kept {
            return Err(PyValueError::new_err(format!("k must lie in [1, {}]", self.0.n_kept)));
        }
        Ok(self.0.eigenfunction(k).values)
    }

    /// L1, L2 and sup errors of the rank-`n` truncation.
    fn tail_errors(&self, py: Python<'_>, n: usize) -> PyResult<Py<PyAny>> {
        to_py(py, &mercer::tail_errors(&self.0, n).map_err(err)?)
    }

    fn __len__(&self) -> usize {
        self.0.n_kept
    }

    fn __repr__(&self) -> String {
        format!("MercerDecomposition(n_points={}, n_kept={})", self.0.grid.n_points(), self.0.n_kept)
    }
}

/// Lacunar series `Σ b_k cos(n_k t)`.
#[pyclass(name = "LacunarSpec", module = "degapprox", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLacunar(lacunar::LacunarSpec);

#[pymethods]
impl PyLacunar {
    #[new]
    fn new(coefficients: Vec<f64>, frequencies: Vec<u64>) -> PyResult<Self> {
        lacunar::LacunarSpec::from_u64(coefficients, frequencies).map(Self).map_err(err)
    }

    /// `b_k = k^{-theta}` on frequencies `ratio^k`.
    #[staticmethod]
    #[pyo3(signature = (theta, ratio = 5, n_terms = 64))]
    fn theta_family(theta: f64, ratio: u64, n_terms: usize) -> PyResult<Self> {
        lacunar::LacunarSpec::theta_family(theta, ratio, n_terms).map(Self).map_err(err)
    }

    /// `b_k = base^{-k}` on frequencies `ratio^k`.
    #[staticmethod]
    #[pyo3(signature = (base, ratio = 5, n_terms = 20))]
    fn geometric(base: f64, ratio: u64, n_terms: usize) -> PyResult<Self> {
        lacunar::LacunarSpec::geometric(base, ratio, n_terms).map(Self).map_err(err)
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.0.coefficients().to_vec()
    }

    /// Frequencies as decimal strings; they can exceed 64 bits.
    #[getter]
    fn frequencies(&self) -> Vec<String> {
        self.0.frequencies().iter().map(|f| f.to_string()).collect()
    }

    #[getter]
    fn theta(&self) -> Option<f64> {
        self.0.theta()
    }

    /// The covariance kernel `Σ b_k² cos(n_k t) cos(n_k s)` as a lacunar spec.
    fn covariance(&self) -> Self {
        Self(self.0.covariance())
    }

    /// `Σ_{k > nu} b_k`, including the analytic continuation of a θ family.
    fn tail_sum(&self, nu: usize) -> f64 {
        self.0.tail_sum(nu)
    }

    /// Number of frequencies `≤ n`.
    fn nu(&self, n: u64) -> usize {
        self.0.nu(&n.into())
    }

    fn kernel(&self, t: f64, s: f64) -> PyResult<f64> {
        self.0.eval_kernel(t, s).map_err(err)
    }

    fn criteria(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &diag::lacunar_criteria(&self.0))
    }

    fn watanabe(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &diag::watanabe_check(&self.0))
    }

    fn __len__(&self) -> usize {
        self.0.n_terms()
    }

    fn __repr__(&self) -> String {
        match self.0.theta() {
            Some(t) => format!("LacunarSpec(theta={t}, n_terms={})", self.0.n_terms()),
            None => format!("LacunarSpec(n_terms={})", self.0.n_terms()),
        }
    }
}

/// Best rank-`(n1, n2)` approximation errors of a named kernel.
#[pyfunction]
#[pyo3(signature = (kernel, grid, n1, n2 = None))]
fn svd_approx(py: Python<'_>, kernel: &str, grid: usize, n1: usize, n2: Option<usize>) -> PyResult<Py<PyAny>> {
    let gk = sample_native(&kernel.parse::<KernelSpec>().map_err(err)?, grid).map_err(err)?;
    let (_, e) = mercer::svd_degenerate_approx(&gk, n1, n2.unwrap_or(n1)).map_err(err)?;
    to_py(py, &e)
}

/// de la Vallee-Poussin sum `V_n f` of samples on a uniform grid of `[0, 2π)`.
#[pyfunction]
fn vp_sum(values: Vec<f64>, n: usize) -> PyResult<Vec<f64>> {
    let f = periodic_fn(values).map_err(err)?;
    let p = trig::vp_sum(&f, n).map_err(err)?;
    Ok(p.sample(&f.grid).map_err(err)?.values)
}

/// Fourier multiplier of `V_{n,p}` at frequency `k`.
#[pyfunction]
fn vp_multiplier(n: usize, p: usize, k: i64) -> f64 {
    trig::vp_multiplier(n, p, k)
}

/// `L2` distance of periodic samples to trigonometric polynomials of degree `n`.
#[pyfunction]
fn best_error_l2(values: Vec<f64>, n: usize) -> PyResult<f64> {
    let f = periodic_fn(values).map_err(err)?;
    trig::best_error(ApproxTarget::Function(&f), (n, n), BestErrorMode::L2_1d).map_err(err)
}

/// Verdict (`converges`, `diverges`, `inconclusive`) and tail estimate of a positive series.
#[pyfunction]
fn classify_series(terms: Vec<f64>) -> (String, f64) {
    let (v, tail) = diag::classify_series(&terms);
    (format!("{v:?}").to_lowercase(), tail)
}

#[pyfunction]
#[pyo3(signature = (count = 1000, max_degree = 32, seed = experiments::DEFAULT_SEED))]
fn lemma61_sweep(py: Python<'_>, count: usize, max_degree: usize, seed: u64) -> PyResult<Py<PyAny>> {
    to_py(py, &diag::lemma61_sweep(count, max_degree, seed).map_err(err)?)
}

/// τ profile of the lacunar θ process over dyadic blocks.
#[pyfunction]
#[pyo3(signature = (theta, samples = 2000, n_blocks = 8, seed = experiments::DEFAULT_SEED))]
fn tau_profile(py: Python<'_>, theta: f64, samples: usize, n_blocks: usize, seed: u64) -> PyResult<Py<PyAny>> {
    to_py(py, &experiments::theta_tau_profile(theta, samples, n_blocks, seed).map_err(err)?)
}

/// κ (`mode="kappa"`) or γ (`mode="gamma"`) of a sequence sampler on the block `(n, m)`; returns `(mean, std_error)`.
#[pyfunction]
#[pyo3(signature = (sampler, n, m, samples = 2000, mode = "kappa", seed = experiments::DEFAULT_SEED))]
fn kappa_gamma(sampler: &str, n: usize, m: usize, samples: usize, mode: &str, seed: u64) -> PyResult<(f64, f64)> {
    let s: SequenceSampler = sampler.parse().map_err(err)?;
    let mode = match mode {
        "kappa" => SeqMode::Kappa,
        "gamma" => SeqMode::Gamma,
        other => return Err(PyValueError::new_err(format!("mode must be kappa or gamma, got {other}"))),
    };
    let e = franklin::kappa_gamma(s, n, m, samples, mode, seed).map_err(err)?;
    Ok((e.mean, e.std_error))
}

/// Standard normal deviate at `(seed, stream, counter)`.
#[pyfunction]
fn normal(seed: u64, stream: u64, counter: u64) -> f64 {
    degapprox::rng::normal(seed, stream, counter)
}

/// `(name, description)` for each named experiment.
#[pyfunction]
fn list_experiments() -> Vec<(&'static str, &'static str)> {
    experiments::EXPERIMENTS.iter().map(|e| (e.name, e.reproduces)).collect()
}

/// Runs a named experiment; writes artifacts when `output_dir` is given.
#[pyfunction]
#[pyo3(signature = (name, *, seed = None, samples = None, grid = None, n_blocks = None, thetas = None, count = None, max_degree = None, output_dir = None))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    name: &str,
    seed: Option<u64>,
    samples: Option<usize>,
    grid: Option<usize>,
    n_blocks: Option<usize>,
    thetas: Option<Vec<f64>>,
    count: Option<usize>,
    max_degree: Option<usize>,
    output_dir: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let cfg = ExperimentConfig {
        experiment: name.into(),
        seed,
        samples,
        grid,
        n_blocks,
        thetas,
        count,
        max_degree,
        output_dir: None,
    };
    let outcome = py.detach(|| experiments::run_experiment(&cfg)).map_err(err)?;
    if let Some(dir) = &output_dir {
        experiments::write_outcome(&outcome, &cfg, dir).map_err(err)?;
    }
    let out = serde_json::json!({
        "name": outcome.name,
        "passed": outcome.passed,
        "summary": outcome.summary,
        "report": outcome.report,
        "files": outcome.files.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "digest": outcome.payload_digest(),
    });
    to_py(py, &out)
}

#[pymodule(name = "degapprox")]
fn degapprox_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMercer>()?;
    m.add_class::<PyLacunar>()?;
    m.add_function(wrap_pyfunction!(svd_approx, m)?)?;
    m.add_function(wrap_pyfunction!(vp_sum, m)?)?;
    m.add_function(wrap_pyfunction!(vp_multiplier, m)?)?;
    m.add_function(wrap_pyfunction!(best_error_l2, m)?)?;
    m.add_function(wrap_pyfunction!(classify_series, m)?)?;
    m.add_function(wrap_pyfunction!(lemma61_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(tau_profile, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(normal, m)?)?;
    m.add_function(wrap_pyfunction!(list_experiments, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
