//! Python bindings: operator norms, the step-size check, basic proximity
//! operators, a lasso solver and the benchmark commands.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use splitdr::experiments::Gradient2d;
use splitdr::linops::{
    check_metric_condition, power_iteration, DenseOp, LinearOp, Metric, ScaledIdentity, StackedOp,
};
use splitdr::prox::{
    prox_huber as core_prox_huber, soft_threshold as core_soft_threshold, ResolventOp,
};
use splitdr::solvers::{solve, SdrProblem, SdrRunner, Status, StoppingRule, CONDITION_TOL};
use splitdr::{Matrix, Vector};
use splitdr_cli::{
    check_output, equiv_output, huber_output, tv_output, CliError, Experiment, RunConfig,
};

create_exception!(splitdr, SplitdrError, PyException);

fn core_err(e: splitdr::Error) -> PyErr {
    match e {
        splitdr::Error::InvalidParameter(_) | splitdr::Error::DimensionMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => SplitdrError::new_err(e.to_string()),
    }
}

fn cli_err(e: CliError) -> PyErr {
    match e {
        CliError::Config(_) => PyValueError::new_err(e.to_string()),
        CliError::Core(inner) => core_err(inner),
        _ => SplitdrError::new_err(e.to_string()),
    }
}

/// Forward-difference gradient of an `n1 × n2` image with Neumann boundary.
#[pyclass(name = "Gradient2d", frozen)]
struct PyGradient2d {
    inner: Gradient2d,
}

#[pymethods]
impl PyGradient2d {
    #[new]
    fn new(n1: usize, n2: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Gradient2d::new(n1, n2).map_err(core_err)?,
        })
    }

    /// `(input dimension, output dimension)`.
    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.in_dim(), self.inner.out_dim())
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_len(self.inner.in_dim(), x.len())?;
        Ok(self.inner.apply(&Vector::from_vec(x)).as_slice().to_vec())
    }

    fn adjoint(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        check_len(self.inner.out_dim(), y.len())?;
        Ok(self.inner.adjoint(&Vector::from_vec(y)).as_slice().to_vec())
    }

    /// Exact `‖∇‖²` from the closed-form spectrum.
    fn norm_sq(&self) -> f64 {
        self.inner.norm_sq_exact()
    }
}

fn check_len(expected: usize, got: usize) -> PyResult<()> {
    if expected == got {
        Ok(())
    } else {
        Err(PyValueError::new_err(format!(
            "expected a vector of length {expected}, got {got}"
        )))
    }
}

/// A maximally monotone operator represented through its resolvent.
#[pyclass(name = "Resolvent", frozen)]
struct PyResolvent {
    inner: ResolventOp,
}

#[pymethods]
impl PyResolvent {
    /// `∂(α‖·‖₁)`.
    #[staticmethod]
    fn l1(alpha: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ResolventOp::l1(alpha).map_err(core_err)?,
        })
    }

    /// Normal cone of the box `[lo, hi]^n`.
    #[staticmethod]
    fn box_indicator(lo: f64, hi: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ResolventOp::box_indicator(lo, hi).map_err(core_err)?,
        })
    }

    /// Gradient of `Σ φ_δ(· − shift)`.
    #[staticmethod]
    fn huber(delta: f64, shift: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: ResolventOp::huber(delta, Vector::from_vec(shift)).map_err(core_err)?,
        })
    }

    /// The inverse operator, whose resolvent follows from Moreau's identity.
    fn conjugate(&self) -> Self {
        Self {
            inner: self.inner.clone().conjugate(),
        }
    }

    /// `J_{MA}(w)` for `M = step·Id` (a float) or `M = diag(step)` (a list).
    fn resolve(&self, w: Vec<f64>, step: &Bound<'_, PyAny>) -> PyResult<Vec<f64>> {
        let n = w.len();
        let metric = match step.extract::<f64>() {
            Ok(s) => Metric::scalar(n, s),
            Err(_) => {
                let d: Vec<f64> = step.extract()?;
                check_len(n, d.len())?;
                Metric::diagonal(Vector::from_vec(d))
            }
        }
        .map_err(core_err)?;
        let out = self
            .inner
            .resolve(&metric, &Vector::from_vec(w))
            .map_err(core_err)?;
        Ok(out.as_slice().to_vec())
    }
}

/// `‖∇‖²` of the `n1 × n2` discrete gradient by power iteration; returns
/// `(value, iterations)`.
#[pyfunction]
#[pyo3(signature = (n1, n2, tol = 1e-9, max_iter = 1_000_000, seed = 0))]
fn gradient_norm_sq(
    n1: usize,
    n2: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> PyResult<(f64, usize)> {
    let grad = Gradient2d::new(n1, n2).map_err(core_err)?;
    let est = power_iteration(&grad, tol, max_iter, seed).map_err(core_err)?;
    Ok((est.value, est.iterations))
}

/// Checks `Υ⁻¹ − L*ΣL ⪰ 0` for `L = (∇; Id)`, `Υ = τId` and
/// `Σ = diag(σ₁Id, σ₂Id)`; returns `(monotone, margin)`.
#[pyfunction]
#[pyo3(signature = (tau, sigma1, sigma2, n1 = 8, n2 = 8))]
fn check_condition(
    tau: f64,
    sigma1: f64,
    sigma2: f64,
    n1: usize,
    n2: usize,
) -> PyResult<(bool, f64)> {
    let n = n1 * n2;
    let op = StackedOp::new(vec![
        Arc::new(Gradient2d::new(n1, n2).map_err(core_err)?),
        Arc::new(ScaledIdentity::identity(n)),
    ])
    .map_err(core_err)?;
    let upsilon = Metric::scalar(n, tau).map_err(core_err)?;
    let sigma = Metric::block_scalars(&[(2 * n, sigma1), (n, sigma2)]).map_err(core_err)?;
    let report = check_metric_condition(&upsilon, &sigma, &op, CONDITION_TOL).map_err(core_err)?;
    Ok((report.is_monotone, report.margin))
}

/// Componentwise soft thresholding at `level`.
#[pyfunction]
fn soft_threshold(x: Vec<f64>, level: f64) -> PyResult<Vec<f64>> {
    Ok(core_soft_threshold(&Vector::from_vec(x), level)
        .map_err(core_err)?
        .as_slice()
        .to_vec())
}

/// Proximity operator of `γ Σ φ_δ(· − shift)`; the shift defaults to zero.
#[pyfunction]
#[pyo3(signature = (x, gamma, delta, shift = None))]
fn prox_huber(x: Vec<f64>, gamma: f64, delta: f64, shift: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let n = x.len();
    let shift = shift.map_or_else(|| Vector::zeros(n), Vector::from_vec);
    let p = core_prox_huber(&Vector::from_vec(x), gamma, delta, &shift).map_err(core_err)?;
    Ok(p.as_slice().to_vec())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(
            "matrix must be a non-empty list of equal-length rows",
        ));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Solves `min ½‖Lx − c‖² + α‖x‖₁` with SDR and scalar steps `τ`, `σ`.
/// Returns a dict with `x`, `u`, `iterations`, `converged` and
/// `kkt_residual`.
#[pyfunction]
#[pyo3(signature = (l, c, alpha, tau, sigma, tol = 1e-10, max_iter = 100_000))]
#[allow(clippy::too_many_arguments)]
fn lasso_sdr<'py>(
    py: Python<'py>,
    l: Vec<Vec<f64>>,
    c: Vec<f64>,
    alpha: f64,
    tau: f64,
    sigma: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let l = matrix(l)?;
    let (m, n) = l.shape();
    let prob = SdrProblem::new(
        &ResolventOp::l1(alpha).map_err(core_err)?,
        &ResolventOp::quadratic(
            Arc::new(DenseOp::new(Matrix::identity(m, m))),
            Vector::from_vec(c),
        )
        .map_err(core_err)?,
        Arc::new(DenseOp::new(l)),
        Metric::scalar(n, tau).map_err(core_err)?,
        Metric::scalar(m, sigma).map_err(core_err)?,
    )
    .map_err(core_err)?;
    let rule = StoppingRule::new(tol, max_iter).map_err(core_err)?;
    let mut runner = SdrRunner::new(&prob, Vector::zeros(n), Vector::zeros(m)).map_err(core_err)?;
    let report = solve(&mut runner, &rule, |_| None).map_err(core_err)?;
    let (x, u) = (&runner.state.x, &runner.state.u);
    let out = PyDict::new(py);
    out.set_item("x", x.as_slice().to_vec())?;
    out.set_item("u", u.as_slice().to_vec())?;
    out.set_item("iterations", report.iterations)?;
    out.set_item("converged", report.status == Status::Converged)?;
    out.set_item("kkt_residual", prob.kkt_residual(x, u).map_err(core_err)?)?;
    Ok(out)
}

/// Runs a benchmark command (`tv`, `huber`, `equiv` or `check`) with
/// configuration keys given as keyword arguments. Returns `(text, ok)`.
#[pyfunction]
#[pyo3(signature = (command, **settings))]
fn run_experiment(command: &str, settings: Option<&Bound<'_, PyDict>>) -> PyResult<(String, bool)> {
    let experiment = match command {
        "tv" => Experiment::Tv,
        "huber" => Experiment::Huber,
        "equiv" => Experiment::Equiv,
        "check" => Experiment::Check,
        other => return Err(PyValueError::new_err(format!("unknown command {other:?}"))),
    };
    let mut cfg = RunConfig::new(experiment);
    if let Some(settings) = settings {
        for (k, v) in settings.iter() {
            let key: String = k.extract()?;
            let value = match v.extract::<bool>() {
                Ok(b) => b.to_string(),
                Err(_) => v.str()?.to_string(),
            };
            cfg.set(&key, &value).map_err(cli_err)?;
        }
    }
    cfg.validate().map_err(cli_err)?;
    let out = match experiment {
        Experiment::Tv => tv_output(&cfg),
        Experiment::Huber => huber_output(&cfg),
        Experiment::Equiv => equiv_output(&cfg),
        Experiment::Check => check_output(&cfg),
    }
    .map_err(cli_err)?;
    Ok((out.text, out.ok))
}

#[pymodule(name = "splitdr")]
fn splitdr_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SplitdrError", m.py().get_type::<SplitdrError>())?;
    m.add_class::<PyGradient2d>()?;
    m.add_class::<PyResolvent>()?;
    m.add_function(wrap_pyfunction!(gradient_norm_sq, m)?)?;
    m.add_function(wrap_pyfunction!(check_condition, m)?)?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(prox_huber, m)?)?;
    m.add_function(wrap_pyfunction!(lasso_sdr, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
