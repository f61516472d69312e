//! Python bindings: grids and interpolation, the closed-form oracle, single
//! MFG solves and full convergence studies.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mfglg::basis::{interpolate, reference_basis_eval, Extension};
use mfglg::harness::study::{local_problem, lq_problem};
use mfglg::harness::{run_study, StudyConfig, TestId};
use mfglg::mfg::mfg_solve;
use mfglg::oracle::LqParameters;
use mfglg::{Point, UniformGrid};

fn err(e: mfglg::Error) -> PyErr {
    match e {
        mfglg::Error::Config(_) | mfglg::Error::InvalidGrid(_) | mfglg::Error::Shape(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn point(x: &[f64]) -> PyResult<Point> {
    match x {
        [a] => Ok([*a, 0.0]),
        [a, b] => Ok([*a, *b]),
        _ => Err(PyValueError::new_err("points have one or two coordinates")),
    }
}

fn extension(name: &str) -> PyResult<Extension> {
    match name {
        "zero" => Ok(Extension::ZeroPad),
        "clamp" => Ok(Extension::Clamp),
        "reflect" => Ok(Extension::Reflect),
        _ => Err(PyValueError::new_err(format!("unknown extension '{name}'"))),
    }
}

/// Cubic reference basis function at `xi`.
#[pyfunction]
fn basis(xi: f64) -> f64 {
    reference_basis_eval(xi)
}

#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: UniformGrid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(dim: usize, lower: f64, upper: f64, dx: f64) -> PyResult<Self> {
        UniformGrid::new(dim, lower, upper, dx).map(|inner| Self { inner }).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.inner.dx()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Node coordinates, flat index order.
    fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len())
            .map(|i| self.inner.node(i)[..self.inner.dim()].to_vec())
            .collect()
    }

    #[pyo3(signature = (values, x, extension = "clamp"))]
    fn interpolate(&self, values: Vec<f64>, x: Vec<f64>, extension: &str) -> PyResult<f64> {
        if values.len() != self.inner.len() {
            return Err(PyValueError::new_err("one value per node expected"));
        }
        Ok(interpolate(&values, point(&x)?, &self.inner, self::extension(extension)?))
    }
}

/// Exact solution of the linear-quadratic game.
#[pyclass(name = "LqOracle", frozen)]
struct PyLqOracle {
    inner: LqParameters,
}

#[pymethods]
impl PyLqOracle {
    #[new]
    #[pyo3(signature = (dim = 1, half_sigma_sq = 0.05, horizon = 0.25, mean0 = 0.1, var0 = 0.1))]
    fn new(dim: usize, half_sigma_sq: f64, horizon: f64, mean0: f64, var0: f64) -> PyResult<Self> {
        if !(dim == 1 || dim == 2) || var0 <= 0.0 || half_sigma_sq <= 0.0 {
            return Err(PyValueError::new_err("need dim 1 or 2 and positive variances"));
        }
        let inner = LqParameters::new(horizon, (2.0 * half_sigma_sq).sqrt(), dim, [mean0; 2], [var0; 2]);
        Ok(Self { inner })
    }

    fn value(&self, t: f64, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.exact_value(t, point(&x)?))
    }

    fn gradient(&self, t: f64, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.exact_gradient(t, point(&x)?)[..self.inner.dim].to_vec())
    }

    fn density(&self, t: f64, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.exact_density(t, point(&x)?))
    }

    fn variance(&self, t: f64) -> f64 {
        self.inner.variance(t, 0)
    }
}

fn config(test: &str, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<StudyConfig> {
    let id: TestId = test.parse().map_err(err)?;
    let mut cfg = StudyConfig::defaults(id);
    if let Some(d) = overrides {
        for (k, v) in d.iter() {
            cfg.set(&k.str()?.to_cow()?, &v.str()?.to_cow()?).map_err(err)?;
        }
    }
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Solves one coupled problem (`lq-1d`, `lq-2d` or `local-1d`) at mesh
/// width `dx`; returns nodes, `v(0)`, `m(T)` and iteration data.
#[pyfunction]
#[pyo3(signature = (test, dx, overrides = None))]
fn solve<'py>(py: Python<'py>, test: &str, dx: f64, overrides: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(test, overrides)?;
    let problem = match cfg.test {
        TestId::Lq1d | TestId::Lq2d => lq_problem(&cfg, dx),
        TestId::Local1d => local_problem(&cfg, dx, cfg.dt_rule),
        TestId::FpOnlyOu => return Err(PyValueError::new_err("fp-only-ou has no coupled solve; use run_study")),
    }
    .map_err(err)?;
    let sol = py.detach(|| mfg_solve(&problem)).map_err(err)?;
    let g = &problem.grid;
    let out = PyDict::new(py);
    out.set_item("x", (0..g.len()).map(|i| g.node(i)[..g.dim()].to_vec()).collect::<Vec<_>>())?;
    out.set_item("v0", sol.value.slice(0).to_vec())?;
    out.set_item("m_T", sol.density.last().to_vec())?;
    out.set_item("dt", problem.dt())?;
    out.set_item("iterations", sol.iterations)?;
    out.set_item("converged", sol.converged)?;
    out.set_item("increments", sol.increments)?;
    out.set_item("mass_drift", sol.max_mass_drift)?;
    Ok(out)
}

/// Runs a convergence study; returns `{field: [row dict, ...]}`.
#[pyfunction]
#[pyo3(signature = (test, overrides = None))]
fn run<'py>(py: Python<'py>, test: &str, overrides: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(test, overrides)?;
    let report = py.detach(|| run_study(&cfg)).map_err(err)?;
    let out = PyDict::new(py);
    for f in &report.fields {
        let rows = f
            .rows
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("dx", r.dx)?;
                d.set_item("dt", r.dt)?;
                d.set_item("e_inf", r.e_inf)?;
                d.set_item("e_2", r.e_2)?;
                d.set_item("p_inf", r.p_inf)?;
                d.set_item("p_2", r.p_2)?;
                d.set_item("positivity_error", r.positivity_error)?;
                d.set_item("iterations", r.iterations)?;
                d.set_item("failure", r.failure.clone())?;
                Ok(d)
            })
            .collect::<PyResult<Vec<_>>>()?;
        out.set_item(&f.field, rows)?;
    }
    Ok(out)
}

/// Runs the quick invariant checks; returns `(name, passed, detail)` tuples.
#[pyfunction]
fn verify() -> Vec<(&'static str, bool, String)> {
    mfglg::verify::run_checks()
        .into_iter()
        .map(|c| (c.name, c.passed, c.detail))
        .collect()
}

#[pymodule]
fn mfglg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyLqOracle>()?;
    m.add_function(wrap_pyfunction!(basis, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
