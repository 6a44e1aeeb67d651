//! Python module `hessian`.
//!
//! Report-like results come back as plain dicts with the same keys as the
//! JSON reports of the command-line tool.

use hessian_core::audit::audit_operator;
use hessian_core::conditions::{
    check_cns, check_condition_d, check_k_hessian_lower_bound, check_pma_partial_sums, field_condition_scan,
    ConditionId, ConditionParams,
};
use hessian_core::cones::ConeSpec;
use hessian_core::harness::{
    blowdown, c0_check, default_exponents_for, estimate_functional_with, liouville_probe, refinement_study,
    subsolution_ordering, AnalyticSource, BlowdownSource, EstimateOptions, DEFAULT_CORNER_CLIP,
};
use hessian_core::linalg::{eigen_sym, SymMatrix};
use hessian_core::operators::OperatorSpec;
use hessian_core::solver::{self, DomainSpec, GridField, SolveOptions, SolveReport};
use hessian_core::symfun::{self, Spectrum};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(hessian, HessianError, PyValueError);

fn err(e: hessian_core::Error) -> PyErr {
    HessianError::new_err(e.to_string())
}

fn spectrum(values: Vec<f64>) -> PyResult<Spectrum> {
    Spectrum::new(values).map_err(err)
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<SymMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(HessianError::new_err("matrix must be square"));
    }
    SymMatrix::new(n, rows.into_iter().flatten().collect()).map_err(err)
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| HessianError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyfunction]
fn sigma(j: usize, lam: Vec<f64>) -> PyResult<f64> {
    symfun::sigma(j, &spectrum(lam)?).map_err(err)
}

#[pyfunction]
fn sigma_all(lam: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(symfun::sigma_all(&spectrum(lam)?))
}

/// `σ_j` of `lam` with entry `i` removed.
#[pyfunction]
fn sigma_partial(j: usize, lam: Vec<f64>, i: usize) -> PyResult<f64> {
    symfun::sigma_partial(j, &spectrum(lam)?, i).map_err(err)
}

/// Eigenvalues (descending) and eigenvectors (columns) of a symmetric matrix.
#[pyfunction]
fn eigh(a: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let e = eigen_sym(&matrix(a)?);
    Ok((e.values, e.vectors.rows()))
}

#[pyclass(frozen, skip_from_py_object, name = "Cone")]
#[derive(Clone)]
struct PyCone(ConeSpec);

#[pymethods]
impl PyCone {
    /// `kind` is `"gamma_k"` or `"gamma_hat_p"`.
    #[new]
    fn new(kind: &str, param: usize, n: usize) -> PyResult<Self> {
        let cone = match kind {
            "gamma_k" => ConeSpec::gamma_k(param, n),
            "gamma_hat_p" => ConeSpec::gamma_hat_p(param, n),
            other => return Err(HessianError::new_err(format!("unknown cone kind '{other}'"))),
        };
        Ok(Self(cone.map_err(err)?))
    }

    #[pyo3(signature = (lam, margin = 0.0))]
    fn contains(&self, lam: Vec<f64>, margin: f64) -> PyResult<bool> {
        self.0.contains(&spectrum(lam)?, margin).map_err(err)
    }

    fn margin(&self, lam: Vec<f64>) -> PyResult<f64> {
        self.0.cone_margin(&lam).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    fn __repr__(&self) -> String {
        format!("Cone({})", self.0)
    }
}

#[pyclass(frozen, skip_from_py_object, name = "Operator")]
#[derive(Clone)]
struct PyOperator(OperatorSpec);

#[pymethods]
impl PyOperator {
    /// `kind` is one of `ma`, `khessian`, `quotient`, `pma`.
    #[new]
    #[pyo3(signature = (kind, n, k = None, l = None, p = None))]
    fn new(kind: &str, n: usize, k: Option<usize>, l: Option<usize>, p: Option<usize>) -> PyResult<Self> {
        let need = |name: &str, v: Option<usize>| v.ok_or_else(|| HessianError::new_err(format!("{kind} needs {name}")));
        let op = match kind {
            "ma" => OperatorSpec::monge_ampere(n),
            "khessian" => OperatorSpec::k_hessian(need("k", k)?, n),
            "quotient" => OperatorSpec::hessian_quotient(need("k", k)?, need("l", l)?, n),
            "pma" => OperatorSpec::p_monge_ampere(need("p", p)?, n),
            other => return Err(HessianError::new_err(format!("unknown operator '{other}'"))),
        };
        Ok(Self(op.map_err(err)?))
    }

    fn eval(&self, lam: Vec<f64>) -> PyResult<f64> {
        self.0.eval(&spectrum(lam)?).map_err(err)
    }

    fn grad(&self, lam: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.grad(&spectrum(lam)?).map_err(err)
    }

    /// `lam / f(lam)`, which has `f = 1`.
    fn normalize(&self, lam: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.0.normalize(&spectrum(lam)?).map_err(err)?.into_vec())
    }

    fn eval_matrix(&self, a: Vec<Vec<f64>>) -> PyResult<f64> {
        self.0.eval_matrix(&matrix(a)?).map_err(err)
    }

    /// `(F(A), L)` with `L = Q diag(f_i) Qᵀ`.
    fn linearize(&self, a: Vec<Vec<f64>>) -> PyResult<(f64, Vec<Vec<f64>>)> {
        let lin = self.0.linearize(&matrix(a)?).map_err(err)?;
        Ok((lin.value, lin.matrix.rows()))
    }

    #[getter]
    fn f_one(&self) -> f64 {
        self.0.f_one()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn cone(&self) -> PyCone {
        PyCone(self.0.cone)
    }

    fn audit(&self, py: Python<'_>, samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let report = py.detach(|| audit_operator(&self.0, samples, seed)).map_err(err)?;
        to_py(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("Operator({})", self.0)
    }
}

#[pyclass(frozen, skip_from_py_object, name = "Domain")]
#[derive(Clone)]
struct PyDomain(DomainSpec);

#[pymethods]
impl PyDomain {
    #[staticmethod]
    fn ball(center: Vec<f64>, radius: f64) -> PyResult<Self> {
        Ok(Self(DomainSpec::ball(center, radius).map_err(err)?))
    }

    #[staticmethod]
    #[pyo3(name = "box")]
    fn cuboid(lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Self> {
        Ok(Self(DomainSpec::cuboid(lo, hi).map_err(err)?))
    }

    #[staticmethod]
    fn unit_ball(n: usize) -> PyResult<Self> {
        Ok(Self(DomainSpec::unit_ball(n).map_err(err)?))
    }

    /// `[−1/2, 1/2]^n`.
    #[staticmethod]
    fn unit_box(n: usize) -> PyResult<Self> {
        Ok(Self(DomainSpec::unit_box(n).map_err(err)?))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __repr__(&self) -> String {
        format!("Domain({:?})", self.0.shape())
    }
}

#[pyclass(frozen, name = "Solution")]
struct PySolution {
    report: SolveReport,
    op: OperatorSpec,
}

impl PySolution {
    fn field(&self) -> &GridField {
        &self.report.field
    }
}

#[pymethods]
impl PySolution {
    #[getter]
    fn residual_max(&self) -> f64 {
        self.report.residual_max
    }

    #[getter]
    fn newton_iterations(&self) -> usize {
        self.report.newton_iterations
    }

    #[getter]
    fn admissible(&self) -> bool {
        self.report.admissible
    }

    #[getter]
    fn h(&self) -> f64 {
        self.report.h
    }

    fn summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.report.summary())
    }

    /// `(positions, values)` of every interior node.
    fn interior(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let grid = self.field().grid();
        let nodes = grid.interior_nodes();
        (nodes.iter().map(|&i| grid.position(i)).collect(), nodes.iter().map(|&i| self.field().value(i)).collect())
    }

    /// Multilinear interpolation; `None` outside the grid.
    fn __call__(&self, x: Vec<f64>) -> Option<f64> {
        self.field().interpolate(&x)
    }

    fn to_csv(&self) -> String {
        self.field().to_csv()
    }

    /// `which` is `d`, `cns`, `khessian` or `pma`.
    #[pyo3(signature = (which, D1 = None, D2 = None, R = None, A = None))]
    #[allow(non_snake_case)]
    fn check_condition(
        &self,
        py: Python<'_>,
        which: &str,
        D1: Option<f64>,
        D2: Option<f64>,
        R: Option<f64>,
        A: Option<f64>,
    ) -> PyResult<Py<PyAny>> {
        let id: ConditionId = which.parse().map_err(err)?;
        let params = ConditionParams { d1: D1, d2: D2, r: R, a: A };
        let report = py.detach(|| field_condition_scan(&self.op, self.field(), id, &params)).map_err(err)?;
        to_py(py, &report)
    }

    /// Estimate functional with default exponents unless given; box domains
    /// drop nodes within four cells of a corner unless `corner_clip` says otherwise.
    #[pyo3(signature = (alpha = None, beta = None, corner_clip = None))]
    fn estimate(&self, py: Python<'_>, alpha: Option<f64>, beta: Option<f64>, corner_clip: Option<f64>) -> PyResult<Py<PyAny>> {
        let (a0, b0) = default_exponents_for(&self.op);
        let clip = corner_clip.or((!self.field().grid().domain().is_ball()).then_some(DEFAULT_CORNER_CLIP));
        let opts = EstimateOptions { alpha: alpha.unwrap_or(a0), beta: beta.unwrap_or(b0), corner_clip: clip };
        to_py(py, &estimate_functional_with(self.field(), &opts).map_err(err)?)
    }

    fn c0_check(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &c0_check(self.field(), &self.op))
    }

    fn subsolution_ordering(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &subsolution_ordering(self.field(), &self.op))
    }

    fn liouville(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &liouville_probe(self.field()).map_err(err)?)
    }

    /// Blow-down of this solution with growth constant `growth_c`.
    #[pyo3(signature = (r_list, growth_c, per_axis = 21))]
    fn blowdown(&self, py: Python<'_>, r_list: Vec<f64>, growth_c: f64, per_axis: usize) -> PyResult<Py<PyAny>> {
        let source = BlowdownSource::Field { field: self.field().clone(), growth_c };
        let report = py.detach(|| blowdown(&source, &r_list, per_axis)).map_err(err)?;
        to_py(py, &report)
    }
}

#[pyfunction]
#[pyo3(signature = (op, domain, h, tol = 1e-10, max_iter = 50))]
fn solve(py: Python<'_>, op: &PyOperator, domain: &PyDomain, h: f64, tol: f64, max_iter: usize) -> PyResult<PySolution> {
    let opts = SolveOptions { tol, max_iter, ..SolveOptions::default() };
    let report = py.detach(|| solver::solve_with(&op.0, &domain.0, h, &opts)).map_err(err)?;
    Ok(PySolution { report, op: op.0 })
}

#[pyfunction]
#[pyo3(name = "check_condition_d")]
fn py_check_condition_d(py: Python<'_>, op: &PyOperator, lam: Vec<f64>, d1: f64, d2: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &check_condition_d(&op.0, &spectrum(lam)?, d1, d2).map_err(err)?)
}

#[pyfunction]
#[pyo3(name = "check_cns")]
fn py_check_cns(py: Python<'_>, cone: &PyCone, lam: Vec<f64>, r: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &check_cns(&cone.0, &spectrum(lam)?, r).map_err(err)?)
}

#[pyfunction]
#[pyo3(name = "check_k_hessian_lower_bound")]
fn py_check_k_hessian_lower_bound(py: Python<'_>, lam: Vec<f64>, k: usize, a: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &check_k_hessian_lower_bound(&spectrum(lam)?, k, a).map_err(err)?)
}

#[pyfunction]
#[pyo3(name = "check_pma_partial_sums")]
fn py_check_pma_partial_sums(py: Python<'_>, lam: Vec<f64>, p: usize, a: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &check_pma_partial_sums(&spectrum(lam)?, p, a).map_err(err)?)
}

/// Rows of a refinement study; boxes are corner-clipped.
#[pyfunction]
#[pyo3(name = "refinement_study", signature = (op, domain, h_list, alpha = None, beta = None))]
fn py_refinement_study(
    py: Python<'_>,
    op: &PyOperator,
    domain: &PyDomain,
    h_list: Vec<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let (a0, b0) = default_exponents_for(&op.0);
    let study = py
        .detach(|| refinement_study(&op.0, &domain.0, &h_list, alpha.unwrap_or(a0), beta.unwrap_or(b0)))
        .map_err(err)?;
    to_py(py, &study.rows)
}

/// Blow-down of `u = a|x|²/2` in dimension `n`.
#[pyfunction]
#[pyo3(signature = (a, n, r_list, per_axis = 21, growth_c = None))]
fn blowdown_radial(
    py: Python<'_>,
    a: f64,
    n: usize,
    r_list: Vec<f64>,
    per_axis: usize,
    growth_c: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let mut src = AnalyticSource::radial(a, n).map_err(err)?;
    if let Some(c) = growth_c {
        src.growth_c = c;
    }
    let report = blowdown(&BlowdownSource::Analytic(src), &r_list, per_axis).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn hessian(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HessianError", m.py().get_type::<HessianError>())?;
    m.add_class::<PyCone>()?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PyDomain>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(sigma, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_all, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_partial, m)?)?;
    m.add_function(wrap_pyfunction!(eigh, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(py_check_condition_d, m)?)?;
    m.add_function(wrap_pyfunction!(py_check_cns, m)?)?;
    m.add_function(wrap_pyfunction!(py_check_k_hessian_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(py_check_pma_partial_sums, m)?)?;
    m.add_function(wrap_pyfunction!(py_refinement_study, m)?)?;
    m.add_function(wrap_pyfunction!(blowdown_radial, m)?)?;
    Ok(())
}
