//! Python extension module `_phicgc`: the scalar/dense φ kernels, the heat
//! benchmark problems, and both solver entry points. Vectors cross the
//! boundary as plain lists of floats, dense matrices as row-major nested
//! lists; heavy solves release the interpreter lock.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use phicgc::cgc::{cgc_multigrid, CgcConfig};
use phicgc::krylov::{phi_rt_solve, DEFAULT_MAX_DIM};
use phicgc::oracle;
use phicgc::problems::{build_hierarchy, heat1d, heat3d, HeatProblem};
use phicgc::smallmat::{self, DenseMatrix};
use phicgc::transfer::TransferMethod;

fn to_py_err(e: phicgc::Error) -> PyErr {
    use phicgc::Error::*;
    match e {
        NoProgress { .. } | RestartBudgetExceeded { .. } | AtLevel { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn dense_from_rows(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, |r| r.len());
    if n_rows == 0 || n_cols == 0 {
        return Err(PyValueError::new_err("matrix must be nonempty"));
    }
    let mut entries = Vec::with_capacity(n_rows * n_cols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n_cols {
            return Err(PyValueError::new_err(format!(
                "row {i} has {} entries, row 0 has {n_cols}",
                row.len()
            )));
        }
        entries.extend_from_slice(row);
    }
    DenseMatrix::from_row_major(n_rows, n_cols, entries).map_err(to_py_err)
}

fn dense_to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.n_rows()).map(|i| m.row(i).to_vec()).collect()
}

fn parse_transfer(name: &str) -> PyResult<TransferMethod> {
    match name {
        "cubic-spline" => Ok(TransferMethod::CubicSpline),
        "linear" => Ok(TransferMethod::Linear),
        other => Err(PyValueError::new_err(format!(
            "transfer must be 'cubic-spline' or 'linear', got '{other}'"
        ))),
    }
}

/// φ(z) = (e^z − 1)/z with φ(0) = 1.
#[pyfunction]
fn phi(z: f64) -> f64 {
    smallmat::phi_scalar(z)
}

/// Dense matrix exponential (scaling-and-squaring Padé), row-major lists.
#[pyfunction]
fn expm(m: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let a = dense_from_rows(m)?;
    if !a.is_square() {
        return Err(PyValueError::new_err("expm needs a square matrix"));
    }
    Ok(dense_to_rows(&smallmat::expm(&a).map_err(to_py_err)?))
}

/// u(t) = t·φ(−tH)·β·e₁ for a small square H.
#[pyfunction]
fn phi_action(h: Vec<Vec<f64>>, t: f64, beta: f64) -> PyResult<Vec<f64>> {
    let a = dense_from_rows(h)?;
    smallmat::phi_action(&a, t, beta).map_err(to_py_err)
}

/// ‖y − y_ref‖₂ / ‖y_ref‖₂.
#[pyfunction]
fn relative_error(y: Vec<f64>, y_ref: Vec<f64>) -> PyResult<f64> {
    oracle::relative_error(&y, &y_ref).map_err(to_py_err)
}

/// Result of a single-grid restarted Krylov solve.
#[pyclass(name = "SolveResult", frozen)]
struct PySolveResult {
    #[pyo3(get)]
    y: Vec<f64>,
    #[pyo3(get)]
    matvecs: u64,
    #[pyo3(get)]
    restarts: usize,
    #[pyo3(get)]
    residual_bound: f64,
    #[pyo3(get)]
    omega_ritz: f64,
    #[pyo3(get)]
    beta: f64,
}

#[pymethods]
impl PySolveResult {
    fn __repr__(&self) -> String {
        format!(
            "SolveResult(matvecs={}, restarts={}, residual_bound={:.3e})",
            self.matvecs, self.restarts, self.residual_bound
        )
    }
}

/// One level of a multilevel run: solver effort and tolerance bookkeeping.
#[pyclass(name = "LevelReport", frozen)]
struct PyLevelReport {
    #[pyo3(get)]
    level: usize,
    #[pyo3(get)]
    matvecs: u64,
    #[pyo3(get)]
    beta: f64,
    #[pyo3(get)]
    tolerance: f64,
    #[pyo3(get)]
    residual_bound: f64,
    #[pyo3(get)]
    estimate: Option<f64>,
}

#[pymethods]
impl PyLevelReport {
    fn __repr__(&self) -> String {
        format!(
            "LevelReport(level={}, matvecs={}, tolerance={:.3e})",
            self.level, self.matvecs, self.tolerance
        )
    }
}

/// Result of a multilevel coarse-grid-correction solve.
#[pyclass(name = "CgcResult", frozen)]
struct PyCgcResult {
    #[pyo3(get)]
    y: Vec<f64>,
    #[pyo3(get)]
    estimate: f64,
    #[pyo3(get)]
    beta: f64,
    #[pyo3(get)]
    rel_tol: f64,
    #[pyo3(get)]
    total_matvecs: u64,
    levels: Vec<Py<PyLevelReport>>,
}

#[pymethods]
impl PyCgcResult {
    #[getter]
    fn levels(&self, py: Python<'_>) -> Vec<Py<PyLevelReport>> {
        self.levels.iter().map(|l| l.clone_ref(py)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "CgcResult(levels={}, total_matvecs={}, estimate={:.3e})",
            self.levels.len(),
            self.total_matvecs,
            self.estimate
        )
    }
}

/// Heat-equation benchmark y′ = −Ay + g, y(0) = v on [0, T].
#[pyclass(name = "HeatProblem", frozen)]
struct PyHeatProblem {
    inner: HeatProblem,
}

#[pymethods]
impl PyHeatProblem {
    /// 1-D periodic problem on n nodes (n even, ≥ 4).
    #[staticmethod]
    fn heat1d(n: usize) -> PyResult<Self> {
        Ok(Self { inner: heat1d(n).map_err(to_py_err)? })
    }

    /// 3-D Dirichlet problem on an nx×ny×nz grid (even extents, ≥ 4).
    #[staticmethod]
    fn heat3d(nx: usize, ny: usize, nz: usize) -> PyResult<Self> {
        Ok(Self { inner: heat3d(nx, ny, nz).map_err(to_py_err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.operator.dim()
    }

    #[getter]
    fn extents(&self) -> Vec<usize> {
        self.inner.grid.extents().to_vec()
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.t_end
    }

    #[getter]
    fn rel_tol(&self) -> f64 {
        self.inner.rel_tol
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega
    }

    #[getter]
    fn v(&self) -> Vec<f64> {
        self.inner.v.clone()
    }

    #[getter]
    fn g(&self) -> Vec<f64> {
        self.inner.g.clone()
    }

    fn one_norm(&self) -> PyResult<f64> {
        self.inner.operator.one_norm().map_err(to_py_err)
    }

    /// A·x for the problem operator.
    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.operator.apply_new(&x).map_err(to_py_err)
    }

    /// Single-grid restarted Krylov solve to the problem's (or the given)
    /// tolerance and horizon.
    #[pyo3(signature = (t=None, rel_tol=None, max_dim=DEFAULT_MAX_DIM))]
    fn solve(
        &self,
        py: Python<'_>,
        t: Option<f64>,
        rel_tol: Option<f64>,
        max_dim: usize,
    ) -> PyResult<PySolveResult> {
        let p = &self.inner;
        let t = t.unwrap_or(p.t_end);
        let tol = rel_tol.unwrap_or(p.rel_tol);
        let r = py
            .detach(|| phi_rt_solve(&p.operator, &p.v, &p.g, t, tol, max_dim))
            .map_err(to_py_err)?;
        Ok(PySolveResult {
            y: r.y,
            matvecs: r.matvecs,
            restarts: r.restarts,
            residual_bound: r.residual_bound,
            omega_ritz: r.omega_ritz,
            beta: r.beta,
        })
    }

    /// Multilevel coarse-grid-correction solve.
    #[pyo3(signature = (levels=2, t=None, rel_tol=None, transfer="cubic-spline", max_dim=DEFAULT_MAX_DIM))]
    fn solve_multigrid(
        &self,
        py: Python<'_>,
        levels: usize,
        t: Option<f64>,
        rel_tol: Option<f64>,
        transfer: &str,
        max_dim: usize,
    ) -> PyResult<PyCgcResult> {
        let p = &self.inner;
        let method = parse_transfer(transfer)?;
        let t = t.unwrap_or(p.t_end);
        let tol = rel_tol.unwrap_or(p.rel_tol);
        let (y, report) = py
            .detach(|| {
                let h = build_hierarchy(p, levels, method)?;
                let cfg = CgcConfig {
                    rel_tol: tol,
                    num_levels: levels,
                    krylov_max_dim: max_dim,
                    ..Default::default()
                };
                cgc_multigrid(&h, &p.v, &p.g, t, &cfg)
            })
            .map_err(to_py_err)?;
        let level_objs = report
            .levels
            .iter()
            .map(|l| {
                Py::new(
                    py,
                    PyLevelReport {
                        level: l.level,
                        matvecs: l.matvecs,
                        beta: l.beta,
                        tolerance: l.effective_rel_tol,
                        residual_bound: l.achieved_residual_bound,
                        estimate: l.coarse_error_estimate,
                    },
                )
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(PyCgcResult {
            y,
            estimate: report.total_estimate,
            beta: report.beta_root,
            rel_tol: report.rel_tol_root,
            total_matvecs: report.total_matvecs(),
            levels: level_objs,
        })
    }

    /// Tight-tolerance reference solution on the same grid.
    #[pyo3(signature = (t=None))]
    fn reference(&self, py: Python<'_>, t: Option<f64>) -> PyResult<Vec<f64>> {
        let p = &self.inner;
        let t = t.unwrap_or(p.t_end);
        py.detach(|| oracle::reference_solution(p, t)).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        let e = self
            .inner
            .grid
            .extents()
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join("x");
        format!("HeatProblem({e}, T={}, rel_tol={:.1e})", self.inner.t_end, self.inner.rel_tol)
    }
}

#[pymodule]
fn _phicgc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(expm, m)?)?;
    m.add_function(wrap_pyfunction!(phi_action, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_class::<PyHeatProblem>()?;
    m.add_class::<PySolveResult>()?;
    m.add_class::<PyLevelReport>()?;
    m.add_class::<PyCgcResult>()?;
    Ok(())
}
