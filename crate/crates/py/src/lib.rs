//! Python bindings for the indefsolve solver library.
//!
//! Exposes the sparse symmetric matrix type, deflation basis computation and
//! the solver fleet behind the same spec strings as the CLI. Vectors cross
//! the boundary as plain Python lists; reports come back as dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use indefsolve::bench::{run_single_solve, SolverSpec};
use indefsolve::eig::{negative_eigenpairs, DeflationBasis, EigConfig};
use indefsolve::krylov::{SolveConfig, SolveReport};
use indefsolve::precond::PrecondSpec;
use indefsolve::shiftreal::{
    run_sweep, solve_shifted, synthetic_qep, Gamma, InnerSolverCache, ShiftParams,
    ShiftSolveConfig, SweepSource, SweepSpec,
};
use indefsolve::sparse::{load_matrix_market, save_matrix_market, DenseVector};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Sparse real symmetric matrix in CSR storage (full pattern).
#[pyclass(name = "SparseMatrix")]
#[derive(Clone)]
struct PySparseMatrix {
    inner: indefsolve::SparseSymMatrix,
}

#[pymethods]
impl PySparseMatrix {
    /// Load a coordinate Matrix Market file (symmetric, real; .gz works).
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: load_matrix_market(path).map_err(value_err)? })
    }

    /// Build from lower-triangle triplets (row >= col, 0-based).
    #[staticmethod]
    fn from_triplets(n: usize, rows: Vec<usize>, cols: Vec<usize>, values: Vec<f64>) -> PyResult<Self> {
        if rows.len() != cols.len() || rows.len() != values.len() {
            return Err(PyValueError::new_err("rows, cols and values must have equal length"));
        }
        let triplets: Vec<(usize, usize, f64)> = rows
            .into_iter()
            .zip(cols)
            .zip(values)
            .map(|((i, j), v)| (i, j, v))
            .collect();
        Ok(Self {
            inner: indefsolve::SparseSymMatrix::from_lower_triplets(n, &triplets)
                .map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn identity(n: usize) -> Self {
        Self { inner: indefsolve::SparseSymMatrix::identity(n) }
    }

    #[staticmethod]
    fn diagonal(entries: Vec<f64>) -> Self {
        Self { inner: indefsolve::SparseSymMatrix::diagonal(&entries) }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    /// y = A x
    fn matvec(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let xv = DenseVector::new(x).map_err(value_err)?;
        Ok(self.inner.matvec(&xv).map_err(value_err)?.into_vec())
    }

    /// A - sigma I
    fn shift(&self, sigma: f64) -> Self {
        Self { inner: self.inner.shift_diagonal(sigma) }
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_matrix_market(&self.inner, path).map_err(runtime_err)
    }

    fn __repr__(&self) -> String {
        format!("SparseMatrix(n={}, nnz={})", self.inner.n(), self.inner.nnz())
    }
}

/// Orthonormal basis for the negative eigenpairs of a matrix.
#[pyclass(name = "DeflationBasis")]
struct PyDeflationBasis {
    inner: DeflationBasis,
}

#[pymethods]
impl PyDeflationBasis {
    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.lambda().to_vec()
    }

    #[getter]
    fn residual_norms(&self) -> Vec<f64> {
        self.inner.residual_norms().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("DeflationBasis(n={}, k={})", self.inner.n(), self.inner.k())
    }
}

/// Compute all negative eigenpairs of a symmetric matrix.
#[pyfunction]
#[pyo3(signature = (matrix, eig_tol=1e-8, dense_threshold=2000))]
fn compute_deflation_basis(
    matrix: &PySparseMatrix,
    eig_tol: f64,
    dense_threshold: usize,
) -> PyResult<PyDeflationBasis> {
    let cfg = EigConfig { eig_tol, dense_threshold, ..Default::default() };
    Ok(PyDeflationBasis { inner: negative_eigenpairs(&matrix.inner, &cfg).map_err(runtime_err)? })
}

fn report_dict<'py>(py: Python<'py>, report: &SolveReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("converged", report.converged)?;
    d.set_item("outer_iters", report.outer_iters)?;
    d.set_item("inner_iters_total", report.inner_iters_total)?;
    d.set_item("inner_iters_avg", report.inner_iters_avg)?;
    d.set_item("status", report.status_marker())?;
    d.set_item("residual_history", report.true_residual_history.clone())?;
    if let Some((o, i)) = report.gmres_cycles {
        d.set_item("gmres_cycles", (o, i))?;
    }
    Ok(d)
}

/// Solve `A x = b` with a solver/preconditioner pair given as spec strings
/// (same grammar as the CLI). Returns `(x, report)`.
#[pyfunction]
#[pyo3(signature = (matrix, b, solver="minres-cg", precond="ilu0", rel_tol=1e-5,
                    inner_tol=1e-3, max_iters=20_000, eig_tol=1e-8))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    matrix: &PySparseMatrix,
    b: Vec<f64>,
    solver: &str,
    precond: &str,
    rel_tol: f64,
    inner_tol: f64,
    max_iters: usize,
    eig_tol: f64,
) -> PyResult<(Vec<f64>, Py<PyDict>)> {
    let solver = SolverSpec::parse(solver).map_err(value_err)?;
    let precond = PrecondSpec::parse(precond).map_err(value_err)?;
    let basis = if solver.needs_basis() || precond.needs_basis() {
        let cfg = EigConfig { eig_tol, ..Default::default() };
        Some(negative_eigenpairs(&matrix.inner, &cfg).map_err(runtime_err)?)
    } else {
        None
    };
    let cfg = SolveConfig {
        rel_tol,
        inner_tol,
        max_iters,
        inner_max_iters: max_iters,
        ..Default::default()
    };
    let (x, report) =
        run_single_solve(&matrix.inner, &solver, &precond, &b, &cfg, basis.as_ref())
            .map_err(runtime_err)?;
    Ok((x, report_dict(py, &report)?.into()))
}

/// Solve the complex shifted QEP system `(gamma B - A)(x+iy) = f+ig` on a
/// synthetic instance through the real-equivalent pipeline. Returns
/// `(x, y, report)`.
#[pyfunction]
#[pyo3(signature = (n, seed, omega, omega_ref, gamma_re, gamma_im, f, g, rel_tol=1e-8))]
#[allow(clippy::too_many_arguments)]
fn solve_shifted_synthetic(
    py: Python<'_>,
    n: usize,
    seed: u64,
    omega: f64,
    omega_ref: f64,
    gamma_re: f64,
    gamma_im: f64,
    f: Vec<f64>,
    g: Vec<f64>,
    rel_tol: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, Py<PyDict>)> {
    let parts = synthetic_qep(n, seed);
    let params = ShiftParams::new(omega, omega_ref, Gamma::new(gamma_re, gamma_im))
        .map_err(value_err)?;
    if f.len() != 2 * n || g.len() != 2 * n {
        return Err(PyValueError::new_err(format!(
            "rhs parts must have length 2n = {}",
            2 * n
        )));
    }
    let mut cfg = ShiftSolveConfig::default();
    cfg.outer.rel_tol = rel_tol;
    let cache = InnerSolverCache::new();
    let (x, y, report) =
        solve_shifted(&parts, &params, &f, &g, &cfg, &cache).map_err(runtime_err)?;
    Ok((x, y, report_dict(py, &report)?.into()))
}

/// Shift-grid sweep over a synthetic QEP instance; returns one dict per
/// grid point with the MINRES-CG iteration counts of the inner solve.
#[pyfunction]
#[pyo3(signature = (n, seed, re_min, re_max, re_steps, im_min, im_max, im_steps,
                    rel_tol=1e-3, inner_tol=1e-2, max_iters=2000))]
#[allow(clippy::too_many_arguments)]
fn sweep_synthetic(
    py: Python<'_>,
    n: usize,
    seed: u64,
    re_min: f64,
    re_max: f64,
    re_steps: usize,
    im_min: f64,
    im_max: f64,
    im_steps: usize,
    rel_tol: f64,
    inner_tol: f64,
    max_iters: usize,
) -> PyResult<Vec<Py<PyDict>>> {
    let spec = SweepSpec {
        omega: omega_default(),
        omega_ref: 5.0,
        re_min,
        re_max,
        re_steps,
        im_min,
        im_max,
        im_steps,
        rel_tol,
        inner_tol,
        max_iters,
        precond: PrecondSpec::Ilu0,
        seed,
        source: SweepSource::Synthetic { n },
    };
    let parts = synthetic_qep(n, seed);
    let rows = run_sweep(&spec, &parts).map_err(runtime_err)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("gamma_re", r.gamma.re)?;
            d.set_item("gamma_im", r.gamma.im)?;
            d.set_item("converged", r.converged)?;
            d.set_item("outer_iters", r.outer_iters)?;
            d.set_item("inner_avg", r.inner_avg)?;
            d.set_item("total_iters", r.total_iters)?;
            Ok(d.into())
        })
        .collect()
}

fn omega_default() -> f64 {
    2.0 * std::f64::consts::PI
}

/// Auxiliary vector count of a solver (the storage accounting table).
#[pyfunction]
#[pyo3(signature = (solver, k=0))]
fn storage_vectors(solver: &str, k: usize) -> PyResult<Option<usize>> {
    Ok(SolverSpec::parse(solver).map_err(value_err)?.storage_vectors(k))
}

#[pymodule]
fn indefsolve(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySparseMatrix>()?;
    m.add_class::<PyDeflationBasis>()?;
    m.add_function(wrap_pyfunction!(compute_deflation_basis, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_shifted_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(storage_vectors, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
