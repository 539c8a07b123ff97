//! Iterative solvers: MINRES, conjugate gradients tolerant of indefinite
//! preconditioners, restarted GMRES with true-residual stopping, nested
//! FGMRES-GMRES, BiCGStab with fractional iteration accounting, and the
//! two-level MINRES-CG / MINRES-CG* drivers.
//!
//! All stopping decisions use the true relative residual `||b - A x|| / ||b||`
//! recomputed with an explicit operator application, never the preconditioned
//! residual. Failures are reported in [`SolveReport::failure_kind`] rather
//! than as errors: a solve always returns its best iterate.

mod bicgstab;
mod gmres;
mod minres;
mod nested;
mod pcg;

pub use bicgstab::bicgstab;
pub use gmres::{fgmres_gmres, gmres_restarted};
pub use minres::minres;
pub use nested::{minres_cg, minres_cg_star};
pub use pcg::{pcg, pcg_observed};

use serde::Serialize;

use crate::sparse::SparseSymMatrix;

/// Apply-to-vector contract `y = op(x)` for the operators solvers iterate on.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

impl LinearOperator for SparseSymMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

impl LinearOperator for crate::precond::DeflatedOperator<'_> {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        DeflatedOperator::apply_into(self, x, y)
    }
}

use crate::precond::DeflatedOperator;

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
}

/// Dense operator wrapper, mostly a test oracle.
pub struct DenseOperator {
    m: nalgebra::DMatrix<f64>,
}

impl DenseOperator {
    pub fn new(m: nalgebra::DMatrix<f64>) -> Self {
        Self { m }
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let v = nalgebra::DVector::from_row_slice(x);
        let out = &self.m * v;
        y.copy_from_slice(out.as_slice());
    }
}

/// Operator from a closure.
pub struct FnOperator<F: Fn(&[f64], &mut [f64]) + Sync> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Solver configuration shared by the whole fleet.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    /// Relative residual target `||b - A x|| / ||b||`.
    pub rel_tol: f64,
    /// Total iteration cap (fractional iterations count toward it).
    pub max_iters: usize,
    /// Restart length for GMRES and outer FGMRES.
    pub restart: usize,
    /// Restart length of the inner GMRES in FGMRES-GMRES.
    pub restart_inner: usize,
    /// Relative tolerance of inner solves in the nested schemes.
    pub inner_tol: f64,
    /// Per-application cap on inner iterations.
    pub inner_max_iters: usize,
    /// Initial guess; zero when absent.
    pub x0: Option<Vec<f64>>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-5,
            max_iters: 20_000,
            restart: 120,
            restart_inner: 120,
            inner_tol: 1e-3,
            inner_max_iters: 20_000,
            x0: None,
        }
    }
}

/// How a solve ended when it did not converge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    None,
    MaxIters,
    Stagnation,
    ScalarBreakdown,
}

impl FailureKind {
    /// Table marker: ok, dagger (max iterations), double dagger
    /// (stagnation), asterisk (scalar breakdown).
    pub fn marker(&self) -> &'static str {
        match self {
            FailureKind::None => "ok",
            FailureKind::MaxIters => "\u{2020}",
            FailureKind::Stagnation => "\u{2021}",
            FailureKind::ScalarBreakdown => "\u{2217}",
        }
    }
}

/// Outcome of a solve: convergence flag, iteration counts (with fractional
/// outer counts), the true-residual history, and inner-iteration accounting
/// for the nested schemes.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub outer_iters: f64,
    pub inner_iters_total: usize,
    pub inner_iters_avg: f64,
    pub true_residual_history: Vec<f64>,
    pub failure_kind: FailureKind,
    /// Inner iterations consumed by each outer step (nested schemes only).
    pub inner_iters_per_outer: Vec<usize>,
    /// GMRES-style (restart cycle, step within cycle) at termination.
    pub gmres_cycles: Option<(usize, usize)>,
}

impl SolveReport {
    pub(crate) fn new() -> Self {
        Self {
            converged: false,
            outer_iters: 0.0,
            inner_iters_total: 0,
            inner_iters_avg: 0.0,
            true_residual_history: Vec::new(),
            failure_kind: FailureKind::None,
            inner_iters_per_outer: Vec::new(),
            gmres_cycles: None,
        }
    }

    /// Flattened GMRES total `(o - 1) m + i`.
    pub fn gmres_flattened(&self, restart: usize) -> Option<usize> {
        self.gmres_cycles.map(|(o, i)| (o - 1) * restart + i)
    }

    pub fn status_marker(&self) -> &'static str {
        self.failure_kind.marker()
    }
}

// Shared stagnation rule: over a 50-iteration window the relative residual
// must improve by at least 1e-14 relative, otherwise the solve is flagged.
pub(crate) const STAGNATION_WINDOW: usize = 50;
pub(crate) const STAGNATION_IMPROVEMENT: f64 = 1e-14;

pub(crate) fn stagnated(history: &[f64]) -> bool {
    if history.len() <= STAGNATION_WINDOW {
        return false;
    }
    let old = history[history.len() - 1 - STAGNATION_WINDOW];
    let cur = history[history.len() - 1];
    old - cur < STAGNATION_IMPROVEMENT * old
}

pub(crate) fn residual_norm(op: &dyn LinearOperator, x: &[f64], b: &[f64], buf: &mut [f64]) -> f64 {
    op.apply_into(x, buf);
    b.iter().zip(buf.iter()).map(|(bi, axi)| (bi - axi) * (bi - axi)).sum::<f64>().sqrt()
}
