use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{minres, pcg, FailureKind, SolveConfig, SolveReport};
use crate::eig::DeflationBasis;
use crate::precond::{DeflatedOperator, PreconditionerAction, SmwInverse};
use crate::sparse::SparseSymMatrix;

// Preconditioner action that solves `M z = y` with inner CG each time it is
// applied, recording per-application iteration counts and charging them
// against a shared budget. When the budget runs dry the output is poisoned
// so the outer iteration stops immediately; the driver rewrites that
// breakdown as a max-iterations failure.
struct InnerCgAction<'a> {
    op: &'a DeflatedOperator<'a>,
    precond: &'a dyn PreconditionerAction,
    inner_tol: f64,
    inner_cap: usize,
    budget: AtomicUsize,
    exhausted: AtomicBool,
    counts: Mutex<Vec<usize>>,
}

impl PreconditionerAction for InnerCgAction<'_> {
    fn dim(&self) -> usize {
        self.op.n()
    }

    fn apply_into(&self, y: &[f64], z: &mut [f64]) {
        let remaining = self.budget.load(Ordering::Relaxed);
        if remaining == 0 {
            self.exhausted.store(true, Ordering::Relaxed);
            z.fill(f64::NAN);
            return;
        }
        let cfg = SolveConfig {
            rel_tol: self.inner_tol,
            max_iters: self.inner_cap.min(remaining),
            x0: None,
            ..Default::default()
        };
        // inner failures are tolerated: the best iterate still serves as an
        // (inexact) preconditioner application
        let (x, rep) = pcg(self.op, &self.precond, y, &cfg);
        let used = rep.outer_iters as usize;
        self.counts.lock().unwrap().push(used);
        self.budget.fetch_sub(used.min(remaining), Ordering::Relaxed);
        z.copy_from_slice(&x);
    }

    fn label(&self) -> String {
        format!("cg({})", self.precond.label())
    }
}

fn nested_drive(
    a: &SparseSymMatrix,
    basis: &DeflationBasis,
    inner_precond: &dyn PreconditionerAction,
    b: &[f64],
    cfg: &SolveConfig,
) -> (Vec<f64>, SolveReport) {
    let op = DeflatedOperator::new(a, basis).expect("basis dimension matches matrix");
    let action = InnerCgAction {
        op: &op,
        precond: inner_precond,
        inner_tol: cfg.inner_tol,
        inner_cap: cfg.inner_max_iters,
        budget: AtomicUsize::new(cfg.max_iters),
        exhausted: AtomicBool::new(false),
        counts: Mutex::new(Vec::new()),
    };
    let (x, mut report) = minres(&a, &action, b, cfg);
    if action.exhausted.load(Ordering::Relaxed)
        && report.failure_kind == FailureKind::ScalarBreakdown
    {
        report.failure_kind = FailureKind::MaxIters;
    }
    let counts = action.counts.into_inner().unwrap();
    report.inner_iters_total = counts.iter().sum();
    report.inner_iters_per_outer = counts;
    report.inner_iters_avg = if report.outer_iters > 0.0 {
        report.inner_iters_total as f64 / report.outer_iters
    } else {
        0.0
    };
    (x, report)
}

/// Two-level MINRES-CG: outer MINRES on `A` preconditioned by inner CG
/// solves of `M z = y` with `M = A + 2 V |L| V^T`, the inner CG itself
/// preconditioned by `m_cg` (typically incomplete factors of `A`, which are
/// indefinite - that is fine for the inner iteration).
///
/// Inner solves start from zero each outer step and run to `cfg.inner_tol`
/// or `cfg.inner_max_iters`; `cfg.max_iters` caps the *total* inner count.
/// The report's `inner_iters_avg` is total-inner over outer-count.
pub fn minres_cg(
    a: &SparseSymMatrix,
    basis: &DeflationBasis,
    m_cg: &dyn PreconditionerAction,
    b: &[f64],
    cfg: &SolveConfig,
) -> (Vec<f64>, SolveReport) {
    nested_drive(a, basis, m_cg, b, cfg)
}

/// MINRES-CG*: the inner CG preconditioner is the Sherman-Morrison-Woodbury
/// composition `Ainv_approx - 2 V L^{-1} V^T` instead of `Ainv_approx`
/// alone, which folds the deflation into the inverse side at `O(k n)` extra
/// cost per application and no extra storage.
pub fn minres_cg_star(
    a: &SparseSymMatrix,
    basis: &DeflationBasis,
    inner_approx_inverse: &dyn PreconditionerAction,
    b: &[f64],
    cfg: &SolveConfig,
) -> (Vec<f64>, SolveReport) {
    let smw = SmwInverse::new(Box::new(inner_approx_inverse), basis)
        .expect("basis dimension matches inner solver");
    nested_drive(a, basis, &smw, b, cfg)
}
