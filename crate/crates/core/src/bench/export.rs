//! Result serialization: summary CSV, full JSON, residual histories.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{ExperimentOutcome, ResultRow};
use crate::krylov::SolveReport;

/// Summary CSV, one row per solve. `wall_time` is the last column so that
/// byte-level determinism holds for everything before it.
pub fn write_results_csv<W: Write>(out: &mut W, rows: &[ResultRow]) -> std::io::Result<()> {
    writeln!(
        out,
        "matrix,n,nnz,k,solver,precond,outer,inner_avg,total,gmres_split,status,storage_vectors,wall_time"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.matrix,
            r.n,
            r.nnz,
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            r.solver,
            r.precond,
            r.outer,
            r.inner_avg,
            r.total,
            r.gmres_split.clone().unwrap_or_default(),
            r.status,
            r.storage_vectors.map(|s| s.to_string()).unwrap_or_default(),
            r.wall_time,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    matrix: &'a str,
    n: usize,
    nnz: usize,
    rows: &'a [ResultRow],
    reports: &'a [Option<SolveReport>],
}

/// Full JSON document: rows plus per-solve reports with complete residual
/// histories.
pub fn write_results_json<W: Write>(
    out: &mut W,
    outcome: &ExperimentOutcome,
) -> std::io::Result<()> {
    let doc = JsonDocument {
        matrix: &outcome.matrix_name,
        n: outcome.n,
        nnz: outcome.nnz,
        rows: &outcome.rows,
        reports: &outcome.reports,
    };
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    writeln!(out)
}

// Iteration indices for a history export. Nested MINRES-CG histories are
// indexed by the cumulative inner iterations consumed at each outer step;
// everything else counts outer steps, with a possible fractional final
// index from a BiCGStab half step.
fn history_indices(report: &SolveReport) -> Vec<f64> {
    let len = report.true_residual_history.len();
    if !report.inner_iters_per_outer.is_empty() && report.gmres_cycles.is_none() {
        let mut out = Vec::with_capacity(len);
        out.push(0.0);
        let mut cum = 0usize;
        for j in 1..len {
            // outer step j consumed preconditioner applications 0..=j
            let upto = j.min(report.inner_iters_per_outer.len().saturating_sub(1));
            cum = report.inner_iters_per_outer[..=upto].iter().sum();
            out.push(cum as f64);
        }
        let _ = cum;
        out
    } else {
        let mut out: Vec<f64> = (0..len).map(|i| i as f64).collect();
        if report.outer_iters.fract() != 0.0 {
            if let Some(last) = out.last_mut() {
                *last = report.outer_iters;
            }
        }
        out
    }
}

/// CSV `(iteration_index, relative_residual)` per recorded residual.
pub fn residual_history_export(report: &SolveReport, path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "iteration_index,relative_residual")?;
    for (i, r) in history_indices(report).iter().zip(&report.true_residual_history) {
        writeln!(f, "{},{}", i, r)?;
    }
    Ok(())
}
