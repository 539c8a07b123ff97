//! Benchmark harness: load or fetch test matrices, run solver-by-
//! preconditioner grids under the experiment protocol (random right-hand
//! sides, true-residual stopping, fractional iteration accounting), and
//! emit result tables and residual histories.

mod export;
mod fetch;

pub use export::{residual_history_export, write_results_csv, write_results_json};
pub use fetch::{fetch_matrix, known_ids, registry_entry, MatrixEntry};

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::eig::{negative_eigenpairs_cached, DeflationBasis, EigConfig, EigError};
use crate::krylov::{
    bicgstab, fgmres_gmres, gmres_restarted, minres, minres_cg, minres_cg_star, pcg,
    SolveConfig, SolveReport,
};
use crate::precond::{build_preconditioner, PrecondError, PrecondSpec};
use crate::sparse::{load_matrix_market, SparseError, SparseSymMatrix};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown matrix id `{id}`; known ids: {known}")]
    UnknownMatrix { id: String, known: String },
    #[error("offline mode with a cold cache for `{0}`")]
    OfflineColdCache(String),
    #[error("download failed for {url}: {detail}")]
    Download { url: String, detail: String },
    #[error("content hash mismatch for {id}: expected {expected}, got {got}")]
    HashMismatch { id: String, expected: String, got: String },
    #[error("archive for {0} does not contain the expected matrix file")]
    ArchiveLayout(String),
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("invalid solver spec `{0}`: {1}")]
    BadSolverSpec(String, String),
    #[error("rhs file: {0}")]
    RhsFile(String),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error(transparent)]
    Eig(#[from] EigError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Parsed solver spec string: `minres-cg`, `minres-cg-star`, `minres`,
/// `cg`, `gmres:<m>`, `fgmres:<m1>:<m2>`, `bicgstab`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverSpec {
    MinresCg,
    MinresCgStar,
    Minres,
    Cg,
    Gmres { m: usize },
    Fgmres { m1: usize, m2: usize },
    Bicgstab,
}

impl SolverSpec {
    pub fn parse(s: &str) -> Result<Self, BenchError> {
        let bad = |msg: &str| BenchError::BadSolverSpec(s.to_string(), msg.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["minres-cg"] => Ok(SolverSpec::MinresCg),
            ["minres-cg-star"] => Ok(SolverSpec::MinresCgStar),
            ["minres"] => Ok(SolverSpec::Minres),
            ["cg"] => Ok(SolverSpec::Cg),
            ["gmres", m] => {
                let m = m.parse().map_err(|_| bad("bad restart"))?;
                if m == 0 {
                    return Err(bad("restart must be positive"));
                }
                Ok(SolverSpec::Gmres { m })
            }
            ["fgmres", m1, m2] => {
                let m1 = m1.parse().map_err(|_| bad("bad outer restart"))?;
                let m2 = m2.parse().map_err(|_| bad("bad inner restart"))?;
                if m1 == 0 || m2 == 0 {
                    return Err(bad("restarts must be positive"));
                }
                Ok(SolverSpec::Fgmres { m1, m2 })
            }
            ["bicgstab"] => Ok(SolverSpec::Bicgstab),
            _ => Err(bad("unknown solver")),
        }
    }

    pub fn needs_basis(&self) -> bool {
        matches!(self, SolverSpec::MinresCg | SolverSpec::MinresCgStar)
    }

    /// Auxiliary vector count of the solver (the storage accounting table):
    /// MINRES 7, MINRES-CG 11+k, GMRES m+2, FGMRES-GMRES 3m+4, BiCGStab 6.
    pub fn storage_vectors(&self, k: usize) -> Option<usize> {
        match self {
            SolverSpec::Minres => Some(7),
            SolverSpec::MinresCg | SolverSpec::MinresCgStar => Some(11 + k),
            SolverSpec::Gmres { m } => Some(m + 2),
            SolverSpec::Fgmres { m1, .. } => Some(3 * m1 + 4),
            SolverSpec::Bicgstab => Some(6),
            SolverSpec::Cg => None,
        }
    }
}

impl std::fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverSpec::MinresCg => write!(f, "minres-cg"),
            SolverSpec::MinresCgStar => write!(f, "minres-cg-star"),
            SolverSpec::Minres => write!(f, "minres"),
            SolverSpec::Cg => write!(f, "cg"),
            SolverSpec::Gmres { m } => write!(f, "gmres:{}", m),
            SolverSpec::Fgmres { m1, m2 } => write!(f, "fgmres:{}:{}", m1, m2),
            SolverSpec::Bicgstab => write!(f, "bicgstab"),
        }
    }
}

/// Where the coefficient matrix comes from.
#[derive(Debug, Clone)]
pub enum MatrixSource {
    /// Matrix Market file on disk.
    Path(PathBuf),
    /// Collection id resolved through the fetch cache.
    Collection { id: String, cache_dir: PathBuf, offline: bool },
}

#[derive(Debug, Clone)]
pub enum RhsSpec {
    /// Uniform(-1, 1) entries from the experiment seed.
    Random,
    Ones,
    /// One value per line.
    File(PathBuf),
}

/// Full description of one experiment grid.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub matrix: MatrixSource,
    /// Optional diagonal shift: the solve targets `A - sigma I`.
    pub shift: Option<f64>,
    pub rhs: RhsSpec,
    pub solvers: Vec<SolverSpec>,
    pub preconds: Vec<PrecondSpec>,
    pub rel_tol: f64,
    pub inner_tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub eig: EigConfig,
    /// On-disk deflation basis cache.
    pub basis_cache_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    fn validate(&self) -> Result<(), BenchError> {
        if self.solvers.is_empty() {
            return Err(BenchError::InvalidSpec("at least one solver required".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(BenchError::InvalidSpec(format!(
                "rel_tol must be in (0, 1), got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }

    fn matrix_label(&self) -> String {
        let base = match &self.matrix {
            MatrixSource::Path(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            MatrixSource::Collection { id, .. } => id.clone(),
        };
        match self.shift {
            Some(s) => format!("{}(sigma={})", base, s),
            None => base,
        }
    }
}

/// One line of the result table.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub matrix: String,
    pub n: usize,
    pub nnz: usize,
    pub k: Option<usize>,
    pub solver: String,
    pub precond: String,
    pub outer: f64,
    pub inner_avg: f64,
    pub total: f64,
    /// `o(i)` restart convention for GMRES-family rows.
    pub gmres_split: Option<String>,
    /// ok, dagger, double-dagger, asterisk, or `setup` when the
    /// preconditioner could not be built.
    pub status: String,
    pub storage_vectors: Option<usize>,
    pub wall_time: f64,
}

/// The full outcome: ordered rows plus the solver reports that produced
/// them (None for setup failures).
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub reports: Vec<Option<SolveReport>>,
    pub matrix_name: String,
    pub n: usize,
    pub nnz: usize,
}

fn load_source(spec: &ExperimentSpec) -> Result<SparseSymMatrix, BenchError> {
    let a = match &spec.matrix {
        MatrixSource::Path(p) => load_matrix_market(p)?,
        MatrixSource::Collection { id, cache_dir, offline } => {
            let path = fetch_matrix(id, cache_dir, *offline)?;
            load_matrix_market(path)?
        }
    };
    Ok(match spec.shift {
        Some(sigma) => a.shift_diagonal(sigma),
        None => a,
    })
}

fn build_rhs(spec: &ExperimentSpec, n: usize) -> Result<Vec<f64>, BenchError> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    match &spec.rhs {
        RhsSpec::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            Ok((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        }
        RhsSpec::Ones => Ok(vec![1.0; n]),
        RhsSpec::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let vals: Result<Vec<f64>, _> =
                text.split_whitespace().map(|t| t.parse::<f64>()).collect();
            let vals = vals.map_err(|e| BenchError::RhsFile(e.to_string()))?;
            if vals.len() != n {
                return Err(BenchError::RhsFile(format!(
                    "rhs has {} entries, matrix needs {}",
                    vals.len(),
                    n
                )));
            }
            Ok(vals)
        }
    }
}

fn total_of(solver: &SolverSpec, report: &SolveReport) -> f64 {
    match solver {
        SolverSpec::MinresCg | SolverSpec::MinresCgStar => report.inner_iters_total as f64,
        SolverSpec::Fgmres { .. } => report.inner_iters_total as f64,
        SolverSpec::Gmres { m } => {
            report.gmres_flattened(*m).map(|t| t as f64).unwrap_or(report.outer_iters)
        }
        _ => report.outer_iters,
    }
}

/// Dispatch one (solver, preconditioner) pair on a matrix. The deflation
/// basis is required by the nested schemes and the `smw:` wrapper.
pub fn run_single_solve(
    a: &SparseSymMatrix,
    solver: &SolverSpec,
    precond: &PrecondSpec,
    b: &[f64],
    cfg: &SolveConfig,
    basis: Option<&DeflationBasis>,
) -> Result<(Vec<f64>, SolveReport), BenchError> {
    if (solver.needs_basis() || precond.needs_basis()) && basis.is_none() {
        return Err(BenchError::InvalidSpec(format!(
            "{} with {} needs a deflation basis",
            solver, precond
        )));
    }
    let action = build_preconditioner(a, precond, basis)?;
    let (restart, restart_inner) = match solver {
        SolverSpec::Gmres { m } => (*m, *m),
        SolverSpec::Fgmres { m1, m2 } => (*m1, *m2),
        _ => (cfg.restart, cfg.restart_inner),
    };
    let cfg = SolveConfig { restart, restart_inner, ..cfg.clone() };
    Ok(match solver {
        SolverSpec::Minres => minres(&a, &action, b, &cfg),
        SolverSpec::Cg => pcg(&a, &action, b, &cfg),
        SolverSpec::Gmres { .. } => gmres_restarted(&a, &action, b, &cfg),
        SolverSpec::Fgmres { .. } => fgmres_gmres(&a, &action, b, &cfg),
        SolverSpec::Bicgstab => bicgstab(&a, &action, b, &cfg),
        SolverSpec::MinresCg => minres_cg(a, basis.unwrap(), &action, b, &cfg),
        SolverSpec::MinresCgStar => minres_cg_star(a, basis.unwrap(), &action, b, &cfg),
    })
}

/// Run the (solver, preconditioner) grid on one matrix.
///
/// Cells run on the worker pool but results keep spec order. Solver
/// failures become status markers on their rows; only setup problems
/// (unreadable matrix, bad spec) abort the experiment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome, BenchError> {
    spec.validate()?;
    let a = load_source(spec)?;
    let n = a.n();
    let nnz = a.nnz();
    let b = build_rhs(spec, n)?;
    let matrix_name = spec.matrix_label();

    let needs_basis = spec.solvers.iter().any(|s| s.needs_basis())
        || spec.preconds.iter().any(|p| p.needs_basis());
    let basis: OnceLock<Result<DeflationBasis, String>> = OnceLock::new();
    let get_basis = || -> Result<&DeflationBasis, String> {
        basis
            .get_or_init(|| {
                negative_eigenpairs_cached(&a, &spec.eig, spec.basis_cache_dir.as_deref())
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| e.clone())
    };
    if needs_basis {
        // compute eagerly so the cost is not attributed to the first cell
        let _ = get_basis();
    }

    let cells: Vec<(usize, &SolverSpec, &PrecondSpec)> = spec
        .solvers
        .iter()
        .flat_map(|s| spec.preconds.iter().map(move |p| (s, p)))
        .enumerate()
        .map(|(i, (s, p))| (i, s, p))
        .collect();

    let mut results: Vec<(usize, ResultRow, Option<SolveReport>)> = cells
        .par_iter()
        .map(|&(idx, solver, precond)| {
            let started = Instant::now();
            let k = if solver.needs_basis() || precond.needs_basis() {
                get_basis().ok().map(|b| b.k())
            } else {
                None
            };
            let mut row = ResultRow {
                matrix: matrix_name.clone(),
                n,
                nnz,
                k,
                solver: solver.to_string(),
                precond: precond.to_string(),
                outer: 0.0,
                inner_avg: 0.0,
                total: 0.0,
                gmres_split: None,
                status: "setup".into(),
                storage_vectors: solver.storage_vectors(k.unwrap_or(0)),
                wall_time: 0.0,
            };

            let basis_ref = if solver.needs_basis() || precond.needs_basis() {
                match get_basis() {
                    Ok(b) => Some(b),
                    Err(_) => {
                        row.wall_time = started.elapsed().as_secs_f64();
                        return (idx, row, None);
                    }
                }
            } else {
                None
            };
            let cfg = SolveConfig {
                rel_tol: spec.rel_tol,
                max_iters: spec.max_iters,
                inner_tol: spec.inner_tol,
                inner_max_iters: spec.max_iters,
                x0: None,
                ..Default::default()
            };
            let (_, report) = match run_single_solve(&a, solver, precond, &b, &cfg, basis_ref) {
                Ok(out) => out,
                Err(_) => {
                    row.wall_time = started.elapsed().as_secs_f64();
                    return (idx, row, None);
                }
            };

            row.outer = report.outer_iters;
            row.inner_avg = report.inner_iters_avg;
            row.total = total_of(solver, &report);
            row.gmres_split = report.gmres_cycles.map(|(o, i)| format!("{}({})", o, i));
            row.status = report.status_marker().to_string();
            row.wall_time = started.elapsed().as_secs_f64();
            (idx, row, Some(report))
        })
        .collect();

    results.sort_by_key(|(idx, _, _)| *idx);
    let mut rows = Vec::with_capacity(results.len());
    let mut reports = Vec::with_capacity(results.len());
    for (_, row, report) in results {
        rows.push(row);
        reports.push(report);
    }
    Ok(ExperimentOutcome { rows, reports, matrix_name, n, nnz })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precond::PrecondSpec;

    fn write_identity_mtx(n: usize) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "%%MatrixMarket matrix coordinate real symmetric").unwrap();
        writeln!(f, "{} {} {}", n, n, n).unwrap();
        for i in 1..=n {
            writeln!(f, "{} {} 1.0", i, i).unwrap();
        }
        f
    }

    fn base_spec(path: PathBuf) -> ExperimentSpec {
        ExperimentSpec {
            matrix: MatrixSource::Path(path),
            shift: None,
            rhs: RhsSpec::Ones,
            solvers: vec![SolverSpec::Minres],
            preconds: vec![PrecondSpec::None],
            rel_tol: 1e-5,
            inner_tol: 1e-3,
            max_iters: 20_000,
            seed: 7,
            eig: EigConfig::default(),
            basis_cache_dir: None,
        }
    }

    #[test]
    fn solver_spec_grammar() {
        assert_eq!(SolverSpec::parse("minres-cg").unwrap(), SolverSpec::MinresCg);
        assert_eq!(SolverSpec::parse("gmres:20").unwrap(), SolverSpec::Gmres { m: 20 });
        assert_eq!(
            SolverSpec::parse("fgmres:120:120").unwrap(),
            SolverSpec::Fgmres { m1: 120, m2: 120 }
        );
        assert!(SolverSpec::parse("gmres").is_err());
        assert!(SolverSpec::parse("qmr").is_err());
        for s in ["minres-cg", "minres-cg-star", "minres", "cg", "gmres:40", "fgmres:10:20", "bicgstab"] {
            assert_eq!(SolverSpec::parse(s).unwrap().to_string(), s);
        }
    }

    #[test]
    fn storage_vector_table() {
        assert_eq!(SolverSpec::Minres.storage_vectors(54), Some(7));
        assert_eq!(SolverSpec::MinresCg.storage_vectors(54), Some(11 + 54));
        assert_eq!(SolverSpec::Gmres { m: 120 }.storage_vectors(0), Some(122));
        assert_eq!(SolverSpec::Fgmres { m1: 120, m2: 120 }.storage_vectors(0), Some(364));
        assert_eq!(SolverSpec::Bicgstab.storage_vectors(0), Some(6));
    }

    #[test]
    fn identity_minres_single_row_ok() {
        let f = write_identity_mtx(10);
        let spec = base_spec(f.path().to_path_buf());
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.rows.len(), 1);
        let row = &out.rows[0];
        assert_eq!(row.status, "ok");
        assert_eq!(row.outer, 1.0);
        assert_eq!(row.n, 10);
    }

    #[test]
    fn grid_keeps_spec_order_and_is_deterministic() {
        let f = write_identity_mtx(8);
        let mut spec = base_spec(f.path().to_path_buf());
        spec.solvers = vec![
            SolverSpec::Minres,
            SolverSpec::Bicgstab,
            SolverSpec::Gmres { m: 4 },
        ];
        spec.preconds = vec![PrecondSpec::None, PrecondSpec::Ilu0];
        spec.rhs = RhsSpec::Random;
        let out1 = run_experiment(&spec).unwrap();
        let out2 = run_experiment(&spec).unwrap();
        assert_eq!(out1.rows.len(), 6);
        let order: Vec<(String, String)> =
            out1.rows.iter().map(|r| (r.solver.clone(), r.precond.clone())).collect();
        assert_eq!(order[0], ("minres".to_string(), "none".to_string()));
        assert_eq!(order[1], ("minres".to_string(), "ilu0".to_string()));
        assert_eq!(order[2], ("bicgstab".to_string(), "none".to_string()));
        for (a, b) in out1.rows.iter().zip(&out2.rows) {
            assert_eq!(a.total, b.total);
            assert_eq!(a.status, b.status);
        }
    }

    #[test]
    fn setup_failure_becomes_row_status() {
        // ILU(0) on a matrix with a zero pivot in row 0
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "%%MatrixMarket matrix coordinate real symmetric").unwrap();
        writeln!(f, "2 2 1").unwrap();
        writeln!(f, "2 1 1.0").unwrap();
        let mut spec = base_spec(f.path().to_path_buf());
        spec.preconds = vec![PrecondSpec::Ilu0];
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.rows[0].status, "setup");
    }

    #[test]
    fn minres_cg_with_exact_basis_on_indefinite_diag() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "%%MatrixMarket matrix coordinate real symmetric").unwrap();
        writeln!(f, "3 3 3").unwrap();
        writeln!(f, "1 1 1.0").unwrap();
        writeln!(f, "2 2 -2.0").unwrap();
        writeln!(f, "3 3 3.0").unwrap();
        let mut spec = base_spec(f.path().to_path_buf());
        spec.solvers = vec![SolverSpec::MinresCg];
        spec.preconds = vec![PrecondSpec::None];
        spec.rel_tol = 1e-9;
        spec.inner_tol = 1e-12;
        let out = run_experiment(&spec).unwrap();
        let row = &out.rows[0];
        assert_eq!(row.status, "ok");
        assert!(row.outer <= 2.0, "outer {}", row.outer);
        assert_eq!(row.k, Some(1));
    }

    #[test]
    fn shift_is_applied() {
        let f = write_identity_mtx(4);
        let mut spec = base_spec(f.path().to_path_buf());
        spec.shift = Some(2.0); // I - 2I = -I, still fine for minres
        spec.rel_tol = 1e-10;
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.rows[0].status, "ok");
        assert!(out.matrix_name.contains("sigma=2"));
    }

    #[test]
    fn rejects_empty_solver_list() {
        let f = write_identity_mtx(4);
        let mut spec = base_spec(f.path().to_path_buf());
        spec.solvers.clear();
        assert!(matches!(run_experiment(&spec), Err(BenchError::InvalidSpec(_))));
    }

    #[test]
    fn rejects_bad_tolerance() {
        let f = write_identity_mtx(4);
        let mut spec = base_spec(f.path().to_path_buf());
        spec.rel_tol = 1.5;
        assert!(matches!(run_experiment(&spec), Err(BenchError::InvalidSpec(_))));
    }
}
