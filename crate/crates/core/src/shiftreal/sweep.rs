use std::io::Write;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use super::{Gamma, InnerSolverCache, QepParts, ShiftRealError, ShiftSolveConfig};
use crate::krylov::SolveConfig;
use crate::precond::PrecondSpec;

/// Shift-grid sweep over the rectangle of complex shifts: for each grid
/// point the inner system `(K_E - |gamma|^2 M) u = b` is solved with
/// MINRES-CG against a seeded random right-hand side, reusing factorizations
/// and deflation bases across shifts of equal modulus.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub omega: f64,
    pub omega_ref: f64,
    pub re_min: f64,
    pub re_max: f64,
    pub re_steps: usize,
    pub im_min: f64,
    pub im_max: f64,
    pub im_steps: usize,
    pub rel_tol: f64,
    pub inner_tol: f64,
    pub max_iters: usize,
    pub precond: PrecondSpec,
    pub seed: u64,
    pub source: SweepSource,
}

#[derive(Debug, Clone)]
pub enum SweepSource {
    Synthetic { n: usize },
    Files { mass: String, k_e: String, d_m: String, d_r: String, k_g: String, d_g: String, k_r: String },
}

#[derive(Debug, Deserialize)]
struct SweepFile {
    omega: f64,
    omega_ref: f64,
    gamma_grid: String,
    rel_tol: Option<f64>,
    inner_tol: Option<f64>,
    max_iters: Option<usize>,
    precond: Option<String>,
    seed: Option<u64>,
    synthetic: Option<usize>,
    files: Option<SweepFiles>,
}

#[derive(Debug, Deserialize)]
struct SweepFiles {
    mass: String,
    k_e: String,
    d_m: String,
    d_r: String,
    k_g: String,
    d_g: String,
    k_r: String,
}

impl SweepSpec {
    /// Parse the TOML parameter file: `omega`, `omega_ref`, a `gamma_grid`
    /// string `re_min re_max re_steps im_min im_max im_steps`, solver knobs,
    /// and either `synthetic = <n>` or a `[files]` table with the seven
    /// coefficient matrices.
    pub fn from_toml_str(text: &str) -> Result<Self, ShiftRealError> {
        let file: SweepFile =
            toml::from_str(text).map_err(|e| ShiftRealError::Config(e.to_string()))?;
        let tokens: Vec<&str> = file.gamma_grid.split_whitespace().collect();
        if tokens.len() != 6 {
            return Err(ShiftRealError::Config(format!(
                "gamma_grid needs 6 fields `re_min re_max re_steps im_min im_max im_steps`, got {}",
                tokens.len()
            )));
        }
        let num = |t: &str| -> Result<f64, ShiftRealError> {
            t.parse().map_err(|_| ShiftRealError::Config(format!("bad grid number `{}`", t)))
        };
        let step = |t: &str| -> Result<usize, ShiftRealError> {
            t.parse().map_err(|_| ShiftRealError::Config(format!("bad step count `{}`", t)))
        };
        let source = match (file.synthetic, file.files) {
            (Some(n), None) => SweepSource::Synthetic { n },
            (None, Some(f)) => SweepSource::Files {
                mass: f.mass,
                k_e: f.k_e,
                d_m: f.d_m,
                d_r: f.d_r,
                k_g: f.k_g,
                d_g: f.d_g,
                k_r: f.k_r,
            },
            _ => {
                return Err(ShiftRealError::Config(
                    "give exactly one of `synthetic` or `[files]`".into(),
                ))
            }
        };
        let precond = match file.precond {
            Some(s) => PrecondSpec::parse(&s)?,
            None => PrecondSpec::Ilu0,
        };
        Ok(SweepSpec {
            omega: file.omega,
            omega_ref: file.omega_ref,
            re_min: num(tokens[0])?,
            re_max: num(tokens[1])?,
            re_steps: step(tokens[2])?,
            im_min: num(tokens[3])?,
            im_max: num(tokens[4])?,
            im_steps: step(tokens[5])?,
            rel_tol: file.rel_tol.unwrap_or(1e-3),
            inner_tol: file.inner_tol.unwrap_or(1e-2),
            max_iters: file.max_iters.unwrap_or(2_000),
            precond,
            seed: file.seed.unwrap_or(0x5EED),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ShiftRealError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Grid points, row-major over (re, im); a single step pins the value
    /// at the lower bound.
    pub fn grid(&self) -> Vec<Gamma> {
        let lin = |lo: f64, hi: f64, steps: usize| -> Vec<f64> {
            if steps <= 1 {
                vec![lo]
            } else {
                (0..steps)
                    .map(|i| lo + (hi - lo) * (i as f64) / ((steps - 1) as f64))
                    .collect()
            }
        };
        let mut out = Vec::with_capacity(self.re_steps * self.im_steps);
        for re in lin(self.re_min, self.re_max, self.re_steps) {
            for im in lin(self.im_min, self.im_max, self.im_steps) {
                out.push(Gamma::new(re, im));
            }
        }
        out
    }
}

/// One grid-point outcome, the row behind the iteration-count maps.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub gamma: Gamma,
    pub converged: bool,
    pub outer_iters: f64,
    pub inner_avg: f64,
    pub total_iters: usize,
}

/// Run the sweep. Grid cells are independent and run on the worker pool;
/// results come back in grid order regardless of completion order.
pub fn run_sweep(spec: &SweepSpec, parts: &QepParts) -> Result<Vec<SweepOutcome>, ShiftRealError> {
    let n = parts.n();
    let cfg = ShiftSolveConfig {
        inner: SolveConfig {
            rel_tol: spec.rel_tol,
            inner_tol: spec.inner_tol,
            max_iters: spec.max_iters,
            ..Default::default()
        },
        inner_precond: spec.precond.clone(),
        ..Default::default()
    };
    let cache = InnerSolverCache::new();
    let grid = spec.grid();

    let results: Vec<Result<SweepOutcome, ShiftRealError>> = grid
        .par_iter()
        .enumerate()
        .map(|(idx, &gamma)| {
            let solver = cache.get_or_build(&parts.k_e, &parts.m_mass, gamma, &cfg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(idx as u64));
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, report) = solver.solve(&b, &cfg.inner);
            Ok(SweepOutcome {
                gamma,
                converged: report.converged,
                outer_iters: report.outer_iters,
                inner_avg: report.inner_iters_avg,
                total_iters: report.inner_iters_total,
            })
        })
        .collect();
    results.into_iter().collect()
}

/// CSV export: `gamma_r,gamma_i,converged,outer_iters,inner_avg,total_iters`.
pub fn write_sweep_csv<W: Write>(out: &mut W, rows: &[SweepOutcome]) -> std::io::Result<()> {
    writeln!(out, "gamma_r,gamma_i,converged,outer_iters,inner_avg,total_iters")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.gamma.re, r.gamma.im, r.converged, r.outer_iters, r.inner_avg, r.total_iters
        )?;
    }
    Ok(())
}
