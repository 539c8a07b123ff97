use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use indefsolve::bench::{
    fetch_matrix, known_ids, residual_history_export, run_experiment, write_results_csv,
    write_results_json, ExperimentSpec, MatrixSource, RhsSpec, SolverSpec,
};
use indefsolve::eig::EigConfig;
use indefsolve::precond::PrecondSpec;
use indefsolve::shiftreal::{run_sweep, synthetic_qep, write_sweep_csv, SweepSpec};

/// Iterative solvers for sparse symmetric indefinite systems.
#[derive(Parser)]
#[command(name = "indefsolve", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver-by-preconditioner grid on one matrix.
    Solve(SolveArgs),
    /// Sweep the complex-shift grid of a QEP configuration.
    Sweep(SweepArgs),
    /// Download collection matrices into the local cache.
    Fetch(FetchArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Matrix Market path or collection id (try `fetch` first when offline).
    #[arg(long)]
    matrix: String,
    /// Diagonal shift sigma: solve with A - sigma I.
    #[arg(long)]
    shift: Option<f64>,
    /// Solver spec, repeatable: minres-cg, minres-cg-star, minres, cg,
    /// gmres:<m>, fgmres:<m1>:<m2>, bicgstab.
    #[arg(long = "solver", required = true)]
    solvers: Vec<String>,
    /// Preconditioner spec, repeatable: none, ilu0, milu:<tol>,
    /// ildlt:<level>:<tol>, ildlt-mod:<level>:<tol>, smw:<inner>.
    #[arg(long = "precond", default_value = "none")]
    preconds: Vec<String>,
    /// Relative residual target (default from profile).
    #[arg(long)]
    rtol: Option<f64>,
    /// Inner tolerance for nested schemes (default from profile).
    #[arg(long)]
    itol: Option<f64>,
    /// Total iteration cap (default from profile).
    #[arg(long)]
    maxit: Option<usize>,
    /// Seed for the random right-hand side.
    #[arg(long, default_value_t = 0x5EED)]
    seed: u64,
    /// Right-hand side: `random`, `ones`, or a file with one value per line.
    #[arg(long, default_value = "random")]
    rhs: String,
    /// Output directory for results.csv / results.json / histories.
    #[arg(long)]
    out: PathBuf,
    /// Never touch the network; fail on a cold cache.
    #[arg(long)]
    offline: bool,
    /// Tolerance profile: suitesparse (1e-5/1e-3, 20000 iters),
    /// brake-small (1e-3/1e-2, 2000), brake-large (1e-3/1e-2, 15000).
    #[arg(long, default_value = "suitesparse")]
    profile: String,
    /// Also write one residual-history CSV per grid cell.
    #[arg(long)]
    histories: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML parameter file: omega, omega_ref, gamma_grid, matrix source.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for sweep.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FetchArgs {
    /// Collection ids to fetch.
    #[arg(required = true)]
    ids: Vec<String>,
    /// Cache directory; defaults to $INDEFSOLVE_CACHE_DIR or ./matrix-cache.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Never touch the network; only report what the cache holds.
    #[arg(long)]
    offline: bool,
}

fn cache_dir(cli: Option<PathBuf>) -> PathBuf {
    cli.or_else(|| std::env::var_os("INDEFSOLVE_CACHE_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("matrix-cache"))
}

fn profile_defaults(name: &str) -> Result<(f64, f64, usize), String> {
    match name {
        "suitesparse" => Ok((1e-5, 1e-3, 20_000)),
        "brake-small" => Ok((1e-3, 1e-2, 2_000)),
        "brake-large" => Ok((1e-3, 1e-2, 15_000)),
        other => Err(format!(
            "unknown profile `{}` (expected suitesparse, brake-small or brake-large)",
            other
        )),
    }
}

fn run_solve(args: SolveArgs) -> Result<ExitCode, String> {
    let (p_rtol, p_itol, p_maxit) = profile_defaults(&args.profile)?;
    let solvers: Result<Vec<SolverSpec>, _> =
        args.solvers.iter().map(|s| SolverSpec::parse(s)).collect();
    let solvers = solvers.map_err(|e| e.to_string())?;
    let preconds: Result<Vec<PrecondSpec>, _> =
        args.preconds.iter().map(|s| PrecondSpec::parse(s)).collect();
    let preconds = preconds.map_err(|e| e.to_string())?;

    let matrix = if Path::new(&args.matrix).exists() {
        MatrixSource::Path(PathBuf::from(&args.matrix))
    } else {
        MatrixSource::Collection {
            id: args.matrix.clone(),
            cache_dir: cache_dir(None),
            offline: args.offline,
        }
    };
    let rhs = match args.rhs.as_str() {
        "random" => RhsSpec::Random,
        "ones" => RhsSpec::Ones,
        path => RhsSpec::File(PathBuf::from(path)),
    };

    let spec = ExperimentSpec {
        matrix,
        shift: args.shift,
        rhs,
        solvers,
        preconds,
        rel_tol: args.rtol.unwrap_or(p_rtol),
        inner_tol: args.itol.unwrap_or(p_itol),
        max_iters: args.maxit.unwrap_or(p_maxit),
        seed: args.seed,
        eig: EigConfig::default(),
        basis_cache_dir: Some(cache_dir(None).join("bases")),
    };

    let outcome = run_experiment(&spec).map_err(|e| e.to_string())?;

    std::fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    let mut csv = std::fs::File::create(args.out.join("results.csv")).map_err(|e| e.to_string())?;
    write_results_csv(&mut csv, &outcome.rows).map_err(|e| e.to_string())?;
    let mut json =
        std::fs::File::create(args.out.join("results.json")).map_err(|e| e.to_string())?;
    write_results_json(&mut json, &outcome).map_err(|e| e.to_string())?;
    if args.histories {
        for (row, report) in outcome.rows.iter().zip(&outcome.reports) {
            if let Some(report) = report {
                let name = format!(
                    "history_{}_{}.csv",
                    row.solver.replace(':', "-"),
                    row.precond.replace(':', "-")
                );
                residual_history_export(report, &args.out.join(name))
                    .map_err(|e| e.to_string())?;
            }
        }
    }

    println!(
        "{:<14} {:<16} {:<18} {:>9} {:>12} {:>10} {:>7}",
        "matrix", "solver", "precond", "outer", "inner(avg)", "total", "status"
    );
    let mut all_ok = true;
    for row in &outcome.rows {
        all_ok &= row.status == "ok";
        println!(
            "{:<14} {:<16} {:<18} {:>9} {:>12.2} {:>10} {:>7}",
            row.matrix, row.solver, row.precond, row.outer, row.inner_avg, row.total, row.status
        );
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run_sweep_cmd(args: SweepArgs) -> Result<ExitCode, String> {
    let spec = SweepSpec::load(&args.config).map_err(|e| e.to_string())?;
    let parts = match &spec.source {
        indefsolve::shiftreal::SweepSource::Synthetic { n } => synthetic_qep(*n, spec.seed),
        indefsolve::shiftreal::SweepSource::Files { mass, k_e, d_m, d_r, k_g, d_g, k_r } => {
            let base = args.config.parent().unwrap_or(Path::new("."));
            indefsolve::shiftreal::QepParts::load_from_files(
                &base.join(mass),
                &base.join(k_e),
                &base.join(d_m),
                &base.join(d_r),
                &base.join(k_g),
                &base.join(d_g),
                &base.join(k_r),
            )
            .map_err(|e| e.to_string())?
        }
    };
    let rows = run_sweep(&spec, &parts).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    let mut csv = std::fs::File::create(args.out.join("sweep.csv")).map_err(|e| e.to_string())?;
    write_sweep_csv(&mut csv, &rows).map_err(|e| e.to_string())?;
    let failed = rows.iter().filter(|r| !r.converged).count();
    println!(
        "swept {} shifts ({} converged, {} failed); wrote {}",
        rows.len(),
        rows.len() - failed,
        failed,
        args.out.join("sweep.csv").display()
    );
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run_fetch(args: FetchArgs) -> Result<ExitCode, String> {
    let dir = cache_dir(args.cache_dir);
    for id in &args.ids {
        let path = fetch_matrix(id, &dir, args.offline)
            .map_err(|e| format!("{} (known ids: {})", e, known_ids().join(", ")))?;
        println!("{} -> {}", id, path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::Solve(args) => run_solve(args),
        Command::Sweep(args) => run_sweep_cmd(args),
        Command::Fetch(args) => run_fetch(args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {}", msg);
            ExitCode::from(2)
        }
    }
}
