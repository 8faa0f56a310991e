//! `smpm`: solve the manufactured Poisson–Neumann problem or run the
//! refinement studies.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use smpm_schur::experiments::{
    self, dense_oracle, manufactured_problem, relative_difference, run_study, solve_manufactured,
    StudyKind, StudyRow, StudySpec,
};
use smpm_schur::schur::{assemble_schur, DENSE_SCHUR_CAP};
use smpm_schur::{build_mesh, mmio, GmresOptions, Result, SchurSolver, SolverMode};

#[derive(Parser)]
#[command(name = "smpm", version, about = "Deflated Schur complement solver for SMPM Poisson-Neumann problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the manufactured problem on one grid.
    Solve(SolveArgs),
    /// Run a refinement study and write one CSV row per grid and mode.
    Study(StudyArgs),
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Wavenumber of the manufactured right-hand side.
    #[arg(long, default_value_t = 7)]
    lambda: u32,
    #[arg(long, default_value_t = 1.0)]
    lx: f64,
    #[arg(long, default_value_t = 1.0)]
    ly: f64,
    /// GMRES relative tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// GMRES iteration cap; defaults to the Schur dimension.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Penalty override; defaults to 2 (n-1)^2 / min(hx, hy)^2.
    #[arg(long)]
    tau: Option<f64>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Plain,
    Jacobi,
    Deflated,
    JacobiDeflated,
}

impl From<ModeArg> for SolverMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Plain => SolverMode::Plain,
            ModeArg::Jacobi => SolverMode::Jacobi,
            ModeArg::Deflated => SolverMode::Deflated,
            ModeArg::JacobiDeflated => SolverMode::JacobiDeflated,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// GLL nodes per direction per element.
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    mx: usize,
    #[arg(long, default_value_t = 4)]
    my: usize,
    #[arg(long, value_enum, default_value = "jacobi-deflated")]
    mode: ModeArg,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Write the GMRES residual history as CSV.
    #[arg(long)]
    residuals: Option<PathBuf>,
    /// Directory for Matrix Market dumps of A, B, L, S, M, Z and C.
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
    /// Cross-check against the dense SVD solution (small grids only).
    #[arg(long)]
    oracle: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Spectral,
    H,
    P,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Modes to compare; defaults to all for h/p and jacobi-deflated for spectral.
    #[arg(long, value_enum, value_delimiter = ',')]
    mode: Vec<ModeArg>,
    /// Override the swept node counts (comma separated).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Override the swept element counts (comma separated, my = mx).
    #[arg(long, value_delimiter = ',')]
    mx: Vec<usize>,
    #[command(flatten)]
    problem: ProblemArgs,
}

fn write_rows(rows: &[StudyRow], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => experiments::write_csv(rows, File::create(path)?),
        None => experiments::write_csv(rows, std::io::stdout().lock()),
    }
}

fn dump_matrices(solver: &SchurSolver, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let ops = solver.ops();
    let ctx = solver.context();
    mmio::save(dir.join("A.mtx"), &ops.sparse_a())?;
    mmio::save(dir.join("B.mtx"), ops.flux())?;
    mmio::save(dir.join("L.mtx"), &ops.sparse_l())?;
    mmio::save(dir.join("S.mtx"), ctx.schur())?;
    mmio::save(dir.join("M.mtx"), &ctx.jacobi().to_sparse())?;
    mmio::save(dir.join("Z.mtx"), &ctx.deflation().to_sparse())?;
    mmio::save(dir.join("C.mtx"), ctx.coarse())?;
    if ops.k() <= DENSE_SCHUR_CAP.min(2000) {
        mmio::write_dense(&assemble_schur(ops, DENSE_SCHUR_CAP)?, File::create(dir.join("S_dense.mtx"))?)?;
    }
    Ok(())
}

fn run_solve(args: &SolveArgs) -> Result<bool> {
    let p = &args.problem;
    let mode = SolverMode::from(args.mode);
    let mesh = build_mesh(args.n, args.mx, args.my, p.lx, p.ly)?;
    let solver = SchurSolver::new(mesh, p.tau)?;
    let opts = GmresOptions {
        max_iter: p.max_iter,
        ..GmresOptions::with_tol(p.tol)
    };
    let sol = solve_manufactured(&solver, p.lambda, mode, &opts)?;
    let rep = &sol.report;
    let (k, d) = (solver.context().k(), solver.context().d());
    println!(
        "n={} mx={} my={} r={} k={} d={} tau={:.6e}",
        args.n,
        args.mx,
        args.my,
        solver.ops().num_nodes(),
        k,
        d,
        solver.ops().tau()
    );
    println!(
        "mode={}{} iterations={} converged={} final_residual={:.3e}",
        mode,
        if rep.extension { " (extension)" } else { "" },
        rep.iterations,
        rep.converged,
        rep.residuals.last().copied().unwrap_or(0.0)
    );
    println!(
        "analytic_error={:.6e} setup={:.3}s solve={:.3}s",
        rep.analytic_error.unwrap_or(f64::NAN),
        rep.setup_seconds,
        rep.solve_seconds
    );
    if args.oracle {
        let problem = manufactured_problem(solver.mesh(), p.lambda)?;
        let u_oracle = dense_oracle(solver.ops(), &problem.f, &problem.g)?;
        println!("oracle_relative_difference={:.3e}", relative_difference(&sol.u, &u_oracle));
    }
    if let Some(path) = &args.residuals {
        experiments::write_residuals(&rep.residuals, File::create(path)?)?;
    }
    if let Some(dir) = &args.dump_matrices {
        dump_matrices(&solver, dir)?;
    }
    if let Some(path) = &p.out {
        let row = StudyRow {
            n: args.n,
            mx: args.mx,
            my: args.my,
            k,
            d,
            mode: mode.name().to_string(),
            iterations: rep.iterations,
            converged: rep.converged,
            analytic_error: rep.analytic_error.unwrap_or(f64::NAN),
            wall_time: rep.setup_seconds + rep.solve_seconds,
        };
        write_rows(&[row], Some(path))?;
    }
    Ok(rep.converged)
}

fn run_study_cmd(args: &StudyArgs) -> Result<bool> {
    let mut spec = match args.kind {
        KindArg::Spectral => StudySpec::spectral(),
        KindArg::H => StudySpec::h_refinement(),
        KindArg::P => StudySpec::p_refinement(),
    };
    if !args.n.is_empty() || !args.mx.is_empty() {
        let ns = if args.n.is_empty() { vec![5] } else { args.n.clone() };
        let mxs = if args.mx.is_empty() { vec![4] } else { args.mx.clone() };
        spec.grids = ns.iter().flat_map(|&n| mxs.iter().map(move |&m| (n, m, m))).collect();
    }
    if !args.mode.is_empty() {
        spec.modes = args.mode.iter().map(|&m| m.into()).collect();
    }
    let p = &args.problem;
    spec.lambda = p.lambda;
    spec.lx = p.lx;
    spec.ly = p.ly;
    spec.rel_tol = p.tol;
    spec.max_iter = p.max_iter;
    spec.tau = p.tau;
    debug_assert!(spec.kind != StudyKind::Single);
    let rows = run_study(&spec)?;
    for row in &rows {
        eprintln!(
            "n={:>2} mx={:>2} my={:>2} k={:>5} d={:>4} {:<16} iters={:>4} converged={} error={:.3e} time={:.2}s",
            row.n, row.mx, row.my, row.k, row.d, row.mode, row.iterations, row.converged, row.analytic_error, row.wall_time
        );
    }
    write_rows(&rows, p.out.as_deref())?;
    Ok(rows.iter().all(|r| r.converged))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Study(args) => run_study_cmd(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
