//! Manufactured Poisson–Neumann problem, dense verification oracle and the
//! h/p refinement studies.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::assembly::SmpmOperators;
use crate::driver::{gauge_fix, SchurSolver, Solution, SolverMode};
use crate::error::{Error, Result};
use crate::krylov::GmresOptions;
use crate::mesh::{build_mesh, Mesh};
use crate::nullspace::{norm, normalize_signed, project_out};

/// Largest grid accepted by [`dense_oracle`].
pub const ORACLE_CAP: usize = 4000;

/// Samples of `∇²u = cos(λπx/Lx) cos(λπy/Ly)` with `∂u/∂n = 0`.
#[derive(Clone, Debug)]
pub struct ManufacturedProblem {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub u_exact: Vec<f64>,
}

/// `u = -f / (λ²π² (1/Lx² + 1/Ly²))`; reduces to `-Lx Ly f / (2λ²π²)`
/// scaled form on a square.
pub fn manufactured_problem(mesh: &Mesh, lambda: u32) -> Result<ManufacturedProblem> {
    if lambda == 0 {
        return Err(Error::InvalidArgument("wavenumber must be at least 1".into()));
    }
    let l = lambda as f64;
    let (lx, ly) = (mesh.lx(), mesh.ly());
    let amplitude = -1.0 / (l * l * PI * PI * (1.0 / (lx * lx) + 1.0 / (ly * ly)));
    let f: Vec<f64> = mesh
        .coords()
        .iter()
        .map(|&[x, y]| (l * PI * x / lx).cos() * (l * PI * y / ly).cos())
        .collect();
    let u_exact = f.iter().map(|v| amplitude * v).collect();
    Ok(ManufacturedProblem {
        g: vec![0.0; f.len()],
        f,
        u_exact,
    })
}

/// Discrete 2-norm distance after shifting both fields to zero mean.
pub fn analytic_error(u: &[f64], u_exact: &[f64]) -> f64 {
    let a = gauge_fix(u);
    let b = gauge_fix(u_exact);
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimum-norm least-squares solution of the regularized `L u = f̃` from a
/// dense SVD of `L`, shifted to zero mean.
pub fn dense_oracle(ops: &SmpmOperators, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let r = ops.num_nodes();
    if r > ORACLE_CAP {
        return Err(Error::SizeLimit {
            what: "dense oracle",
            size: r,
            cap: ORACLE_CAP,
        });
    }
    let rhs = ops.build_rhs(f, g)?;
    let svd = ops.dense_l().svd(true, true);
    let (imin, _) = svd.singular_values.argmin();
    let u = svd.u.as_ref().expect("requested U");
    let u_l = normalize_signed(u.column(imin).iter().copied().collect());
    let f_reg = project_out(&rhs, &u_l)?;
    let cutoff = 1e-10 * svd.singular_values.max();
    let x = svd
        .solve(&DVector::from_vec(f_reg), cutoff)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(gauge_fix(x.as_slice()))
}

/// Solves the manufactured problem and fills in the analytic error.
pub fn solve_manufactured(
    solver: &SchurSolver,
    lambda: u32,
    mode: SolverMode,
    opts: &GmresOptions,
) -> Result<Solution> {
    let problem = manufactured_problem(solver.mesh(), lambda)?;
    let mut sol = solver.solve(&problem.f, &problem.g, mode, opts)?;
    sol.report.analytic_error = Some(analytic_error(&sol.u, &problem.u_exact));
    Ok(sol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    /// Error decay under both h and p refinement.
    Spectral,
    HRefine,
    PRefine,
    Single,
}

/// h-refinement element counts.
pub const H_STUDY_ELEMENTS: [usize; 8] = [4, 8, 12, 16, 20, 24, 28, 32];
/// p-refinement polynomial orders.
pub const P_STUDY_ORDERS: [usize; 6] = [4, 6, 8, 10, 12, 14];

#[derive(Clone, Debug)]
pub struct StudySpec {
    pub kind: StudyKind,
    /// `(n, mx, my)` cells, run in order.
    pub grids: Vec<(usize, usize, usize)>,
    pub lambda: u32,
    pub lx: f64,
    pub ly: f64,
    pub modes: Vec<SolverMode>,
    pub rel_tol: f64,
    /// GMRES iteration cap; `None` uses the Schur dimension.
    pub max_iter: Option<usize>,
    pub tau: Option<f64>,
}

impl StudySpec {
    fn with_grids(kind: StudyKind, grids: Vec<(usize, usize, usize)>, modes: Vec<SolverMode>) -> Self {
        Self {
            kind,
            grids,
            lambda: 7,
            lx: 1.0,
            ly: 1.0,
            modes,
            rel_tol: 1e-10,
            max_iter: None,
            tau: None,
        }
    }

    /// `n = 5`, `mx = my` over [`H_STUDY_ELEMENTS`], all modes.
    pub fn h_refinement() -> Self {
        let grids = H_STUDY_ELEMENTS.iter().map(|&m| (5, m, m)).collect();
        Self::with_grids(StudyKind::HRefine, grids, SolverMode::ALL.to_vec())
    }

    /// `mx = my = 4`, `p` over [`P_STUDY_ORDERS`], all modes.
    pub fn p_refinement() -> Self {
        let grids = P_STUDY_ORDERS.iter().map(|&p| (p + 1, 4, 4)).collect();
        Self::with_grids(StudyKind::PRefine, grids, SolverMode::ALL.to_vec())
    }

    /// Both sweeps from the `p = mx = my = 4` grid, deflated + Jacobi only.
    pub fn spectral() -> Self {
        let mut grids: Vec<_> = P_STUDY_ORDERS.iter().map(|&p| (p + 1, 4, 4)).collect();
        grids.extend(H_STUDY_ELEMENTS.iter().skip(1).map(|&m| (5, m, m)));
        Self::with_grids(StudyKind::Spectral, grids, vec![SolverMode::JacobiDeflated])
    }

    pub fn single(n: usize, mx: usize, my: usize, modes: Vec<SolverMode>) -> Self {
        Self::with_grids(StudyKind::Single, vec![(n, mx, my)], modes)
    }

    fn validate(&self) -> Result<()> {
        if self.lambda == 0 {
            return Err(Error::InvalidArgument("wavenumber must be at least 1".into()));
        }
        if self.grids.is_empty() || self.modes.is_empty() {
            return Err(Error::InvalidArgument("study needs at least one grid and one mode".into()));
        }
        Ok(())
    }
}

/// One CSV row; column order is part of the output format.
#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub n: usize,
    pub mx: usize,
    pub my: usize,
    pub k: usize,
    pub d: usize,
    pub mode: String,
    pub iterations: usize,
    pub converged: bool,
    pub analytic_error: f64,
    pub wall_time: f64,
}

/// Runs every grid × mode cell. Failed cells are recorded with
/// `converged = false` and a NaN error; the study continues.
pub fn run_study(spec: &StudySpec) -> Result<Vec<StudyRow>> {
    spec.validate()?;
    let opts = GmresOptions {
        max_iter: spec.max_iter,
        ..GmresOptions::with_tol(spec.rel_tol)
    };
    let mut rows = Vec::with_capacity(spec.grids.len() * spec.modes.len());
    for &(n, mx, my) in &spec.grids {
        let failed = |mode: SolverMode, k: usize, d: usize, wall: f64| StudyRow {
            n,
            mx,
            my,
            k,
            d,
            mode: mode.name().to_string(),
            iterations: 0,
            converged: false,
            analytic_error: f64::NAN,
            wall_time: wall,
        };
        let start = Instant::now();
        let solver = build_mesh(n, mx, my, spec.lx, spec.ly).and_then(|m| SchurSolver::new(m, spec.tau));
        let solver = match solver {
            Ok(s) => s,
            Err(e) => {
                eprintln!("grid (n={n}, mx={mx}, my={my}) failed to build: {e}");
                let wall = start.elapsed().as_secs_f64();
                rows.extend(spec.modes.iter().map(|&m| failed(m, 0, 0, wall)));
                continue;
            }
        };
        let (k, d) = (solver.context().k(), solver.context().d());
        for &mode in &spec.modes {
            match solve_manufactured(&solver, spec.lambda, mode, &opts) {
                Ok(sol) => rows.push(StudyRow {
                    n,
                    mx,
                    my,
                    k,
                    d,
                    mode: mode.name().to_string(),
                    iterations: sol.report.iterations,
                    converged: sol.report.converged,
                    analytic_error: sol.report.analytic_error.unwrap_or(f64::NAN),
                    wall_time: solver.setup_seconds() + sol.report.solve_seconds,
                }),
                Err(e) => {
                    eprintln!("cell (n={n}, mx={mx}, my={my}, mode={mode}) failed: {e}");
                    rows.push(failed(mode, k, d, solver.setup_seconds()));
                }
            }
        }
    }
    Ok(rows)
}

/// Writes study rows as CSV with a header.
pub fn write_csv<W: Write>(rows: &[StudyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a residual history as `iteration,relative_residual` CSV.
pub fn write_residuals<W: Write>(residuals: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "relative_residual"])?;
    for (i, r) in residuals.iter().enumerate() {
        w.write_record([i.to_string(), format!("{r:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Relative 2-norm difference of two fields after gauge fixing.
pub fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (gauge_fix(a), gauge_fix(b));
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(&b)
}
