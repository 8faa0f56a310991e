//! End-to-end Schur complement solves of `L u = f`.
//!
//! Every mode first makes the system consistent: `f ← f - u_L (u_Lᵀ f)`,
//! `b_S = B A⁻¹ f`, `b_S ← b_S - u_S (u_Sᵀ b_S)`. The interface solution is
//! then found by GMRES on
//!
//! | mode              | Krylov operator | interface solution                         |
//! |-------------------|-----------------|--------------------------------------------|
//! | `plain`           | `S`             | `x`                                        |
//! | `jacobi`          | `S M⁻¹`         | `M⁻¹ x`                                    |
//! | `deflated`        | `P S`           | `Q x + Z C⁺ Zᵀ b_S`                        |
//! | `jacobi-deflated` | `P S M⁻¹`       | `Q M⁻¹ x + Z C⁺ Zᵀ b_S`                    |
//!
//! with right-hand side `P b_S` in the deflated modes, and `u = A⁻¹(f - E x_S)`
//! is recovered blockwise and shifted to zero mean.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::assembly::SmpmOperators;
use crate::error::{check_len, Error, Result};
use crate::krylov::{gmres, GmresOptions};
use crate::mesh::Mesh;
use crate::nullspace::{norm, project_out};
use crate::schur::{ContextOptions, SchurContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    Plain,
    Jacobi,
    /// Deflation with `M = I`; not one of the three published variants.
    Deflated,
    JacobiDeflated,
}

impl SolverMode {
    pub const ALL: [SolverMode; 4] = [
        SolverMode::Plain,
        SolverMode::Jacobi,
        SolverMode::Deflated,
        SolverMode::JacobiDeflated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverMode::Plain => "plain",
            SolverMode::Jacobi => "jacobi",
            SolverMode::Deflated => "deflated",
            SolverMode::JacobiDeflated => "jacobi-deflated",
        }
    }

    pub fn uses_jacobi(self) -> bool {
        matches!(self, SolverMode::Jacobi | SolverMode::JacobiDeflated)
    }

    pub fn uses_deflation(self) -> bool {
        matches!(self, SolverMode::Deflated | SolverMode::JacobiDeflated)
    }

    /// Deflation without block-Jacobi is an extension beyond the published
    /// algorithms.
    pub fn is_extension(self) -> bool {
        self == SolverMode::Deflated
    }
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(SolverMode::Plain),
            "jacobi" => Ok(SolverMode::Jacobi),
            "deflated" => Ok(SolverMode::Deflated),
            "jacobi-deflated" | "jacobi+deflated" => Ok(SolverMode::JacobiDeflated),
            other => Err(Error::InvalidArgument(format!("unknown solver mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverReport {
    pub mode: SolverMode,
    pub extension: bool,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Vec<f64>,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub analytic_error: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Zero-mean full-grid solution.
    pub u: Vec<f64>,
    /// Interface solution `x_S = B u`.
    pub x_s: Vec<f64>,
    pub report: SolverReport,
}

/// Shifts a field to zero mean.
pub fn gauge_fix(u: &[f64]) -> Vec<f64> {
    if u.is_empty() {
        return Vec::new();
    }
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    u.iter().map(|v| v - mean).collect()
}

/// `u = A⁻¹ (f - E x_S)`.
pub fn recover_interior(ops: &SmpmOperators, f: &[f64], x_s: &[f64]) -> Result<Vec<f64>> {
    check_len("recover_interior f", ops.num_nodes(), f.len())?;
    let ex = ops.interfaces().include_gamma(x_s)?;
    let rhs: Vec<f64> = f.iter().zip(ex).map(|(a, b)| a - b).collect();
    ops.solve_a(&rhs)
}

/// Solves `L u = f` (Neumann data `g`) with the requested Schur variant.
///
/// GMRES non-convergence is not an error: the returned report carries
/// `converged = false`.
pub fn solve(
    ops: &SmpmOperators,
    ctx: &SchurContext,
    f: &[f64],
    g: &[f64],
    mode: SolverMode,
    opts: &GmresOptions,
) -> Result<Solution> {
    let start = Instant::now();
    let nulls = ctx.null_vectors();
    let rhs = ops.build_rhs(f, g)?;
    let f_reg = project_out(&rhs, &nulls.u_l)?;
    let k = ops.k();

    let mut report = SolverReport {
        mode,
        extension: mode.is_extension(),
        iterations: 0,
        converged: true,
        residuals: vec![0.0],
        setup_seconds: 0.0,
        solve_seconds: 0.0,
        analytic_error: None,
    };
    if norm(&f_reg) == 0.0 {
        report.solve_seconds = start.elapsed().as_secs_f64();
        return Ok(Solution {
            u: vec![0.0; ops.num_nodes()],
            x_s: vec![0.0; k],
            report,
        });
    }

    let b_s = ops.apply_flux(&ops.solve_a(&f_reg)?)?;
    let b_s = if k > 0 { project_out(&b_s, &nulls.u_s)? } else { b_s };

    let precond = |v: &[f64]| -> Vec<f64> {
        if mode.uses_jacobi() {
            ctx.jacobi().apply_inv(v)
        } else {
            v.to_vec()
        }
    };

    let (x_s, stats) = if mode.uses_deflation() {
        let rhs = ctx.apply_p(&b_s)?;
        let (y, stats) = gmres(|v| ctx.apply_p(&ctx.apply_s(&precond(v))?), &rhs, opts)?;
        let x1 = ctx.apply_q(&precond(&y))?;
        let coarse = ctx.coarse_solve(&ctx.deflation().restrict(&b_s))?;
        let x2 = ctx.deflation().prolong(&coarse);
        (x1.iter().zip(x2).map(|(a, b)| a + b).collect(), stats)
    } else {
        let (y, stats) = gmres(|v| ctx.apply_s(&precond(v)), &b_s, opts)?;
        (precond(&y), stats)
    };

    let u = gauge_fix(&recover_interior(ops, &f_reg, &x_s)?);
    report.iterations = stats.iterations;
    report.converged = stats.converged;
    report.residuals = stats.residuals;
    report.solve_seconds = start.elapsed().as_secs_f64();
    Ok(Solution { u, x_s, report })
}

/// Operators and Schur context for one mesh, built once and reused across
/// solves.
#[derive(Debug)]
pub struct SchurSolver {
    ops: SmpmOperators,
    ctx: SchurContext,
    setup_seconds: f64,
}

impl SchurSolver {
    /// `tau = None` selects the default penalty.
    pub fn new(mesh: Mesh, tau: Option<f64>) -> Result<Self> {
        Self::with_options(mesh, tau, ContextOptions::default())
    }

    pub fn with_options(mesh: Mesh, tau: Option<f64>, opts: ContextOptions) -> Result<Self> {
        let start = Instant::now();
        let ops = SmpmOperators::new(mesh, tau)?;
        let ctx = SchurContext::build(&ops, opts)?;
        Ok(Self {
            ops,
            ctx,
            setup_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn ops(&self) -> &SmpmOperators {
        &self.ops
    }

    pub fn context(&self) -> &SchurContext {
        &self.ctx
    }

    pub fn mesh(&self) -> &Mesh {
        self.ops.mesh()
    }

    pub fn setup_seconds(&self) -> f64 {
        self.setup_seconds
    }

    pub fn solve(&self, f: &[f64], g: &[f64], mode: SolverMode, opts: &GmresOptions) -> Result<Solution> {
        let mut sol = solve(&self.ops, &self.ctx, f, g, mode, opts)?;
        sol.report.setup_seconds = self.setup_seconds;
        Ok(sol)
    }
}
