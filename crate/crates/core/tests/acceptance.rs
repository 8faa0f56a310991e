//! Acceptance gate: runs every criterion and prints one PASS/FAIL line each.
//! Exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;

use common::{left_residual, norm, random_vectors, rel_diff};
use nalgebra::DMatrix;
use smpm_schur::experiments::{
    dense_oracle, manufactured_problem, solve_manufactured, H_STUDY_ELEMENTS, P_STUDY_ORDERS,
};
use smpm_schur::gll::GllBasis;
use smpm_schur::{build_mesh, GmresOptions, SchurSolver, SolverMode};

const TOL: f64 = 1e-10;
const LAMBDA: u32 = 7;

struct ModeRun {
    u: Vec<f64>,
    iterations: usize,
    converged: bool,
    error: f64,
    residuals: Vec<f64>,
}

struct GridRun {
    solver: SchurSolver,
    modes: BTreeMap<&'static str, ModeRun>,
}

impl GridRun {
    fn iters(&self, mode: SolverMode) -> usize {
        self.modes[mode.name()].iterations
    }

    fn error(&self) -> f64 {
        self.modes[SolverMode::JacobiDeflated.name()].error
    }
}

fn run_grid(n: usize, m: usize) -> GridRun {
    let solver = SchurSolver::new(build_mesh(n, m, m, 1.0, 1.0).unwrap(), None).unwrap();
    let opts = GmresOptions::with_tol(TOL);
    let modes = SolverMode::ALL
        .iter()
        .map(|&mode| {
            let sol = solve_manufactured(&solver, LAMBDA, mode, &opts).unwrap();
            (
                mode.name(),
                ModeRun {
                    u: sol.u,
                    iterations: sol.report.iterations,
                    converged: sol.report.converged,
                    error: sol.report.analytic_error.unwrap(),
                    residuals: sol.report.residuals,
                },
            )
        })
        .collect();
    GridRun { solver, modes }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for &(n, m) in &[(5, 2), (5, 4), (7, 4), (9, 4), (11, 4)] {
        let solver = SchurSolver::new(build_mesh(n, m, m, 1.0, 1.0).unwrap(), None).unwrap();
        let p = manufactured_problem(solver.mesh(), LAMBDA).unwrap();
        let oracle = dense_oracle(solver.ops(), &p.f, &p.g).unwrap();
        for mode in SolverMode::ALL {
            let sol = solver.solve(&p.f, &p.g, mode, &GmresOptions::with_tol(TOL)).unwrap();
            worst = worst.max(rel_diff(&sol.u, &oracle));
        }
    }
    outcome(worst <= 1e-8, format!("max relative difference {worst:.2e} (limit 1e-8)"))
}

fn spectral_convergence(p_runs: &[(usize, GridRun)]) -> Outcome {
    let errors: Vec<f64> = p_runs.iter().map(|(_, g)| g.error()).collect();
    let decreasing = errors
        .windows(2)
        .all(|w| w[0] <= 1e-8 || w[1] < w[0]);
    let last = *errors.last().unwrap();
    let list: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    outcome(
        decreasing && last <= 1e-6,
        format!("errors for p = 4..14: [{}]", list.join(", ")),
    )
}

fn h_iterations(h_runs: &[(usize, GridRun)]) -> Outcome {
    let g = &h_runs.iter().find(|(m, _)| *m == 32).unwrap().1;
    let plain = g.iters(SolverMode::Plain);
    let jd = g.iters(SolverMode::JacobiDeflated);
    outcome(
        (80..=140).contains(&plain) && (22..=45).contains(&jd),
        format!("mx=my=32: plain {plain} (band 80-140), jacobi-deflated {jd} (band 22-45)"),
    )
}

fn growth_bound(h_runs: &[(usize, GridRun)]) -> Outcome {
    let at = |m: usize| h_runs.iter().find(|(x, _)| *x == m).unwrap().1.iters(SolverMode::JacobiDeflated);
    let ratio = at(24) as f64 / at(4) as f64;
    outcome(
        ratio <= 2.5,
        format!("jacobi-deflated {} / {} = {ratio:.2} (limit 2.5)", at(24), at(4)),
    )
}

fn p_independence(p_runs: &[(usize, GridRun)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for mode in [SolverMode::Jacobi, SolverMode::JacobiDeflated] {
        let its: Vec<usize> = p_runs.iter().map(|(_, g)| g.iters(mode)).collect();
        let (lo, hi) = (*its.iter().min().unwrap(), *its.iter().max().unwrap());
        pass &= hi - lo <= 5 && hi <= 15;
        parts.push(format!("{mode} {its:?}"));
    }
    outcome(pass, format!("{} (spread <= 5, max <= 15)", parts.join("; ")))
}

fn invariant_suite() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };
    for &(n, mx, my) in &[(5, 2, 2), (5, 4, 4), (7, 3, 3)] {
        let solver = SchurSolver::new(build_mesh(n, mx, my, 1.0, 1.0).unwrap(), None).unwrap();
        let (ops, ctx) = (solver.ops(), solver.context());
        let iface = ops.interfaces();
        let tag = format!("({n},{mx},{my})");

        let mut e = DMatrix::zeros(ops.num_nodes(), iface.k());
        for (slot, &g) in iface.gamma_to_global().iter().enumerate() {
            e[(g, slot)] = 1.0;
        }
        check(e.transpose() * &e == DMatrix::identity(iface.k(), iface.k()), format!("{tag} E^T E"));

        let l = ops.dense_l();
        let l1 = norm(&ops.apply_l(&vec![1.0; ops.num_nodes()]).unwrap());
        check(l1 <= 1e-9 * l.norm(), format!("{tag} L1 = {l1:e}"));

        let nv = ctx.null_vectors();
        let s = ctx.schur().to_dense();
        let c = ctx.coarse().to_dense();
        for (name, op, u) in [("L", &l, &nv.u_l), ("S", &s, &nv.u_s), ("C", &c, &nv.u_c)] {
            let r = left_residual(op, u);
            check(r <= 1e-10, format!("{tag} u_{name}^T {name} = {r:e}"));
        }

        for v in random_vectors(iface.k(), 10, 99) {
            let pv = ctx.apply_p(&v).unwrap();
            let qv = ctx.apply_q(&v).unwrap();
            let pp = rel_diff(&ctx.apply_p(&pv).unwrap(), &pv);
            let qq = rel_diff(&ctx.apply_q(&qv).unwrap(), &qv);
            let psq = rel_diff(&ctx.apply_p(&ctx.apply_s(&v).unwrap()).unwrap(), &ctx.apply_s(&qv).unwrap());
            check(pp <= 1e-9 && qq <= 1e-9 && psq <= 1e-9, format!("{tag} projectors {pp:e} {qq:e} {psq:e}"));
        }

        let mut cover = vec![0usize; iface.k()];
        for pair in iface.pairs() {
            pair.slots.iter().for_each(|&i| cover[i] += 1);
        }
        check(cover.iter().all(|&c| c == 1), format!("{tag} Z partition"));

        for mode in SolverMode::ALL {
            let sol = solve_manufactured(&solver, LAMBDA, mode, &GmresOptions::with_tol(TOL)).unwrap();
            let mono = sol.report.residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
            check(mono, format!("{tag} {mode} residual monotonicity"));
        }

        let basis = GllBasis::new(n).unwrap();
        let x = basis.nodes();
        for q in 0..n {
            let fx: Vec<f64> = x.iter().map(|t| t.powi(q as i32)).collect();
            let want: Vec<f64> = x
                .iter()
                .map(|t| if q == 0 { 0.0 } else { q as f64 * t.powi(q as i32 - 1) })
                .collect();
            let got = basis.diff() * nalgebra::DVector::from_vec(fx);
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            check(err <= 1e-10, format!("{tag} D exactness q={q}: {err:e}"));
        }
    }
    let detail = if failures.is_empty() {
        "all invariants hold on (5,2,2), (5,4,4), (7,3,3)".to_string()
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn mode_equivalence(runs: &[&GridRun]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_grid = String::new();
    let mut all_converged = true;
    for g in runs {
        let us: Vec<&ModeRun> = g.modes.values().collect();
        all_converged &= us.iter().all(|r| r.converged);
        for (i, a) in us.iter().enumerate() {
            for b in &us[i + 1..] {
                let d = rel_diff(&a.u, &b.u);
                if d > worst {
                    worst = d;
                    let m = g.solver.mesh();
                    worst_grid = format!("n={} mx={}", m.n(), m.mx());
                }
            }
        }
    }
    outcome(
        all_converged && worst <= 10.0 * TOL,
        format!(
            "{} grids, max pairwise difference {worst:.2e} at {worst_grid} (limit {:.0e})",
            runs.len(),
            10.0 * TOL
        ),
    )
}

fn main() -> ExitCode {
    let p_runs: Vec<(usize, GridRun)> = P_STUDY_ORDERS.iter().map(|&p| (p, run_grid(p + 1, 4))).collect();
    let h_runs: Vec<(usize, GridRun)> = H_STUDY_ELEMENTS
        .iter()
        .map(|&m| (m, run_grid(5, m)))
        .collect();
    for (label, runs) in [("p", &p_runs), ("mx", &h_runs)] {
        for (v, g) in runs.iter() {
            let its: Vec<String> = SolverMode::ALL.iter().map(|m| format!("{m}={}", g.iters(*m))).collect();
            let k = g.solver.context().k();
            let monotone = g.modes.values().all(|r| r.residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
            println!("  {label}={v:>2} k={k:>5} {} error={:.3e} monotone={monotone}", its.join(" "), g.error());
        }
    }
    let study: Vec<&GridRun> = p_runs.iter().chain(h_runs.iter()).map(|(_, g)| g).collect();

    let results = [
        ("1 oracle equivalence", oracle_equivalence()),
        ("2 spectral convergence", spectral_convergence(&p_runs)),
        ("3 h-refinement iterations", h_iterations(&h_runs)),
        ("4 iteration growth bound", growth_bound(&h_runs)),
        ("5 p-independence", p_independence(&p_runs)),
        ("6 invariant suite", invariant_suite()),
        ("7 mode equivalence", mode_equivalence(&study)),
    ];
    let mut all = true;
    for (name, o) in &results {
        all &= o.pass;
        println!("criterion {name}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
