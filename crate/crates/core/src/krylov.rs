//! Right-preconditioning-agnostic GMRES on a linear map given as a closure.
//!
//! Arnoldi uses modified Gram–Schmidt with one extra orthogonalization pass
//! whenever the new direction keeps more than `1e-8` of its norm along the
//! existing basis. The small least-squares problem is kept upper triangular
//! with Givens rotations.

use crate::error::{Error, Result};
use crate::nullspace::{dot, norm};

const REORTH_TOL: f64 = 1e-8;
const BREAKDOWN_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresOptions {
    /// Stop when `‖b - op x‖ ≤ rel_tol ‖b‖`.
    pub rel_tol: f64,
    /// Iteration cap; `None` means the system dimension.
    pub max_iter: Option<usize>,
    /// Restart length; `None` runs full GMRES.
    pub restart: Option<usize>,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: None,
            restart: None,
        }
    }
}

impl GmresOptions {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidArgument(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.max_iter == Some(0) || self.restart == Some(0) {
            return Err(Error::InvalidArgument("max_iter and restart must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    /// Arnoldi steps taken.
    pub iterations: usize,
    /// Relative residual estimates; entry 0 is the initial residual, entry
    /// `i` the estimate after iteration `i`.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let h = a.hypot(b);
        (a / h, b / h)
    }
}

/// Solves `op x = b` from a zero initial guess.
pub fn gmres<F>(op: F, b: &[f64], opts: &GmresOptions) -> Result<(Vec<f64>, SolveStats)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    opts.validate()?;
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                residuals: vec![0.0],
                converged: true,
            },
        ));
    }
    let max_iter = opts.max_iter.unwrap_or(n).max(1);
    let cycle_len = opts.restart.unwrap_or(max_iter);
    let mut stats = SolveStats {
        iterations: 0,
        residuals: vec![1.0],
        converged: false,
    };
    let mut r = b.to_vec();

    loop {
        let beta = norm(&r);
        if beta <= opts.rel_tol * bnorm {
            stats.converged = true;
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut rot: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        let mut breakdown = false;

        while hess.len() < cycle_len && stats.iterations < max_iter {
            let j = hess.len();
            let mut w = op(&basis[j])?;
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "gmres operator",
                    expected: n,
                    got: w.len(),
                });
            }
            let mut h = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                h[i] = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= h[i] * b);
            }
            let mut wnorm = norm(&w);
            let overlaps: Vec<f64> = basis.iter().map(|v| dot(&w, v)).collect();
            if wnorm > 0.0 && overlaps.iter().any(|c| c.abs() > REORTH_TOL * wnorm) {
                for (i, (v, c)) in basis.iter().zip(&overlaps).enumerate() {
                    h[i] += c;
                    w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
                }
                wnorm = norm(&w);
            }
            h[j + 1] = wnorm;
            let scale = h.iter().map(|v| v.abs()).fold(0.0, f64::max);

            for (i, &(c, s)) in rot.iter().enumerate() {
                let (a, b) = (h[i], h[i + 1]);
                h[i] = c * a + s * b;
                h[i + 1] = -s * a + c * b;
            }
            let (c, s) = givens(h[j], h[j + 1]);
            h[j] = c * h[j] + s * h[j + 1];
            h[j + 1] = 0.0;
            rot.push((c, s));
            g.push(-s * g[j]);
            g[j] *= c;
            hess.push(h);

            stats.iterations += 1;
            let estimate = g[j + 1].abs() / bnorm;
            stats.residuals.push(estimate);
            if wnorm <= BREAKDOWN_TOL * scale {
                breakdown = true;
                break;
            }
            if estimate <= opts.rel_tol {
                break;
            }
            basis.push(w.iter().map(|v| v / wnorm).collect());
        }

        // Back substitution on the rotated Hessenberg matrix.
        let m = hess.len();
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let mut acc = g[i];
            for (l, yl) in y.iter().enumerate().skip(i + 1) {
                acc -= hess[l][i] * yl;
            }
            y[i] = if hess[i][i] != 0.0 { acc / hess[i][i] } else { 0.0 };
        }
        for (v, yi) in basis.iter().zip(&y) {
            x.iter_mut().zip(v).for_each(|(a, b)| *a += yi * b);
        }

        let ax = op(&x)?;
        r = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        if norm(&r) <= opts.rel_tol * bnorm {
            stats.converged = true;
            break;
        }
        if breakdown || stats.iterations >= max_iter {
            break;
        }
    }
    Ok((x, stats))
}
