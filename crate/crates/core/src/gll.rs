//! Gauss–Lobatto–Legendre grids and spectral collocation operators.
//!
//! Element-local node ordering is x-fastest: node `(iy, ix)` of an `n × n`
//! element grid lives at flat index `iy * n + ix`. Every operator in the
//! crate uses this convention.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// One-dimensional GLL grid with quadrature weights and first-derivative
/// collocation matrix.
#[derive(Clone, Debug)]
pub struct GllBasis {
    n: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    diff: DMatrix<f64>,
}

impl GllBasis {
    pub fn new(n: usize) -> Result<Self> {
        let nodes = gll_nodes(n)?;
        let weights = gll_weights(&nodes);
        let diff = diff_matrix(&nodes);
        Ok(Self {
            n,
            nodes,
            weights,
            diff,
        })
    }

    /// Number of nodes per direction.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Polynomial order `n - 1`.
    pub fn order(&self) -> usize {
        self.n - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// First-derivative matrix on the reference interval `[-1, 1]`.
    pub fn diff(&self) -> &DMatrix<f64> {
        &self.diff
    }

    /// Collocation Laplacian of an `hx × hy` rectangle, see [`element_laplacian`].
    pub fn element_laplacian(&self, hx: f64, hy: f64) -> Result<DMatrix<f64>> {
        element_laplacian(self, hx, hy)
    }
}

/// Legendre polynomial `P_m(x)` and `P_{m-1}(x)` by the three-term recurrence.
fn legendre_pair(m: usize, x: f64) -> (f64, f64) {
    if m == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for j in 2..=m {
        let jf = j as f64;
        let next = ((2.0 * jf - 1.0) * x * p - (jf - 1.0) * p_prev) / jf;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// The `n` Gauss–Lobatto–Legendre points in ascending order: `±1` and the
/// roots of `P'_{n-1}`.
///
/// Newton iteration on `(1 - x²) P'_{n-1}(x)` seeded with the
/// Chebyshev–Gauss–Lobatto points; the result is symmetrized exactly.
pub fn gll_nodes(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "GLL grid needs at least 2 nodes, got {n}"
        )));
    }
    let m = n - 1;
    let mf = m as f64;
    let mut x: Vec<f64> = (0..n)
        .map(|j| -(std::f64::consts::PI * j as f64 / mf).cos())
        .collect();

    let mut converged = false;
    for _ in 0..NEWTON_MAX_ITER {
        let mut max_step: f64 = 0.0;
        for xi in x.iter_mut() {
            let (p, p_prev) = legendre_pair(m, *xi);
            // Newton step for (1 - x^2) P'_m written through P_m and P_{m-1}.
            let step = (*xi * p - p_prev) / (n as f64 * p);
            *xi -= step;
            max_step = max_step.max(step.abs());
        }
        if max_step <= NEWTON_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        // The recurrence can stall one ulp above the tolerance; accept that.
        let residual = x
            .iter()
            .map(|&xi| {
                let (p, p_prev) = legendre_pair(m, xi);
                ((xi * p - p_prev) / (n as f64 * p)).abs()
            })
            .fold(0.0, f64::max);
        if residual > 1e-13 {
            return Err(Error::InvalidArgument(format!(
                "GLL Newton iteration did not converge for n = {n} (last step {residual:e})"
            )));
        }
    }

    for i in 0..n / 2 {
        let j = n - 1 - i;
        let half = 0.5 * (x[j] - x[i]);
        x[i] = -half;
        x[j] = half;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    x[0] = -1.0;
    x[n - 1] = 1.0;
    Ok(x)
}

/// GLL quadrature weights `2 / (m (m + 1) P_m(x_j)^2)` with `m = n - 1`.
pub fn gll_weights(nodes: &[f64]) -> Vec<f64> {
    let m = nodes.len() - 1;
    let mf = m as f64;
    nodes
        .iter()
        .map(|&x| {
            let (p, _) = legendre_pair(m, x);
            2.0 / (mf * (mf + 1.0) * p * p)
        })
        .collect()
}

/// Barycentric weights `1 / prod_{k != j} (x_j - x_k)`.
fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| xj - xk)
                .product();
            1.0 / prod
        })
        .collect()
}

/// First-derivative collocation matrix: entry `(i, j)` is `ℓ_j'(x_i)`.
///
/// Off-diagonal entries use the barycentric formula; diagonal entries are
/// the negative row sums so that constants are differentiated to zero.
pub fn diff_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let w = barycentric_weights(nodes);
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    d
}

/// Collocation Laplacian on an `hx × hy` rectangle, `n² × n²`.
///
/// With x-fastest ordering this is
/// `(2/hx)² · (I ⊗ D²) + (2/hy)² · (D² ⊗ I)` where `D² = D·D` and the
/// Kronecker factor on the right acts on the fast (x) index.
pub fn element_laplacian(basis: &GllBasis, hx: f64, hy: f64) -> Result<DMatrix<f64>> {
    if !(hx > 0.0 && hy > 0.0) || !hx.is_finite() || !hy.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "element edge lengths must be positive, got hx = {hx}, hy = {hy}"
        )));
    }
    let n = basis.n;
    let d2 = &basis.diff * &basis.diff;
    let sx = (2.0 / hx).powi(2);
    let sy = (2.0 / hy).powi(2);
    let mut lap = DMatrix::zeros(n * n, n * n);
    for iy in 0..n {
        for ix in 0..n {
            let row = iy * n + ix;
            for k in 0..n {
                lap[(row, iy * n + k)] += sx * d2[(ix, k)];
                lap[(row, k * n + ix)] += sy * d2[(iy, k)];
            }
        }
    }
    Ok(lap)
}
