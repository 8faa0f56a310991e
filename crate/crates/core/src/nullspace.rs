//! Left null vectors of the rank-one-deficient operators `L`, `S`, `C` and
//! the consistency projection `v - u (uᵀ v)`.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::sparse::{CsrMatrix, SparseLu};

/// Singular values below `NULL_TOL · ‖op‖_F` count as zero.
pub const NULL_TOL: f64 = 1e-8;

/// Largest dimension handled by dense SVD; bigger operators go through
/// sparse inverse iteration.
pub const DENSE_SVD_LIMIT: usize = 1200;

const INVERSE_ITER_MAX: usize = 50;
const INVERSE_ITER_TOL: f64 = 1e-14;

/// Unit left null vectors of `L` (length r), `S` (length k) and `C`
/// (length d).
#[derive(Clone, Debug)]
pub struct NullVectors {
    pub u_l: Vec<f64>,
    pub u_s: Vec<f64>,
    pub u_c: Vec<f64>,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Normalizes to unit length with the largest-magnitude entry positive.
pub(crate) fn normalize_signed(mut v: Vec<f64>) -> Vec<f64> {
    let nrm = norm(&v);
    let pivot = v
        .iter()
        .copied()
        .fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
    let scale = pivot.signum() / nrm;
    v.iter_mut().for_each(|x| *x *= scale);
    v
}

/// Left singular vector of the smallest singular value of a dense square
/// operator, normalized with its largest-magnitude entry positive.
///
/// Fails when the operator has no numerical null space or when it is more
/// than one-dimensional.
pub fn left_null_vector(op: &DMatrix<f64>) -> Result<Vec<f64>> {
    if op.nrows() != op.ncols() {
        return Err(Error::InvalidArgument(format!(
            "null vector of a non-square {}x{} operator",
            op.nrows(),
            op.ncols()
        )));
    }
    let n = op.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("null vector of an empty operator".into()));
    }
    let fro = op.norm();
    let svd = op.clone().svd(true, false);
    let sigma = &svd.singular_values;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[a].total_cmp(&sigma[b]));
    let smallest = sigma[order[0]];
    if smallest > NULL_TOL * fro {
        return Err(Error::NoNullSpace {
            sigma_min: smallest,
            relative: smallest / fro,
        });
    }
    if n > 1 && sigma[order[1]] <= NULL_TOL * fro {
        return Err(Error::RankDeficiency(format!(
            "two singular values below tolerance: {:e}, {:e} (‖op‖_F = {fro:e})",
            smallest, sigma[order[1]]
        )));
    }
    let u = svd.u.expect("requested U");
    Ok(normalize_signed(u.column(order[0]).iter().copied().collect()))
}

/// Left null vector of a large sparse square operator by shifted inverse
/// iteration on `opᵀ` with a sparse LU.
///
/// Uniqueness of the null direction is not checked on this path.
pub fn left_null_vector_sparse(op: &CsrMatrix) -> Result<Vec<f64>> {
    let n = op.nrows();
    if n != op.ncols() || n == 0 {
        return Err(Error::InvalidArgument("null vector needs a non-empty square operator".into()));
    }
    let fro = op.frobenius_norm();
    let shift = 1e-10 * fro / (n as f64).sqrt();
    let op_t = op.transpose();
    let mut triplets: Vec<_> = op_t.iter().collect();
    triplets.extend((0..n).map(|i| (i, i, -shift)));
    let shifted = CsrMatrix::from_triplets(n, n, &triplets);
    let lu = SparseLu::new(&shifted)?;

    // Deterministic start vector with no special symmetry.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64) * 0.618_033_988_75).fract()).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    for _ in 0..INVERSE_ITER_MAX {
        let y = lu.solve(&x);
        let ny = norm(&y);
        if !ny.is_finite() || ny == 0.0 {
            return Err(Error::Factorization("inverse iteration produced a non-finite iterate".into()));
        }
        let y: Vec<f64> = y.iter().map(|v| v / ny).collect();
        let same = dot(&x, &y).signum();
        let change = x.iter().zip(&y).map(|(a, b)| (a - same * b).abs()).fold(0.0, f64::max);
        x = y;
        if change <= INVERSE_ITER_TOL {
            break;
        }
    }
    let residual = norm(&op_t.matvec(&x));
    if residual > NULL_TOL * fro {
        return Err(Error::NoNullSpace {
            sigma_min: residual,
            relative: residual / fro,
        });
    }
    Ok(normalize_signed(x))
}

/// `v - u (uᵀ v)` for unit `u`.
pub fn project_out(v: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    check_len("project_out", u.len(), v.len())?;
    let c = dot(u, v);
    Ok(v.iter().zip(u).map(|(a, b)| a - c * b).collect())
}
