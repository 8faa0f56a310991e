#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use smpm_schur::gll::diff_matrix;
use smpm_schur::mesh::Side;
use smpm_schur::Mesh;

/// Dense SMPM operator built straight from the collocation definition,
/// independent of the library's block/flux split.
///
/// Row of node `(e, ix, iy)`: Laplacian, `τ n̂·∇u` per physical side through
/// the node, and for one interface side through the node (a vertical one if
/// any) `τ (u_e + n̂·∇u_e) - τ (u_j + n̂·∇u_j)` with `j` across that side.
pub fn reference_l(mesh: &Mesh, tau: f64) -> DMatrix<f64> {
    let n = mesh.n();
    let r = mesh.num_nodes();
    let d = diff_matrix(mesh.basis().nodes());
    let (sx, sy) = (2.0 / mesh.hx(), 2.0 / mesh.hy());
    let mut l = DMatrix::zeros(r, r);
    let g = |e: usize, ix: usize, iy: usize| e * n * n + iy * n + ix;
    let d2 = &d * &d;
    // n̂·∇ at node (ix, iy) of element e, scaled, accumulated into row.
    let add_dn = |l: &mut DMatrix<f64>, row: usize, e: usize, side: Side, ix: usize, iy: usize, c: f64| {
        let (nx, ny) = side.normal();
        for k in 0..n {
            l[(row, g(e, k, iy))] += c * nx * sx * d[(ix, k)];
            l[(row, g(e, ix, k))] += c * ny * sy * d[(iy, k)];
        }
    };
    for e in 0..mesh.num_elements() {
        for iy in 0..n {
            for ix in 0..n {
                let row = g(e, ix, iy);
                for k in 0..n {
                    l[(row, g(e, k, iy))] += sx * sx * d2[(ix, k)];
                    l[(row, g(e, ix, k))] += sy * sy * d2[(iy, k)];
                }
                let sides: Vec<Side> = Side::ALL.into_iter().filter(|s| s.contains(n, ix, iy)).collect();
                for &s in &sides {
                    if mesh.neighbor(e, s).is_none() {
                        add_dn(&mut l, row, e, s, ix, iy, tau);
                    }
                }
                let owner = [Side::West, Side::East, Side::South, Side::North]
                    .into_iter()
                    .find(|s| sides.contains(s) && mesh.neighbor(e, *s).is_some());
                if let Some(s) = owner {
                    let j = mesh.neighbor(e, s).unwrap();
                    let (jx, jy) = match s {
                        Side::West => (n - 1, iy),
                        Side::East => (0, iy),
                        Side::South => (ix, n - 1),
                        Side::North => (ix, 0),
                    };
                    l[(row, row)] += tau;
                    add_dn(&mut l, row, e, s, ix, iy, tau);
                    l[(row, g(j, jx, jy))] -= tau;
                    add_dn(&mut l, row, j, s, jx, jy, -tau);
                }
            }
        }
    }
    l
}

pub fn random_vectors(len: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b)) / norm(b).max(f64::MIN_POSITIVE)
}

/// `‖uᵀ op‖ / ‖op‖_F` for a dense operator.
pub fn left_residual(op: &DMatrix<f64>, u: &[f64]) -> f64 {
    let ut = nalgebra::DVector::from_column_slice(u).transpose() * op;
    ut.norm() / op.norm()
}
