mod common;

use common::{left_residual, norm, random_vectors, rel_diff};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use smpm_schur::schur::{apply_schur, assemble_schur, ContextOptions, DENSE_SCHUR_CAP};
use smpm_schur::{build_mesh, SchurContext, SmpmOperators};

fn setup(n: usize, mx: usize, my: usize) -> (SmpmOperators, SchurContext) {
    let ops = SmpmOperators::new(build_mesh(n, mx, my, 1.0, 1.0).unwrap(), None).unwrap();
    let ctx = SchurContext::build(&ops, ContextOptions::default()).unwrap();
    (ops, ctx)
}

fn to_vec(v: DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// `I + B A⁻¹ E` from dense matrices.
fn dense_schur_reference(ops: &SmpmOperators) -> DMatrix<f64> {
    let a = ops.sparse_a().to_dense();
    let b = ops.flux().to_dense();
    let k = ops.k();
    let mut e = DMatrix::zeros(ops.num_nodes(), k);
    for (slot, &g) in ops.interfaces().gamma_to_global().iter().enumerate() {
        e[(g, slot)] = 1.0;
    }
    let a_inv_e = a.lu().solve(&e).unwrap();
    DMatrix::identity(k, k) + b * a_inv_e
}

#[test]
fn schur_matches_dense_formula() {
    for &(n, mx, my) in &[(5, 2, 2), (4, 3, 2), (5, 3, 3)] {
        let (ops, ctx) = setup(n, mx, my);
        let reference = dense_schur_reference(&ops);
        let dense = assemble_schur(&ops, DENSE_SCHUR_CAP).unwrap();
        assert!((&dense - &reference).norm() < 1e-10 * reference.norm());
        assert!((ctx.schur().to_dense() - &reference).norm() < 1e-10 * reference.norm());
        for v in random_vectors(ops.k(), 3, 7) {
            let want = to_vec(&reference * DVector::from_column_slice(&v));
            assert!(rel_diff(&apply_schur(&ops, &v).unwrap(), &want) < 1e-10);
        }
    }
}

#[test]
fn null_vectors_annihilate_operators() {
    for &(n, mx, my) in &[(5, 2, 2), (5, 4, 4), (7, 3, 3)] {
        let (ops, ctx) = setup(n, mx, my);
        let nv = ctx.null_vectors();
        assert!(left_residual(&ops.dense_l(), &nv.u_l) < 1e-10);
        assert!(left_residual(&ctx.schur().to_dense(), &nv.u_s) < 1e-10);
        assert!(left_residual(&ctx.coarse().to_dense(), &nv.u_c) < 1e-10);
        for u in [&nv.u_l, &nv.u_s, &nv.u_c] {
            assert!((norm(u) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn left_null_vector_of_l_is_not_constant() {
    let (_, ctx) = setup(5, 3, 3);
    let u = &ctx.null_vectors().u_l;
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    let spread = u.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    assert!(spread > 1e-3 * mean.abs().max(1e-3));
}

#[test]
fn schur_right_kernel_is_flux_of_constants() {
    let (ops, ctx) = setup(5, 3, 2);
    let v = ops.apply_flux(&vec![1.0; ops.num_nodes()]).unwrap();
    let sv = ctx.apply_s(&v).unwrap();
    assert!(norm(&sv) < 1e-10 * norm(&v));
}

#[test]
fn projector_algebra() {
    for &(n, mx, my) in &[(5, 2, 2), (5, 4, 4), (7, 3, 3)] {
        let (_, ctx) = setup(n, mx, my);
        for v in random_vectors(ctx.k(), 10, 11) {
            let pv = ctx.apply_p(&v).unwrap();
            let qv = ctx.apply_q(&v).unwrap();
            assert!(rel_diff(&ctx.apply_p(&pv).unwrap(), &pv) < 1e-9);
            assert!(rel_diff(&ctx.apply_q(&qv).unwrap(), &qv) < 1e-9);
            let ps = ctx.apply_p(&ctx.apply_s(&v).unwrap()).unwrap();
            let sq = ctx.apply_s(&qv).unwrap();
            assert!(rel_diff(&ps, &sq) < 1e-9);
        }
    }
}

#[test]
fn deflation_vectors_partition_gamma() {
    let (ops, ctx) = setup(5, 4, 3);
    let z = ctx.deflation().to_sparse().to_dense();
    assert_eq!(z.shape(), (ops.k(), ops.interfaces().d()));
    for i in 0..ops.k() {
        assert_eq!(z.row(i).sum(), 1.0);
    }
    for (j, pair) in ops.interfaces().pairs().iter().enumerate() {
        let col = z.column(j);
        for &slot in &pair.slots {
            assert_eq!(col[slot], 1.0);
        }
        assert_eq!(col.sum() as usize, pair.slots.len());
    }
}

#[test]
fn coarse_matrix_is_galerkin_product() {
    let (_, ctx) = setup(5, 3, 3);
    let z = ctx.deflation().to_sparse().to_dense();
    let c = z.transpose() * ctx.schur().to_dense() * &z;
    assert!((ctx.coarse().to_dense() - &c).norm() < 1e-12 * c.norm());
}

#[test]
fn jacobi_blocks_are_principal_submatrices() {
    let (ops, ctx) = setup(5, 4, 4);
    let jac = ctx.jacobi();
    let s = ctx.schur().to_dense();
    let m = jac.to_sparse().to_dense();
    let mut seen = vec![false; ops.k()];
    for b in 0..jac.num_blocks() {
        let slots = jac.block_slots(b);
        for &i in slots {
            assert!(!seen[i]);
            seen[i] = true;
            for &j in slots {
                assert_eq!(m[(i, j)], s[(i, j)]);
            }
        }
    }
    assert!(seen.iter().all(|&x| x));
    for v in random_vectors(ops.k(), 3, 5) {
        let back = jac.apply(&jac.apply_inv(&v));
        assert!(rel_diff(&back, &v) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn coarse_solve_is_consistent(n in 3usize..6, mx in 2usize..4, my in 1usize..4) {
        let (_, ctx) = setup(n, mx, my);
        let u_c = &ctx.null_vectors().u_c;
        let c = ctx.coarse().to_dense();
        for w in random_vectors(ctx.d(), 2, 3) {
            let proj: Vec<f64> = {
                let a = common::dot(&w, u_c);
                w.iter().zip(u_c).map(|(x, u)| x - a * u).collect()
            };
            let y = ctx.coarse_solve(&w).unwrap();
            let cy = to_vec(&c * DVector::from_column_slice(&y));
            prop_assert!(rel_diff(&cy, &proj) < 1e-8);
        }
    }
}
