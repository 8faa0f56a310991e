//! Schur complement `S = I + B A⁻¹ E` on Γ, its block-Jacobi preconditioner
//! `M`, the interface-indicator deflation space `Z`, the coarse operator
//! `C = Zᵀ S Z` and the deflation projections `P`, `Q`.

use nalgebra::{DMatrix, Dyn, LU};
use rayon::prelude::*;

use crate::assembly::SmpmOperators;
use crate::error::{check_len, Error, Result};
use crate::mesh::{InterfaceSet, Mesh};
use crate::nullspace::{
    self, left_null_vector, left_null_vector_sparse, normalize_signed, NullVectors, DENSE_SVD_LIMIT,
};
use crate::sparse::{CsrMatrix, SparseLu};

/// Default cap on `k` for dense Schur assembly.
pub const DENSE_SCHUR_CAP: usize = 20_000;

/// Relative singular-value cutoff of the coarse pseudo-inverse.
pub const COARSE_PINV_CUTOFF: f64 = 1e-10;

/// `S v = v + B A⁻¹ E v`, matrix-free.
pub fn apply_schur(ops: &SmpmOperators, v: &[f64]) -> Result<Vec<f64>> {
    check_len("apply_schur", ops.k(), v.len())?;
    let ev = ops.interfaces().include_gamma(v)?;
    let w = ops.solve_a(&ev)?;
    let bw = ops.flux().matvec(&w);
    Ok(v.iter().zip(bw).map(|(a, b)| a + b).collect())
}

/// Column `j` of `S` as sorted `(row, value)` pairs.
///
/// `A⁻¹ E e_j` lives on a single element, so only Γ slots whose flux reads
/// that element are touched.
fn schur_column(ops: &SmpmOperators, j: usize) -> Vec<(usize, f64)> {
    let mesh = ops.mesh();
    let npe = mesh.nodes_per_element();
    let g = ops.interfaces().gamma_to_global()[j];
    let e = g / npe;
    let mut rhs = vec![0.0; npe];
    rhs[g % npe] = 1.0;
    let mut x = vec![0.0; npe];
    ops.solve_element(e, &rhs, &mut x);
    let bt = ops.flux_transpose();
    let mut entries: Vec<(usize, f64)> = vec![(j, 1.0)];
    for (l, &xl) in x.iter().enumerate() {
        let (slots, vals) = bt.row(e * npe + l);
        entries.extend(slots.iter().zip(vals).map(|(&i, &b)| (i, b * xl)));
    }
    entries.sort_unstable_by_key(|&(i, _)| i);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (i, v) in entries {
        match merged.last_mut() {
            Some((li, lv)) if *li == i => *lv += v,
            _ => merged.push((i, v)),
        }
    }
    merged
}

/// Sparse `S`, assembled column by column.
pub fn assemble_schur_sparse(ops: &SmpmOperators) -> CsrMatrix {
    let k = ops.k();
    let triplets: Vec<(usize, usize, f64)> = (0..k)
        .into_par_iter()
        .flat_map_iter(|j| schur_column(ops, j).into_iter().map(move |(i, v)| (i, j, v)))
        .collect();
    CsrMatrix::from_triplets(k, k, &triplets)
}

/// Dense `k × k` Schur matrix; column `j` is `S e_j`.
pub fn assemble_schur(ops: &SmpmOperators, cap: usize) -> Result<DMatrix<f64>> {
    let k = ops.k();
    if k > cap {
        return Err(Error::SizeLimit {
            what: "dense Schur complement",
            size: k,
            cap,
        });
    }
    let mut s = DMatrix::zeros(k, k);
    for j in 0..k {
        for (i, v) in schur_column(ops, j) {
            s[(i, j)] = v;
        }
    }
    Ok(s)
}

#[derive(Clone, Debug)]
struct JacobiBlock {
    slots: Vec<usize>,
    matrix: DMatrix<f64>,
    inverse: BlockInverse,
}

#[derive(Clone, Debug)]
enum BlockInverse {
    Lu(LU<f64, Dyn, Dyn>),
    /// A block spanning all of Γ (grids with two elements) is `S` itself and
    /// inherits its rank deficiency.
    PseudoInverse(DMatrix<f64>),
}

/// Non-overlapping block-Jacobi preconditioner built from principal
/// submatrices of `S`.
///
/// Elements are 2-coloured like a checkerboard; each element of the colour
/// holding element `(0, 0)` owns one block made of every Γ slot on its
/// (up to four) interface pairs. Couplings between blocks are dropped.
#[derive(Clone, Debug)]
pub struct BlockJacobi {
    k: usize,
    blocks: Vec<JacobiBlock>,
}

/// Γ slot lists of the block-Jacobi blocks, one per owning element.
pub fn block_jacobi_slots(mesh: &Mesh, interfaces: &InterfaceSet) -> Vec<Vec<usize>> {
    let mut per_element: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_elements()];
    for (p, pair) in interfaces.pairs().iter().enumerate() {
        per_element[pair.lower].push(p);
        per_element[pair.upper].push(p);
    }
    (0..mesh.num_elements())
        .filter(|&e| {
            let (ix, iy) = mesh.element_position(e);
            (ix + iy) % 2 == 0
        })
        .map(|e| {
            per_element[e]
                .iter()
                .flat_map(|&p| interfaces.pairs()[p].slots.iter().copied())
                .collect::<Vec<_>>()
        })
        .filter(|slots| !slots.is_empty())
        .collect()
}

pub fn build_block_jacobi(s: &CsrMatrix, mesh: &Mesh, interfaces: &InterfaceSet) -> Result<BlockJacobi> {
    let k = interfaces.k();
    check_len("build_block_jacobi", k, s.nrows())?;
    let groups = block_jacobi_slots(mesh, interfaces);
    let mut local = vec![usize::MAX; k];
    let mut owner = vec![usize::MAX; k];
    for (b, slots) in groups.iter().enumerate() {
        for (l, &i) in slots.iter().enumerate() {
            local[i] = l;
            owner[i] = b;
        }
    }
    let blocks = groups
        .into_par_iter()
        .enumerate()
        .map(|(b, slots)| {
            let m = slots.len();
            let mut matrix = DMatrix::zeros(m, m);
            for (li, &i) in slots.iter().enumerate() {
                let (cols, vals) = s.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    if owner[j] == b {
                        matrix[(li, local[j])] = v;
                    }
                }
            }
            let lu = matrix.clone().lu();
            let diag = lu.u().diagonal();
            let min = diag.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
            let inverse = if min > 1e-12 * diag.amax() {
                BlockInverse::Lu(lu)
            } else if m == k {
                let svd = matrix.clone().svd(true, true);
                let cutoff = COARSE_PINV_CUTOFF * svd.singular_values.max();
                BlockInverse::PseudoInverse(
                    svd.pseudo_inverse(cutoff)
                        .map_err(|e| Error::PreconditionerFailure(e.to_string()))?,
                )
            } else {
                return Err(Error::PreconditionerFailure(format!(
                    "block {b} ({m} slots) is singular"
                )));
            };
            Ok(JacobiBlock { slots, matrix, inverse })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockJacobi { k, blocks })
}

impl BlockJacobi {
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.slots.len()).collect()
    }

    pub fn block_slots(&self, b: usize) -> &[usize] {
        &self.blocks[b].slots
    }

    fn map_blocks(&self, v: &[f64], f: impl Fn(&JacobiBlock, nalgebra::DVector<f64>) -> nalgebra::DVector<f64> + Sync) -> Vec<f64> {
        let parts: Vec<_> = self
            .blocks
            .par_iter()
            .map(|b| {
                let local = nalgebra::DVector::from_iterator(b.slots.len(), b.slots.iter().map(|&i| v[i]));
                f(b, local)
            })
            .collect();
        let mut out = vec![0.0; self.k];
        for (b, y) in self.blocks.iter().zip(parts) {
            for (&i, yi) in b.slots.iter().zip(y.iter()) {
                out[i] = *yi;
            }
        }
        out
    }

    /// `M⁻¹ v`.
    pub fn apply_inv(&self, v: &[f64]) -> Vec<f64> {
        self.map_blocks(v, |b, x| match &b.inverse {
            BlockInverse::Lu(lu) => lu.solve(&x).expect("block checked invertible"),
            BlockInverse::PseudoInverse(pinv) => pinv * x,
        })
    }

    /// `M v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.map_blocks(v, |b, x| &b.matrix * x)
    }

    /// `M` as a sparse block-diagonal matrix in Γ numbering.
    pub fn to_sparse(&self) -> CsrMatrix {
        let mut t = Vec::new();
        for b in &self.blocks {
            for (li, &i) in b.slots.iter().enumerate() {
                for (lj, &j) in b.slots.iter().enumerate() {
                    let v = b.matrix[(li, lj)];
                    if v != 0.0 {
                        t.push((i, j, v));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.k, self.k, &t)
    }
}

/// Deflation space `Z ∈ {0,1}^{k×d}`: column `j` is the indicator of the
/// Γ slots of interface pair `j`.
#[derive(Clone, Debug)]
pub struct Deflation {
    pair_of_slot: Vec<usize>,
    d: usize,
}

pub fn build_deflation(interfaces: &InterfaceSet) -> Deflation {
    Deflation {
        pair_of_slot: (0..interfaces.k()).map(|i| interfaces.pair_of_slot(i)).collect(),
        d: interfaces.d(),
    }
}

impl Deflation {
    pub fn k(&self) -> usize {
        self.pair_of_slot.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `Z y`.
    pub fn prolong(&self, y: &[f64]) -> Vec<f64> {
        self.pair_of_slot.iter().map(|&p| y[p]).collect()
    }

    /// `Zᵀ v`.
    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (&p, &x) in self.pair_of_slot.iter().zip(v) {
            out[p] += x;
        }
        out
    }

    pub fn to_sparse(&self) -> CsrMatrix {
        let t: Vec<_> = self.pair_of_slot.iter().enumerate().map(|(i, &p)| (i, p, 1.0)).collect();
        CsrMatrix::from_triplets(self.k(), self.d, &t)
    }

    /// `C = Zᵀ S Z`.
    pub fn coarse_matrix(&self, s: &CsrMatrix) -> CsrMatrix {
        let t: Vec<_> = s
            .iter()
            .map(|(i, j, v)| (self.pair_of_slot[i], self.pair_of_slot[j], v))
            .collect();
        CsrMatrix::from_triplets(self.d, self.d, &t)
    }
}

#[derive(Debug)]
enum CoarseKind {
    Empty,
    /// Dense SVD pseudo-inverse.
    PseudoInverse(DMatrix<f64>),
    /// Sparse LU of `[[C, u_C], [v_Cᵀ, 0]]`, whose leading block of the
    /// solution is the minimum-norm solution of the `u_C`-projected system.
    Bordered(Box<SparseLu>),
}

/// Regularized solver for the rank-deficient coarse system.
#[derive(Debug)]
pub struct CoarseSolver {
    d: usize,
    u_c: Option<Vec<f64>>,
    kind: CoarseKind,
}

impl CoarseSolver {
    /// Builds from a dense coarse matrix. `u_c = None` skips the null-space
    /// projection.
    pub fn from_dense(c: &DMatrix<f64>, u_c: Option<Vec<f64>>) -> Result<Self> {
        let d = c.nrows();
        if d == 0 {
            return Ok(Self { d, u_c, kind: CoarseKind::Empty });
        }
        let svd = c.clone().svd(true, true);
        let cutoff = COARSE_PINV_CUTOFF * svd.singular_values.max();
        let pinv = svd
            .pseudo_inverse(cutoff)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(Self {
            d,
            u_c,
            kind: CoarseKind::PseudoInverse(pinv),
        })
    }

    /// Builds from a sparse rank-one-deficient `C`: dense SVD when small,
    /// bordered sparse LU otherwise. Returns the solver and `u_C`.
    pub fn build(c: &CsrMatrix) -> Result<(Self, Vec<f64>)> {
        let d = c.nrows();
        if d == 0 {
            return Ok((Self { d, u_c: None, kind: CoarseKind::Empty }, Vec::new()));
        }
        if d == 1 {
            // A single pair spans Γ, so `Z = 1` and `C = 1ᵀ S 1 = 0`.
            let solver = Self {
                d,
                u_c: Some(vec![1.0]),
                kind: CoarseKind::PseudoInverse(DMatrix::zeros(1, 1)),
            };
            return Ok((solver, vec![1.0]));
        }
        if d <= DENSE_SVD_LIMIT {
            let dense = c.to_dense();
            let u_c = left_null_vector(&dense)?;
            let solver = Self::from_dense(&dense, Some(u_c.clone()))?;
            return Ok((solver, u_c));
        }
        let u_c = left_null_vector_sparse(c)?;
        let v_c = left_null_vector_sparse(&c.transpose())?;
        let mut t: Vec<_> = c.iter().collect();
        t.extend(u_c.iter().enumerate().map(|(i, &u)| (i, d, u)));
        t.extend(v_c.iter().enumerate().map(|(j, &v)| (d, j, v)));
        let bordered = CsrMatrix::from_triplets(d + 1, d + 1, &t);
        let lu = SparseLu::new(&bordered)?;
        Ok((
            Self {
                d,
                u_c: Some(u_c.clone()),
                kind: CoarseKind::Bordered(Box::new(lu)),
            },
            u_c,
        ))
    }

    /// Minimum-norm `y` with `C y = w - u_C (u_Cᵀ w)`.
    pub fn solve(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("coarse_solve", self.d, w.len())?;
        let rhs = match &self.u_c {
            Some(u) => nullspace::project_out(w, u)?,
            None => w.to_vec(),
        };
        Ok(match &self.kind {
            CoarseKind::Empty => Vec::new(),
            CoarseKind::PseudoInverse(pinv) => {
                (pinv * nalgebra::DVector::from_vec(rhs)).iter().copied().collect()
            }
            CoarseKind::Bordered(lu) => {
                let mut ext = rhs;
                ext.push(0.0);
                let mut y = lu.solve(&ext);
                y.truncate(self.d);
                y
            }
        })
    }
}

/// Options for [`SchurContext::build`].
#[derive(Clone, Copy, Debug)]
pub struct ContextOptions {
    /// Operators up to this size get their null vectors by dense SVD.
    pub dense_svd_limit: usize,
}

impl Default for ContextOptions {
    fn default() -> Self {
        Self {
            dense_svd_limit: DENSE_SVD_LIMIT,
        }
    }
}

/// Everything the Schur solvers need beyond the SMPM operators.
#[derive(Debug)]
pub struct SchurContext {
    s: CsrMatrix,
    jacobi: BlockJacobi,
    deflation: Deflation,
    coarse: CsrMatrix,
    coarse_solver: CoarseSolver,
    nulls: NullVectors,
}

impl SchurContext {
    pub fn build(ops: &SmpmOperators, opts: ContextOptions) -> Result<Self> {
        let s = assemble_schur_sparse(ops);
        let jacobi = build_block_jacobi(&s, ops.mesh(), ops.interfaces())?;
        let deflation = build_deflation(ops.interfaces());
        let coarse = deflation.coarse_matrix(&s);
        let (coarse_solver, u_c) = CoarseSolver::build(&coarse)?;

        let r = ops.num_nodes();
        let u_l = if r <= opts.dense_svd_limit {
            left_null_vector(&ops.dense_l())?
        } else {
            left_null_vector_sparse(&ops.sparse_l())?
        };
        let k = ops.k();
        let u_s = if k == 0 {
            Vec::new()
        } else if k <= opts.dense_svd_limit {
            left_null_vector(&s.to_dense())?
        } else {
            schur_null_from_l(ops.interfaces(), &u_l)?
        };
        Ok(Self {
            s,
            jacobi,
            deflation,
            coarse,
            coarse_solver,
            nulls: NullVectors { u_l, u_s, u_c },
        })
    }

    pub fn schur(&self) -> &CsrMatrix {
        &self.s
    }

    pub fn jacobi(&self) -> &BlockJacobi {
        &self.jacobi
    }

    pub fn deflation(&self) -> &Deflation {
        &self.deflation
    }

    pub fn coarse(&self) -> &CsrMatrix {
        &self.coarse
    }

    pub fn coarse_solver(&self) -> &CoarseSolver {
        &self.coarse_solver
    }

    pub fn null_vectors(&self) -> &NullVectors {
        &self.nulls
    }

    pub fn k(&self) -> usize {
        self.s.nrows()
    }

    pub fn d(&self) -> usize {
        self.deflation.d()
    }

    pub fn apply_s(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_s", self.k(), v.len())?;
        Ok(self.s.matvec(v))
    }

    pub fn coarse_solve(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.coarse_solver.solve(w)
    }

    /// `P v = v - S Z C⁺ Zᵀ v`.
    pub fn apply_p(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_p", self.k(), v.len())?;
        let y = self.coarse_solve(&self.deflation.restrict(v))?;
        let szy = self.s.matvec(&self.deflation.prolong(&y));
        Ok(v.iter().zip(szy).map(|(a, b)| a - b).collect())
    }

    /// `Q v = v - Z C⁺ Zᵀ S v`.
    pub fn apply_q(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_q", self.k(), v.len())?;
        let sv = self.s.matvec(v);
        let y = self.coarse_solve(&self.deflation.restrict(&sv))?;
        let zy = self.deflation.prolong(&y);
        Ok(v.iter().zip(zy).map(|(a, b)| a - b).collect())
    }
}

/// `u_S ∝ Eᵀ u_L`: if `u_Lᵀ L = 0` then `(Eᵀ u_L)ᵀ S = 0`.
pub fn schur_null_from_l(interfaces: &InterfaceSet, u_l: &[f64]) -> Result<Vec<f64>> {
    let restricted = interfaces.restrict_gamma(u_l)?;
    if nullspace::norm(&restricted) == 0.0 {
        return Err(Error::RankDeficiency("left null vector of L vanishes on Γ".into()));
    }
    Ok(normalize_signed(restricted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    fn ops(n: usize, mx: usize, my: usize) -> SmpmOperators {
        SmpmOperators::new(build_mesh(n, mx, my, 1.0, 1.0).unwrap(), None).unwrap()
    }

    #[test]
    fn schur_of_single_element_is_empty() {
        let o = ops(5, 1, 1);
        assert_eq!(assemble_schur(&o, DENSE_SCHUR_CAP).unwrap().nrows(), 0);
        assert!(apply_schur(&o, &[]).unwrap().is_empty());
    }

    #[test]
    fn dense_cap_is_enforced() {
        let o = ops(5, 2, 2);
        assert!(matches!(assemble_schur(&o, 10), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn deflation_single_interface() {
        let o = ops(5, 2, 1);
        let z = build_deflation(o.interfaces()).to_sparse().to_dense();
        assert_eq!(z, DMatrix::from_element(10, 1, 1.0));
    }

    #[test]
    fn block_jacobi_layout() {
        let o = ops(5, 2, 2);
        let slots = block_jacobi_slots(o.mesh(), o.interfaces());
        assert_eq!(slots.len(), 2);
        assert_eq!(slots.iter().map(Vec::len).sum::<usize>(), 36);
        let o = ops(5, 4, 4);
        let slots = block_jacobi_slots(o.mesh(), o.interfaces());
        assert_eq!(slots.len(), 8);
        assert!(slots.iter().all(|s| s.len() <= 40));
    }

    #[test]
    fn coarse_scalar() {
        let c = DMatrix::from_element(1, 1, 4.0);
        let solver = CoarseSolver::from_dense(&c, None).unwrap();
        assert_eq!(solver.solve(&[2.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn bordered_coarse_route_matches_pseudo_inverse() {
        let o = ops(5, 4, 4);
        let s = assemble_schur_sparse(&o);
        let z = build_deflation(o.interfaces());
        let c = z.coarse_matrix(&s);
        let (dense, u_dense) = CoarseSolver::build(&c).unwrap();
        let u_c = left_null_vector_sparse(&c).unwrap();
        let v_c = left_null_vector_sparse(&c.transpose()).unwrap();
        let d = c.nrows();
        let mut t: Vec<_> = c.iter().collect();
        t.extend(u_c.iter().enumerate().map(|(i, &u)| (i, d, u)));
        t.extend(v_c.iter().enumerate().map(|(j, &v)| (d, j, v)));
        let bordered = CoarseSolver {
            d,
            u_c: Some(u_c.clone()),
            kind: CoarseKind::Bordered(Box::new(SparseLu::new(&CsrMatrix::from_triplets(d + 1, d + 1, &t)).unwrap())),
        };
        for (a, b) in u_dense.iter().zip(&u_c) {
            assert!((a - b).abs() < 1e-10);
        }
        let w: Vec<f64> = (0..d).map(|i| (i as f64 * 0.37).sin()).collect();
        let y1 = dense.solve(&w).unwrap();
        let y2 = bordered.solve(&w).unwrap();
        let scale = nullspace::norm(&y1);
        for (a, b) in y1.iter().zip(&y2) {
            assert!((a - b).abs() < 1e-9 * scale);
        }
    }
}
