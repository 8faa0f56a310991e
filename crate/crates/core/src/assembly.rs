//! SMPM operator assembly: the block-diagonal local operator `A`, the
//! inter-element flux operator `B`, and `L = A + E B`.
//!
//! On element `V_i` the collocation residual at a node is the Laplacian,
//! plus `τ n̂·∇u_i` for every physical boundary side through the node, plus
//! `τ (u_i + n̂·∇u_i) - τ (u_j + n̂·∇u_j)` if the node is a Γ slot, where the
//! side is the one facing the other element `j` of the interface pair that
//! owns the slot. A node at an interior vertex lies on two interface sides
//! but carries only the penalty of its owning (vertical) pair, so every
//! Γ slot has exactly one flux. Everything that reads `u_i` goes into `A`;
//! the neighbour terms go into `B`.

use nalgebra::{DMatrix, Dyn, LU};
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::gll::GllBasis;
use crate::mesh::{enumerate_interfaces, InterfaceSet, Mesh, Orientation, Side};
use crate::sparse::CsrMatrix;

/// Smallest acceptable `min |U_ii| / max |U_ii|` for an element block.
const PIVOT_RATIO_TOL: f64 = 1e-13;

/// Default penalty `τ = 2 (n - 1)² / min(hx, hy)²`.
///
/// The value-jump part of the Robin flux needs `τ ∝ h⁻²` to dominate the
/// collocated Laplacian; with `τ ∝ h⁻¹` the Schur operator picks up
/// eigenvalues with negative real part once the elements get small.
pub fn penalty_default(basis: &GllBasis, hx: f64, hy: f64) -> f64 {
    let p = basis.order() as f64;
    let h = hx.min(hy);
    2.0 * p * p / (h * h)
}

#[derive(Clone, Debug)]
enum BlockSolver {
    Lu(LU<f64, Dyn, Dyn>),
    /// Element without interface sides (single-element grids), where the
    /// block is the singular Neumann operator itself.
    PseudoInverse(DMatrix<f64>),
}

/// One diagonal block of `A` with its factorization.
#[derive(Clone, Debug)]
pub struct ElementBlock {
    matrix: DMatrix<f64>,
    solver: BlockSolver,
}

impl ElementBlock {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// True when the block is the singular pure-Neumann operator and
    /// divisions use its pseudo-inverse.
    pub fn is_singular(&self) -> bool {
        matches!(self.solver, BlockSolver::PseudoInverse(_))
    }

    fn solve_into(&self, rhs: &[f64], out: &mut [f64]) {
        let b = nalgebra::DVector::from_column_slice(rhs);
        let x = match &self.solver {
            BlockSolver::Lu(lu) => lu.solve(&b).expect("element block was checked invertible"),
            BlockSolver::PseudoInverse(pinv) => pinv * b,
        };
        out.copy_from_slice(x.as_slice());
    }
}

/// Adds `scale · n̂·∇` at local node `(ix, iy)` of an element to `row`,
/// writing into columns of that element through `put(local_col, value)`.
fn add_normal_derivative(
    d: &DMatrix<f64>,
    n: usize,
    (hx, hy): (f64, f64),
    side: Side,
    (ix, iy): (usize, usize),
    scale: f64,
    mut put: impl FnMut(usize, f64),
) {
    let (nx, ny) = side.normal();
    if nx != 0.0 {
        let c = scale * nx * 2.0 / hx;
        for k in 0..n {
            put(iy * n + k, c * d[(ix, k)]);
        }
    }
    if ny != 0.0 {
        let c = scale * ny * 2.0 / hy;
        for k in 0..n {
            put(k * n + ix, c * d[(iy, k)]);
        }
    }
}

/// Side of the slot's own element facing the other element of the
/// interface pair that owns Γ slot `slot`, and that other element.
pub fn slot_side(mesh: &Mesh, interfaces: &InterfaceSet, slot: usize) -> (Side, usize) {
    let pair = &interfaces.pairs()[interfaces.pair_of_slot(slot)];
    let element = interfaces.gamma_to_global()[slot] / mesh.nodes_per_element();
    match (pair.orientation, element == pair.lower) {
        (Orientation::Vertical, true) => (Side::East, pair.upper),
        (Orientation::Vertical, false) => (Side::West, pair.lower),
        (Orientation::Horizontal, true) => (Side::North, pair.upper),
        (Orientation::Horizontal, false) => (Side::South, pair.lower),
    }
}

/// Dense local block of element `e`: Laplacian plus its own penalty terms.
fn local_block(
    mesh: &Mesh,
    interfaces: &InterfaceSet,
    lap: &DMatrix<f64>,
    tau: f64,
    element: usize,
) -> DMatrix<f64> {
    let n = mesh.n();
    let d = mesh.basis().diff();
    let h = (mesh.hx(), mesh.hy());
    let mut block = lap.clone();
    for side in Side::ALL {
        if mesh.neighbor(element, side).is_some() {
            continue;
        }
        for (ix, iy) in side.local_nodes(n) {
            let row = iy * n + ix;
            add_normal_derivative(d, n, h, side, (ix, iy), tau, |col, v| block[(row, col)] += v);
        }
    }
    for l in 0..n * n {
        let Some(slot) = interfaces.gamma_index(mesh.global_index(element, l % n, l / n)) else {
            continue;
        };
        let (side, _) = slot_side(mesh, interfaces, slot);
        block[(l, l)] += tau;
        add_normal_derivative(d, n, h, side, (l % n, l / n), tau, |col, v| block[(l, col)] += v);
    }
    block
}

fn factorize(mesh: &Mesh, element: usize, matrix: DMatrix<f64>) -> Result<ElementBlock> {
    let has_interface = Side::ALL.iter().any(|&s| mesh.neighbor(element, s).is_some());
    if !has_interface {
        let svd = matrix.clone().svd(true, true);
        let cutoff = 1e-10 * svd.singular_values.max();
        let pinv = svd
            .pseudo_inverse(cutoff)
            .map_err(|e| Error::AssemblyFailure(e.to_string()))?;
        return Ok(ElementBlock {
            matrix,
            solver: BlockSolver::PseudoInverse(pinv),
        });
    }
    let lu = matrix.clone().lu();
    let diag = lu.u().diagonal();
    let max = diag.amax();
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !min.is_finite() || !max.is_finite() || min <= PIVOT_RATIO_TOL * max {
        return Err(Error::AssemblyFailure(format!(
            "element {element} block is singular (pivot ratio {:e}); check tau or element geometry",
            min / max
        )));
    }
    Ok(ElementBlock {
        matrix,
        solver: BlockSolver::Lu(lu),
    })
}

/// Assembles and factorizes every diagonal block of `A`.
pub fn assemble_local(mesh: &Mesh, interfaces: &InterfaceSet, tau: f64) -> Result<Vec<ElementBlock>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("penalty must be positive, got {tau}")));
    }
    let lap = mesh.basis().element_laplacian(mesh.hx(), mesh.hy())?;
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| factorize(mesh, e, local_block(mesh, interfaces, &lap, tau, e)))
        .collect()
}

/// Assembles the `k × r` flux operator `B`.
///
/// Row `i` applies `-τ (I + n̂_i·∇)` to the neighbour's trace at the node
/// matching Γ slot `i`, with `n̂_i` the outward normal of the slot's own
/// element on the side facing its pair partner.
pub fn assemble_flux(mesh: &Mesh, interfaces: &InterfaceSet, tau: f64) -> CsrMatrix {
    let n = mesh.n();
    let npe = mesh.nodes_per_element();
    let d = mesh.basis().diff();
    let h = (mesh.hx(), mesh.hy());
    let rows: Vec<Vec<(usize, f64)>> = (0..interfaces.k())
        .into_par_iter()
        .map(|slot| {
            let (_, ix, iy) = mesh.local_index(interfaces.gamma_to_global()[slot]);
            let (side, m) = slot_side(mesh, interfaces, slot);
            let (jx, jy) = match side {
                Side::East => (0, iy),
                Side::West => (n - 1, iy),
                Side::North => (ix, 0),
                Side::South => (ix, n - 1),
            };
            let base = m * npe;
            let mut entries: Vec<(usize, f64)> = vec![(base + jy * n + jx, -tau)];
            add_normal_derivative(d, n, h, side, (jx, jy), -tau, |col, v| {
                entries.push((base + col, v))
            });
            entries.sort_unstable_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
            for (c, v) in entries {
                match merged.last_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => merged.push((c, v)),
                }
            }
            merged
        })
        .collect();
    CsrMatrix::from_rows(mesh.num_nodes(), rows)
}

/// `f + τ g` on ∂Ω rows, `f` elsewhere.
///
/// `g` is a full-grid vector holding, at each boundary node, the sum of the
/// Neumann data of every physical side through that node; it is ignored
/// away from ∂Ω.
pub fn build_rhs(mesh: &Mesh, f: &[f64], g: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_len("build_rhs f", mesh.num_nodes(), f.len())?;
    check_len("build_rhs g", mesh.num_nodes(), g.len())?;
    Ok(f.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&fi, &gi))| if mesh.on_boundary(i) { fi + tau * gi } else { fi })
        .collect())
}

/// Assembled SMPM operators for one mesh and penalty.
#[derive(Clone, Debug)]
pub struct SmpmOperators {
    mesh: Mesh,
    interfaces: InterfaceSet,
    tau: f64,
    blocks: Vec<ElementBlock>,
    flux: CsrMatrix,
    flux_t: CsrMatrix,
}

impl SmpmOperators {
    /// Assembles `A` (factorized) and `B`; `tau = None` uses [`penalty_default`].
    pub fn new(mesh: Mesh, tau: Option<f64>) -> Result<Self> {
        let tau = tau.unwrap_or_else(|| penalty_default(mesh.basis(), mesh.hx(), mesh.hy()));
        let interfaces = enumerate_interfaces(&mesh);
        let blocks = assemble_local(&mesh, &interfaces, tau)?;
        let flux = assemble_flux(&mesh, &interfaces, tau);
        let flux_t = flux.transpose();
        Ok(Self {
            mesh,
            interfaces,
            tau,
            blocks,
            flux,
            flux_t,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn interfaces(&self) -> &InterfaceSet {
        &self.interfaces
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn blocks(&self) -> &[ElementBlock] {
        &self.blocks
    }

    /// The `k × r` flux operator `B`.
    pub fn flux(&self) -> &CsrMatrix {
        &self.flux
    }

    /// `Bᵀ`, row `g` lists the Γ slots reading global node `g`.
    pub fn flux_transpose(&self) -> &CsrMatrix {
        &self.flux_t
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn k(&self) -> usize {
        self.interfaces.k()
    }

    pub fn build_rhs(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        build_rhs(&self.mesh, f, g, self.tau)
    }

    pub fn apply_a(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_a", self.num_nodes(), u.len())?;
        let npe = self.mesh.nodes_per_element();
        let mut out = vec![0.0; u.len()];
        out.par_chunks_mut(npe)
            .zip(u.par_chunks(npe))
            .zip(self.blocks.par_iter())
            .for_each(|((o, ue), block)| {
                let y = block.matrix() * nalgebra::DVector::from_column_slice(ue);
                o.copy_from_slice(y.as_slice());
            });
        Ok(out)
    }

    /// `A⁻¹ f` blockwise with the cached factorizations.
    pub fn solve_a(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len("solve_a", self.num_nodes(), f.len())?;
        let npe = self.mesh.nodes_per_element();
        let mut out = vec![0.0; f.len()];
        out.par_chunks_mut(npe)
            .zip(f.par_chunks(npe))
            .zip(self.blocks.par_iter())
            .for_each(|((o, fe), block)| block.solve_into(fe, o));
        Ok(out)
    }

    /// `A_e⁻¹ rhs` for a single element.
    pub(crate) fn solve_element(&self, element: usize, rhs: &[f64], out: &mut [f64]) {
        self.blocks[element].solve_into(rhs, out);
    }

    /// `B u`.
    pub fn apply_flux(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_flux", self.num_nodes(), u.len())?;
        Ok(self.flux.matvec(u))
    }

    /// `L u = A u + E B u`.
    pub fn apply_l(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.apply_a(u)?;
        let bu = self.flux.matvec(u);
        self.interfaces.add_included(&bu, &mut out);
        Ok(out)
    }

    /// Block-diagonal `A` as a sparse matrix.
    pub fn sparse_a(&self) -> CsrMatrix {
        let npe = self.mesh.nodes_per_element();
        let mut triplets = Vec::with_capacity(self.blocks.len() * npe * npe);
        for (e, block) in self.blocks.iter().enumerate() {
            let base = e * npe;
            for j in 0..npe {
                for i in 0..npe {
                    let v = block.matrix()[(i, j)];
                    if v != 0.0 {
                        triplets.push((base + i, base + j, v));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.num_nodes(), self.num_nodes(), &triplets)
    }

    /// `L = A + E B` as a sparse matrix.
    pub fn sparse_l(&self) -> CsrMatrix {
        let mut triplets: Vec<_> = self.sparse_a().iter().collect();
        let gamma = self.interfaces.gamma_to_global();
        triplets.extend(self.flux.iter().map(|(i, j, v)| (gamma[i], j, v)));
        CsrMatrix::from_triplets(self.num_nodes(), self.num_nodes(), &triplets)
    }

    pub fn dense_l(&self) -> DMatrix<f64> {
        self.sparse_l().to_dense()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    fn ops(n: usize, mx: usize, my: usize) -> SmpmOperators {
        SmpmOperators::new(build_mesh(n, mx, my, 1.0, 1.0).unwrap(), None).unwrap()
    }

    #[test]
    fn default_penalty() {
        let b5 = GllBasis::new(5).unwrap();
        assert_eq!(penalty_default(&b5, 0.25, 0.25), 512.0);
        let b2 = GllBasis::new(2).unwrap();
        assert_eq!(penalty_default(&b2, 2.0, 2.0), 0.5);
        assert!(penalty_default(&b5, 0.1, 3.0) > 0.0);
    }

    #[test]
    fn single_element_block_is_neumann_operator() {
        let o = ops(5, 1, 1);
        assert_eq!(o.k(), 0);
        assert_eq!(o.flux().nrows(), 0);
        let m = o.mesh();
        let mut expected = m.basis().element_laplacian(1.0, 1.0).unwrap();
        let d = m.basis().diff();
        for side in Side::ALL {
            for (ix, iy) in side.local_nodes(5) {
                let row = iy * 5 + ix;
                add_normal_derivative(d, 5, (1.0, 1.0), side, (ix, iy), o.tau(), |c, v| {
                    expected[(row, c)] += v
                });
            }
        }
        assert!((o.blocks()[0].matrix() - expected).amax() < 1e-12);
        assert!(o.blocks()[0].is_singular());
    }

    #[test]
    fn interior_blocks_are_invertible() {
        for (n, mx) in [(5, 2), (5, 4), (7, 3), (15, 4)] {
            let o = ops(n, mx, mx);
            assert!(o.blocks().iter().all(|b| !b.is_singular()));
        }
    }

    #[test]
    fn bad_penalty_is_rejected() {
        let m = build_mesh(5, 2, 2, 1.0, 1.0).unwrap();
        assert!(SmpmOperators::new(m.clone(), Some(0.0)).is_err());
        assert!(SmpmOperators::new(m, Some(f64::NAN)).is_err());
    }

    #[test]
    fn constants_are_in_the_right_null_space() {
        for (n, mx, my) in [(5, 2, 2), (5, 4, 4), (7, 3, 3), (4, 3, 1)] {
            let o = ops(n, mx, my);
            let one = vec![1.0; o.num_nodes()];
            let lu = o.apply_l(&one).unwrap();
            let scale = o.sparse_l().iter().map(|(_, _, v)| v.abs()).fold(0.0, f64::max);
            assert!(lu.iter().all(|v| v.abs() <= 1e-9 * scale), "grid ({n},{mx},{my})");
        }
    }

    #[test]
    fn rhs_adds_penalized_neumann_data() {
        let o = ops(5, 2, 2);
        let r = o.num_nodes();
        let f: Vec<f64> = (0..r).map(|i| i as f64).collect();
        assert_eq!(o.build_rhs(&f, &vec![0.0; r]).unwrap(), f);
        let b = o.build_rhs(&vec![0.0; r], &vec![1.0; r]).unwrap();
        for (i, v) in b.iter().enumerate() {
            let expected = if o.mesh().on_boundary(i) { o.tau() } else { 0.0 };
            assert_eq!(*v, expected);
        }
        assert!(o.build_rhs(&f[1..], &f).is_err());
    }

    #[test]
    fn block_locality() {
        let o = ops(5, 3, 2);
        let npe = 25;
        let u: Vec<f64> = (0..o.num_nodes()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let full = o.apply_a(&u).unwrap();
        let mut masked = vec![0.0; u.len()];
        masked[2 * npe..3 * npe].copy_from_slice(&u[2 * npe..3 * npe]);
        let part = o.apply_a(&masked).unwrap();
        assert_eq!(&full[2 * npe..3 * npe], &part[2 * npe..3 * npe]);
    }
}
