//! Cartesian element grids, the interfacial grid Γ and the inclusion map E.
//!
//! Elements are numbered column-major with `iy` fastest:
//! `element = ix * my + iy`. Global node `element * n² + iy_l * n + ix_l`
//! is node `(iy_l, ix_l)` of that element. Every element owns its own copy
//! of nodes on shared edges, so coordinates are duplicated across
//! interfaces.

use crate::error::{check_len, Error, Result};
use crate::gll::GllBasis;

/// One of the four sides of a rectangular element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    /// Outward unit normal.
    pub fn normal(self) -> (f64, f64) {
        match self {
            Side::West => (-1.0, 0.0),
            Side::East => (1.0, 0.0),
            Side::South => (0.0, -1.0),
            Side::North => (0.0, 1.0),
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::West => Side::East,
            Side::East => Side::West,
            Side::South => Side::North,
            Side::North => Side::South,
        }
    }

    /// Whether local node `(ix, iy)` of an `n`-point element lies on this side.
    pub fn contains(self, n: usize, ix: usize, iy: usize) -> bool {
        match self {
            Side::West => ix == 0,
            Side::East => ix == n - 1,
            Side::South => iy == 0,
            Side::North => iy == n - 1,
        }
    }

    /// Local `(ix, iy)` positions along this side in ascending coordinate.
    pub fn local_nodes(self, n: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..n).map(move |t| match self {
            Side::West => (0, t),
            Side::East => (n - 1, t),
            Side::South => (t, 0),
            Side::North => (t, n - 1),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    n: usize,
    mx: usize,
    my: usize,
    lx: f64,
    ly: f64,
    basis: GllBasis,
    element_origins: Vec<[f64; 2]>,
    coords: Vec<[f64; 2]>,
}

/// Builds an `mx × my` grid of `hx × hy` rectangles on `[0, lx] × [0, ly]`
/// with `n × n` GLL nodes per element.
pub fn build_mesh(n: usize, mx: usize, my: usize, lx: f64, ly: f64) -> Result<Mesh> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need n >= 3 nodes per direction, got {n}")));
    }
    if mx == 0 || my == 0 {
        return Err(Error::InvalidArgument(format!(
            "element counts must be positive, got mx = {mx}, my = {my}"
        )));
    }
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "domain lengths must be positive, got lx = {lx}, ly = {ly}"
        )));
    }
    let basis = GllBasis::new(n)?;
    let hx = lx / mx as f64;
    let hy = ly / my as f64;
    let mut element_origins = Vec::with_capacity(mx * my);
    let mut coords = Vec::with_capacity(n * n * mx * my);
    for ix in 0..mx {
        for iy in 0..my {
            let origin = [ix as f64 * hx, iy as f64 * hy];
            element_origins.push(origin);
            for jy in 0..n {
                for jx in 0..n {
                    coords.push([
                        origin[0] + 0.5 * (basis.nodes()[jx] + 1.0) * hx,
                        origin[1] + 0.5 * (basis.nodes()[jy] + 1.0) * hy,
                    ]);
                }
            }
        }
    }
    Ok(Mesh {
        n,
        mx,
        my,
        lx,
        ly,
        basis,
        element_origins,
        coords,
    })
}

impl Mesh {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mx(&self) -> usize {
        self.mx
    }

    pub fn my(&self) -> usize {
        self.my
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.mx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.my as f64
    }

    pub fn basis(&self) -> &GllBasis {
        &self.basis
    }

    pub fn num_elements(&self) -> usize {
        self.mx * self.my
    }

    /// Nodes per element, `n²`.
    pub fn nodes_per_element(&self) -> usize {
        self.n * self.n
    }

    /// Total node count `r = n² mx my`.
    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn element_origins(&self) -> &[[f64; 2]] {
        &self.element_origins
    }

    pub fn element_id(&self, ix: usize, iy: usize) -> usize {
        ix * self.my + iy
    }

    /// `(ix, iy)` grid position of an element.
    pub fn element_position(&self, element: usize) -> (usize, usize) {
        (element / self.my, element % self.my)
    }

    pub fn global_index(&self, element: usize, ix: usize, iy: usize) -> usize {
        element * self.n * self.n + iy * self.n + ix
    }

    /// `(element, ix, iy)` for a global node index.
    pub fn local_index(&self, global: usize) -> (usize, usize, usize) {
        let npe = self.n * self.n;
        let (e, l) = (global / npe, global % npe);
        (e, l % self.n, l / self.n)
    }

    /// Element across `side`, if any.
    pub fn neighbor(&self, element: usize, side: Side) -> Option<usize> {
        let (ix, iy) = self.element_position(element);
        match side {
            Side::West => ix.checked_sub(1).map(|j| self.element_id(j, iy)),
            Side::East => (ix + 1 < self.mx).then(|| self.element_id(ix + 1, iy)),
            Side::South => iy.checked_sub(1).map(|j| self.element_id(ix, j)),
            Side::North => (iy + 1 < self.my).then(|| self.element_id(ix, iy + 1)),
        }
    }

    /// Whether the global node lies on the physical boundary ∂Ω.
    pub fn on_boundary(&self, global: usize) -> bool {
        let (e, ix, iy) = self.local_index(global);
        Side::ALL
            .iter()
            .any(|&s| s.contains(self.n, ix, iy) && self.neighbor(e, s).is_none())
    }

    /// Whether the global node lies on an inter-element interface.
    pub fn on_interface(&self, global: usize) -> bool {
        let (e, ix, iy) = self.local_index(global);
        Side::ALL
            .iter()
            .any(|&s| s.contains(self.n, ix, iy) && self.neighbor(e, s).is_some())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Shared edge is vertical: the pair is left/right neighbours.
    Vertical,
    /// Shared edge is horizontal: the pair is bottom/top neighbours.
    Horizontal,
}

/// Two adjacent elements and the Γ slots on their shared edge.
#[derive(Clone, Debug)]
pub struct InterfacePair {
    /// Left (vertical) or bottom (horizontal) element.
    pub lower: usize,
    /// Right (vertical) or top (horizontal) element.
    pub upper: usize,
    pub orientation: Orientation,
    /// Γ indices owned by this pair.
    pub slots: Vec<usize>,
}

/// The interfacial grid Γ: a unique enumeration of every node lying on an
/// inter-element edge, grouped by interface pair.
#[derive(Clone, Debug)]
pub struct InterfaceSet {
    pairs: Vec<InterfacePair>,
    gamma_to_global: Vec<usize>,
    global_to_gamma: Vec<Option<usize>>,
    pair_of_slot: Vec<usize>,
}

/// Enumerates Γ.
///
/// Pairs are ordered vertical first (by `ix`, then `iy`), then horizontal
/// (by `iy`, then `ix`). Within a pair, the left/bottom element's edge nodes
/// come first, then the right/top element's, each in ascending coordinate.
/// A node on both a vertical and a horizontal interface belongs to the
/// vertical pair.
pub fn enumerate_interfaces(mesh: &Mesh) -> InterfaceSet {
    let (n, mx, my) = (mesh.n, mesh.mx, mesh.my);
    let mut pairs = Vec::with_capacity((mx - 1) * my + (my - 1) * mx);
    let mut gamma_to_global = Vec::new();
    let mut global_to_gamma = vec![None; mesh.num_nodes()];
    let mut pair_of_slot = Vec::new();

    let mut push_pair = |lower: usize, upper: usize, orientation: Orientation, sides: [Side; 2]| {
        let pair_id = pairs.len();
        let mut slots = Vec::with_capacity(2 * n);
        for (element, side) in [(lower, sides[0]), (upper, sides[1])] {
            for (ix, iy) in side.local_nodes(n) {
                let g = mesh.global_index(element, ix, iy);
                if global_to_gamma[g].is_some() {
                    continue;
                }
                let slot = gamma_to_global.len();
                global_to_gamma[g] = Some(slot);
                gamma_to_global.push(g);
                pair_of_slot.push(pair_id);
                slots.push(slot);
            }
        }
        pairs.push(InterfacePair {
            lower,
            upper,
            orientation,
            slots,
        });
    };

    for ix in 0..mx.saturating_sub(1) {
        for iy in 0..my {
            push_pair(
                mesh.element_id(ix, iy),
                mesh.element_id(ix + 1, iy),
                Orientation::Vertical,
                [Side::East, Side::West],
            );
        }
    }
    for iy in 0..my.saturating_sub(1) {
        for ix in 0..mx {
            push_pair(
                mesh.element_id(ix, iy),
                mesh.element_id(ix, iy + 1),
                Orientation::Horizontal,
                [Side::North, Side::South],
            );
        }
    }
    InterfaceSet {
        pairs,
        gamma_to_global,
        global_to_gamma,
        pair_of_slot,
    }
}

impl InterfaceSet {
    /// Unique interfacial node count `k`.
    pub fn k(&self) -> usize {
        self.gamma_to_global.len()
    }

    /// Number of interface pairs `d`.
    pub fn d(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[InterfacePair] {
        &self.pairs
    }

    pub fn gamma_to_global(&self) -> &[usize] {
        &self.gamma_to_global
    }

    pub fn gamma_index(&self, global: usize) -> Option<usize> {
        self.global_to_gamma[global]
    }

    /// Interface pair owning a Γ slot.
    pub fn pair_of_slot(&self, slot: usize) -> usize {
        self.pair_of_slot[slot]
    }

    /// `E v`: scatter a Γ vector into a zero full-grid vector.
    pub fn include_gamma(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("include_gamma", self.k(), v.len())?;
        let mut out = vec![0.0; self.global_to_gamma.len()];
        for (&g, &x) in self.gamma_to_global.iter().zip(v) {
            out[g] = x;
        }
        Ok(out)
    }

    /// `w + E v` in place.
    pub(crate) fn add_included(&self, v: &[f64], w: &mut [f64]) {
        for (&g, &x) in self.gamma_to_global.iter().zip(v) {
            w[g] += x;
        }
    }

    /// `Eᵀ w`: gather the Γ entries of a full-grid vector.
    pub fn restrict_gamma(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("restrict_gamma", self.global_to_gamma.len(), w.len())?;
        Ok(self.gamma_to_global.iter().map(|&g| w[g]).collect())
    }
}
