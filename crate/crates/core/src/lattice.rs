//! Geometry of the square-lattice region: vertices, edges, boundary sides,
//! diagonal lines and the half-turn symmetry.
//!
//! The interior is the square `D_N = {(n1, n2) : 0 <= n1, n2 <= N}`. The
//! boundary consists of the lattice vertices adjacent to the interior, split
//! into four sides of `N + 1` vertices each. The four corners of the bounding
//! square are *not* boundary vertices: they have no interior neighbour.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice vertex `n1 + i n2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId {
    pub n1: i64,
    pub n2: i64,
}

impl VertexId {
    pub const fn new(n1: i64, n2: i64) -> Self {
        Self { n1, n2 }
    }

    /// Coordinate sum, i.e. the index of the diagonal line through the vertex.
    pub fn level(self) -> i64 {
        self.n1 + self.n2
    }

    pub fn right(self) -> Self {
        Self::new(self.n1 + 1, self.n2)
    }

    pub fn left(self) -> Self {
        Self::new(self.n1 - 1, self.n2)
    }

    pub fn up(self) -> Self {
        Self::new(self.n1, self.n2 + 1)
    }

    pub fn down(self) -> Self {
        Self::new(self.n1, self.n2 - 1)
    }

    /// The four lattice neighbours in the order right, up, left, down.
    pub fn neighbors(self) -> [VertexId; 4] {
        [self.right(), self.up(), self.left(), self.down()]
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.n1, self.n2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Right,
    Up,
}

/// A lattice edge in canonical form: `origin` is `e(0)` and the edge points
/// right or up, so `e(1)` is `origin + 1` or `origin + i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId {
    pub origin: VertexId,
    pub direction: Direction,
}

impl EdgeId {
    pub const fn new(origin: VertexId, direction: Direction) -> Self {
        Self { origin, direction }
    }

    pub fn right_of(v: VertexId) -> Self {
        Self::new(v, Direction::Right)
    }

    pub fn left_of(v: VertexId) -> Self {
        Self::new(v.left(), Direction::Right)
    }

    pub fn up_of(v: VertexId) -> Self {
        Self::new(v, Direction::Up)
    }

    pub fn down_of(v: VertexId) -> Self {
        Self::new(v.down(), Direction::Up)
    }

    /// The canonical edge joining two adjacent vertices.
    pub fn between(a: VertexId, b: VertexId) -> Option<Self> {
        match (b.n1 - a.n1, b.n2 - a.n2) {
            (1, 0) => Some(Self::right_of(a)),
            (-1, 0) => Some(Self::right_of(b)),
            (0, 1) => Some(Self::up_of(a)),
            (0, -1) => Some(Self::up_of(b)),
            _ => None,
        }
    }

    /// `e(0)`.
    pub fn start(self) -> VertexId {
        self.origin
    }

    /// `e(1)`.
    pub fn end(self) -> VertexId {
        match self.direction {
            Direction::Right => self.origin.right(),
            Direction::Up => self.origin.up(),
        }
    }

    pub fn endpoints(self) -> [VertexId; 2] {
        [self.start(), self.end()]
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start(), self.end())
    }
}

/// One of the four sides of the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Top,
    Bottom,
    Left,
    Right,
}

impl Side {
    /// Matrix order of the sides.
    pub const ALL: [Side; 4] = [Side::Top, Side::Bottom, Side::Left, Side::Right];

    fn rank(self) -> usize {
        match self {
            Side::Top => 0,
            Side::Bottom => 1,
            Side::Left => 2,
            Side::Right => 3,
        }
    }
}

/// A boundary vertex addressed by side and position `m` along that side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundaryIndex {
    pub side: Side,
    pub m: usize,
}

/// The finite region `Omega = D_N ∪ ∂Omega` with its edge sets.
#[derive(Debug, Clone)]
pub struct Region {
    n: usize,
    interior: Vec<VertexId>,
    boundary: Vec<VertexId>,
    edges: Vec<EdgeId>,
    interior_edges: Vec<EdgeId>,
    boundary_edges: Vec<EdgeId>,
    edge_index: HashMap<EdgeId, usize>,
}

impl Region {
    /// Builds the region with interior `D_N`. `N = 0` gives a single interior vertex.
    pub fn new(n: usize) -> Self {
        let ni = n as i64;
        let interior: Vec<VertexId> = (0..=ni)
            .flat_map(|y| (0..=ni).map(move |x| VertexId::new(x, y)))
            .collect();

        let mut boundary = Vec::with_capacity(4 * (n + 1));
        for side in Side::ALL {
            for m in 0..=n {
                boundary.push(side_vertex(n, side, m));
            }
        }

        // Every edge of E_Omega has at least one interior endpoint; enumerate
        // the right and up edges leaving each vertex of the bounding box.
        let mut edges = Vec::new();
        for y in -1..=ni + 1 {
            for x in -1..=ni + 1 {
                for dir in [Direction::Right, Direction::Up] {
                    let e = EdgeId::new(VertexId::new(x, y), dir);
                    let [a, b] = e.endpoints();
                    if in_square(ni, a) || in_square(ni, b) {
                        edges.push(e);
                    }
                }
            }
        }
        let (interior_edges, boundary_edges): (Vec<_>, Vec<_>) = edges
            .iter()
            .partition(|e| e.endpoints().iter().all(|&v| in_square(ni, v)));
        let edge_index = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();

        Self {
            n,
            interior,
            boundary,
            edges,
            interior_edges,
            boundary_edges,
            edge_index,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of boundary vertices, `4 (N + 1)`.
    pub fn boundary_len(&self) -> usize {
        self.boundary.len()
    }

    pub fn interior(&self) -> &[VertexId] {
        &self.interior
    }

    /// Boundary vertices in matrix order (T, B, L, R; `m` ascending).
    pub fn boundary(&self) -> &[VertexId] {
        &self.boundary
    }

    /// All edges of `E_Omega`.
    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn interior_edges(&self) -> &[EdgeId] {
        &self.interior_edges
    }

    pub fn boundary_edges(&self) -> &[EdgeId] {
        &self.boundary_edges
    }

    pub fn edge_index(&self, e: EdgeId) -> Option<usize> {
        self.edge_index.get(&e).copied()
    }

    pub fn is_interior(&self, v: VertexId) -> bool {
        in_square(self.n as i64, v)
    }

    pub fn is_boundary(&self, v: VertexId) -> bool {
        self.boundary_position(v).is_some()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.is_interior(v) || self.is_boundary(v)
    }

    pub fn is_interior_edge(&self, e: EdgeId) -> bool {
        e.endpoints().iter().all(|&v| self.is_interior(v))
    }

    /// Row-major index of an interior vertex.
    pub fn interior_position(&self, v: VertexId) -> Option<usize> {
        self.is_interior(v)
            .then(|| v.n2 as usize * (self.n + 1) + v.n1 as usize)
    }

    /// Matrix position of a boundary vertex.
    pub fn boundary_position(&self, v: VertexId) -> Option<usize> {
        let bi = self.boundary_index(v)?;
        Some(self.position_of(bi))
    }

    pub fn position_of(&self, bi: BoundaryIndex) -> usize {
        bi.side.rank() * (self.n + 1) + bi.m
    }

    pub fn boundary_index(&self, v: VertexId) -> Option<BoundaryIndex> {
        let ni = self.n as i64;
        let along = |c: i64| (0..=ni).contains(&c).then_some(c as usize);
        if v.n2 == ni + 1 {
            along(v.n1).map(|m| BoundaryIndex { side: Side::Top, m })
        } else if v.n2 == -1 {
            along(v.n1).map(|m| BoundaryIndex { side: Side::Bottom, m })
        } else if v.n1 == -1 {
            along(v.n2).map(|m| BoundaryIndex { side: Side::Left, m })
        } else if v.n1 == ni + 1 {
            along(v.n2).map(|m| BoundaryIndex { side: Side::Right, m })
        } else {
            None
        }
    }

    pub fn boundary_vertex(&self, bi: BoundaryIndex) -> VertexId {
        side_vertex(self.n, bi.side, bi.m)
    }

    /// Positions of one side in matrix order.
    pub fn side_positions(&self, side: Side) -> std::ops::Range<usize> {
        let start = side.rank() * (self.n + 1);
        start..start + self.n + 1
    }

    /// The unique interior neighbour of a boundary vertex.
    pub fn interior_neighbor(&self, v: VertexId) -> Option<VertexId> {
        self.is_boundary(v)
            .then(|| v.neighbors().into_iter().find(|&w| self.is_interior(w)))
            .flatten()
    }

    /// Degree in the subgraph `(Omega, E_Omega)`.
    pub fn degree(&self, v: VertexId) -> Result<usize> {
        if self.is_interior(v) {
            Ok(v.neighbors().iter().filter(|&&w| self.contains(w)).count())
        } else if self.is_boundary(v) {
            Ok(v.neighbors().iter().filter(|&&w| self.is_interior(w)).count())
        } else {
            Err(Error::NotInRegion(v))
        }
    }

    /// Vertices `alpha_{k,0}, ..., alpha_{k,2N+2-k}` of the diagonal line
    /// `x1 + x2 = k`, starting on the top side and ending on the right side.
    pub fn diagonal_vertices(&self, k: usize) -> Result<Vec<VertexId>> {
        let n = self.n;
        if k < n + 1 || k > 2 * n {
            return Err(Error::OutOfRange {
                what: "k",
                value: k as i64,
                lo: n as i64 + 1,
                hi: 2 * n as i64,
            });
        }
        let start = VertexId::new(k as i64 - n as i64 - 1, n as i64 + 1);
        Ok((0..=(2 * n + 2 - k) as i64)
            .map(|l| VertexId::new(start.n1 + l, start.n2 - l))
            .collect())
    }

    /// Rotation by angle pi about the centre of `D_N`.
    pub fn rotate_pi(&self, v: VertexId) -> Result<VertexId> {
        if !self.contains(v) {
            return Err(Error::NotInRegion(v));
        }
        let ni = self.n as i64;
        Ok(VertexId::new(ni - v.n1, ni - v.n2))
    }

    pub fn rotate_edge(&self, e: EdgeId) -> Result<EdgeId> {
        let [a, b] = e.endpoints();
        let (ra, rb) = (self.rotate_pi(a)?, self.rotate_pi(b)?);
        Ok(EdgeId::between(ra, rb).expect("rotation preserves adjacency"))
    }

    /// Boundary permutation induced by the half turn: entry `i` is the
    /// position of the image of boundary vertex `i`.
    pub fn rotation_permutation(&self) -> Vec<usize> {
        self.boundary
            .iter()
            .map(|&v| {
                let r = self.rotate_pi(v).expect("boundary vertex");
                self.boundary_position(r).expect("rotation maps boundary to boundary")
            })
            .collect()
    }

    /// Interior edges recovered by the diagonal sweep `k = 2N, ..., N+1`:
    /// the left and down edges of each interior `alpha_{k,l}`, in sweep order.
    pub fn upper_triangle_edges(&self) -> Vec<EdgeId> {
        let n = self.n;
        let mut out = Vec::new();
        for k in (n + 1..=2 * n).rev() {
            let diag = self.diagonal_vertices(k).expect("k in range");
            for &a in &diag[1..diag.len() - 1] {
                out.push(EdgeId::left_of(a));
                out.push(EdgeId::down_of(a));
            }
        }
        out
    }
}

fn in_square(n: i64, v: VertexId) -> bool {
    (0..=n).contains(&v.n1) && (0..=n).contains(&v.n2)
}

fn side_vertex(n: usize, side: Side, m: usize) -> VertexId {
    let (ni, mi) = (n as i64, m as i64);
    match side {
        Side::Top => VertexId::new(mi, ni + 1),
        Side::Bottom => VertexId::new(mi, -1),
        Side::Left => VertexId::new(-1, mi),
        Side::Right => VertexId::new(ni + 1, mi),
    }
}
