//! Voxel lattices as deduplicated nodes and beams.
//!
//! Node identity uses integer half-unit coordinates: with the voxel at grid
//! cell `g` occupying the cube `[2g, 2g+2]` (in units of `pitch/2`), its
//! center sits at `2g + 1` and its six nodes at `2g + 1 ± e_t`. A node key
//! therefore has exactly one even coordinate, and that coordinate's axis is
//! the node type. Shared nodes between adjacent voxels collapse to the same
//! key with no floating-point comparisons.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("voxel grid must contain at least one voxel")]
    EmptyGrid,
    #[error("pitch must be positive, got {0}")]
    NonPositivePitch(String),
    #[error("node index {0} out of range 0..6")]
    BadNodeIndex(usize),
    #[error("({0},{1},{2}) is not a valid node key: exactly one coordinate must be even")]
    BadNodeKey(i64, i64, i64),
}

/// Canonical node identity: position in units of `pitch/2`.
///
/// Exactly one coordinate is even; its axis is the node type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeKey(pub [i64; 3]);

impl NodeKey {
    pub fn new(h: [i64; 3]) -> Result<Self, LatticeError> {
        let evens = h.iter().filter(|c| (**c).rem_euclid(2) == 0).count();
        if evens != 1 {
            return Err(LatticeError::BadNodeKey(h[0], h[1], h[2]));
        }
        Ok(NodeKey(h))
    }

    /// Axis of the unique even coordinate.
    pub fn node_type(&self) -> usize {
        self.0
            .iter()
            .position(|c| c.rem_euclid(2) == 0)
            .expect("NodeKey invariant: one even coordinate")
    }

    /// Physical position in mm.
    pub fn position(&self, pitch_mm: f64) -> [f64; 3] {
        let s = pitch_mm / 2.0;
        [self.0[0] as f64 * s, self.0[1] as f64 * s, self.0[2] as f64 * s]
    }
}

/// A node named from a particular host voxel: grid cell plus within-voxel
/// index. Indices 0,1,2 sit at the +x,+y,+z faces of the voxel's bounding
/// cube; 3,4,5 at the -x,-y,-z faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub voxel: [i64; 3],
    pub node_index: usize,
}

impl NodeRef {
    pub fn new(voxel: [i64; 3], node_index: usize) -> Result<Self, LatticeError> {
        if node_index >= 6 {
            return Err(LatticeError::BadNodeIndex(node_index));
        }
        Ok(NodeRef { voxel, node_index })
    }

    /// Axis of the face this index names (`node_index mod 3`).
    pub fn axis(&self) -> usize {
        self.node_index % 3
    }

    /// +1 for indices 0..2, -1 for 3..5.
    pub fn face_sign(&self) -> i64 {
        if self.node_index < 3 {
            1
        } else {
            -1
        }
    }

    /// The canonical key of this node: `2g + 1 ± e_t`.
    pub fn key(&self) -> NodeKey {
        let t = self.axis();
        let s = self.face_sign();
        let mut h = [0i64; 3];
        for a in 0..3 {
            h[a] = 2 * self.voxel[a] + 1;
        }
        h[t] += s;
        NodeKey(h)
    }
}

/// Total function from host labeling to canonical key.
pub fn canonical_node_key(node: NodeRef) -> NodeKey {
    node.key()
}

/// One voxel edge. Endpoints are two same-voxel nodes of different type;
/// the rest length is `pitch / sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Beam {
    pub a: NodeKey,
    pub b: NodeKey,
}

/// Occupied cells of a voxel grid plus the bounding-cube edge length.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    occupied: BTreeSet<[i64; 3]>,
    pitch_mm: f64,
}

impl VoxelGrid {
    pub fn new<I: IntoIterator<Item = [i64; 3]>>(
        voxels: I,
        pitch_mm: f64,
    ) -> Result<Self, LatticeError> {
        if !(pitch_mm > 0.0) {
            return Err(LatticeError::NonPositivePitch(format!("{pitch_mm}")));
        }
        let occupied: BTreeSet<[i64; 3]> = voxels.into_iter().collect();
        if occupied.is_empty() {
            return Err(LatticeError::EmptyGrid);
        }
        Ok(VoxelGrid { occupied, pitch_mm })
    }

    /// Axis-aligned box of voxels, `nx*ny*nz` cells anchored at the origin.
    pub fn block(nx: i64, ny: i64, nz: i64, pitch_mm: f64) -> Result<Self, LatticeError> {
        let mut cells = Vec::new();
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    cells.push([x, y, z]);
                }
            }
        }
        VoxelGrid::new(cells, pitch_mm)
    }

    pub fn pitch_mm(&self) -> f64 {
        self.pitch_mm
    }

    pub fn voxels(&self) -> impl Iterator<Item = &[i64; 3]> {
        self.occupied.iter()
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn contains(&self, voxel: [i64; 3]) -> bool {
        self.occupied.contains(&voxel)
    }

    /// The occupied voxels hosting `key`, each with the matching node index.
    ///
    /// At most two voxels host a node; when two do, their indices differ by 3
    /// and the voxels are adjacent along the node-type axis.
    pub fn hosts(&self, key: NodeKey) -> Vec<NodeRef> {
        let t = key.node_type();
        let mut out = Vec::with_capacity(2);
        // Host on the negative side: node at its +t face (index t).
        let mut g = [0i64; 3];
        let mut ok = true;
        for a in 0..3 {
            let c = key.0[a] - 1 - if a == t { 1 } else { 0 };
            if c.rem_euclid(2) != 0 {
                ok = false;
                break;
            }
            g[a] = c / 2;
        }
        if ok && self.contains(g) {
            out.push(NodeRef { voxel: g, node_index: t });
        }
        // Host on the positive side: node at its -t face (index t + 3).
        let mut g = [0i64; 3];
        let mut ok = true;
        for a in 0..3 {
            let c = key.0[a] - 1 + if a == t { 1 } else { 0 };
            if c.rem_euclid(2) != 0 {
                ok = false;
                break;
            }
            g[a] = c / 2;
        }
        if ok && self.contains(g) {
            out.push(NodeRef { voxel: g, node_index: t + 3 });
        }
        out
    }
}

/// Deduplicated nodes and per-voxel beams of a grid.
///
/// Nodes are sorted by key, so indices are stable for a given grid.
#[derive(Debug, Clone)]
pub struct Lattice {
    grid: VoxelGrid,
    nodes: Vec<NodeKey>,
    beams: Vec<[usize; 2]>,
}

/// Within one voxel, the 12 edges as index pairs. Every pair of the six face
/// nodes except the three antipodal pairs (0-3, 1-4, 2-5).
const VOXEL_EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [0, 2],
    [0, 4],
    [0, 5],
    [1, 2],
    [1, 3],
    [1, 5],
    [2, 3],
    [2, 4],
    [3, 4],
    [3, 5],
    [4, 5],
];

impl Lattice {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn beam_count(&self) -> usize {
        self.beams.len()
    }

    pub fn nodes(&self) -> &[NodeKey] {
        &self.nodes
    }

    pub fn beams(&self) -> impl Iterator<Item = Beam> + '_ {
        self.beams
            .iter()
            .map(|[i, j]| Beam { a: self.nodes[*i], b: self.nodes[*j] })
    }

    /// Beam endpoints as indices into `nodes()`.
    pub fn beam_indices(&self) -> &[[usize; 2]] {
        &self.beams
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn pitch_mm(&self) -> f64 {
        self.grid.pitch_mm()
    }

    pub fn node_id(&self, key: NodeKey) -> Option<usize> {
        self.nodes.binary_search(&key).ok()
    }

    pub fn contains_node(&self, key: NodeKey) -> bool {
        self.node_id(key).is_some()
    }

    /// Node position in mm.
    pub fn position(&self, id: usize) -> [f64; 3] {
        self.nodes[id].position(self.grid.pitch_mm())
    }
}

/// Collect the union of every voxel's six node keys and the 12 edges per
/// voxel. Beams are never shared: adjacent voxels share one node, not an
/// edge.
pub fn build_lattice(grid: &VoxelGrid) -> Lattice {
    let mut keys: BTreeSet<NodeKey> = BTreeSet::new();
    for &voxel in grid.voxels() {
        for node_index in 0..6 {
            keys.insert(NodeRef { voxel, node_index }.key());
        }
    }
    let nodes: Vec<NodeKey> = keys.into_iter().collect();
    let mut beams = Vec::with_capacity(12 * grid.len());
    for &voxel in grid.voxels() {
        let ids: Vec<usize> = (0..6)
            .map(|node_index| {
                let key = NodeRef { voxel, node_index }.key();
                nodes.binary_search(&key).expect("voxel node in node set")
            })
            .collect();
        for [p, q] in VOXEL_EDGES {
            beams.push([ids[p], ids[q]]);
        }
    }
    Lattice { grid: grid.clone(), nodes, beams }
}

/// On-disk form: `{"pitch_mm": number, "voxels": [[gx,gy,gz], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub pitch_mm: f64,
    pub voxels: Vec<[i64; 3]>,
}

impl LatticeSpec {
    pub fn to_grid(&self) -> Result<VoxelGrid, LatticeError> {
        VoxelGrid::new(self.voxels.iter().copied(), self.pitch_mm)
    }

    pub fn from_grid(grid: &VoxelGrid) -> Self {
        LatticeSpec {
            pitch_mm: grid.pitch_mm(),
            voxels: grid.voxels().copied().collect(),
        }
    }
}
