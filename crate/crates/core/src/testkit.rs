//! Deterministic generators for randomized tests. Not part of the public
//! API surface; kept in the library so integration suites across crates
//! share one model generator.

use crate::lattice::{build_lattice, Lattice, VoxelGrid};
use crate::pom::{check_disjoint_planes, ControlNode, EndEffector, PomModel};

/// SplitMix64: tiny deterministic generator, good enough for test shapes.
#[derive(Debug, Clone)]
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in 0..n.
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Uniform in [-1, 1).
    pub fn signed_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

/// Random nonempty voxel set inside a small box.
pub fn random_grid(rng: &mut Rng, pitch_mm: f64) -> VoxelGrid {
    let (nx, ny, nz) = (1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(3));
    let mut cells = Vec::new();
    for x in 0..nx as i64 {
        for y in 0..ny as i64 {
            for z in 0..nz as i64 {
                if rng.below(4) != 0 {
                    cells.push([x, y, z]);
                }
            }
        }
    }
    if cells.is_empty() {
        cells.push([0, 0, 0]);
    }
    VoxelGrid::new(cells, pitch_mm).expect("nonempty grid")
}

/// A valid model over the lattice: controls on disjoint planes, and at
/// least one in-plane effector per control so the fully-specified inverse
/// problem has full column rank.
pub fn random_model(rng: &mut Rng, lattice: &Lattice) -> PomModel {
    let grid = lattice.grid();
    let voxels: Vec<[i64; 3]> = grid.voxels().copied().collect();
    let mut controls: Vec<ControlNode> = Vec::new();
    let want = 1 + rng.below(4);
    for _ in 0..40 {
        if controls.len() >= want {
            break;
        }
        let voxel = voxels[rng.below(voxels.len())];
        let node_index = rng.below(6);
        let node = crate::lattice::NodeRef::new(voxel, node_index).expect("index < 6");
        let t = node.key().node_type();
        let d = match rng.below(2) {
            0 => (t + 1) % 3,
            _ => (t + 2) % 3,
        };
        let candidate = ControlNode::new(node, d).expect("d != t by construction");
        let mut trial = controls.clone();
        trial.push(candidate);
        if check_disjoint_planes(&trial).is_ok() {
            controls = trial;
        }
    }
    let mut effectors: Vec<EndEffector> = Vec::new();
    for control in &controls {
        let members: Vec<_> = crate::pom::plane_members(lattice, control)
            .expect("control node lies in the lattice")
            .into_iter()
            .collect();
        for _ in 0..(1 + rng.below(2)) {
            let key = members[rng.below(members.len())];
            let host = grid.hosts(key)[rng.below(grid.hosts(key).len())];
            effectors.push(EndEffector::new(host));
        }
    }
    // A few bystanders that may sit outside every control plane.
    for _ in 0..rng.below(3) {
        let key = lattice.nodes()[rng.below(lattice.node_count())];
        let host = grid.hosts(key)[0];
        effectors.push(EndEffector::new(host));
    }
    PomModel::new(controls, effectors).expect("disjoint planes by construction")
}

/// Random grid plus model plus stroke vector.
pub fn random_case(rng: &mut Rng) -> (Lattice, PomModel, Vec<f64>) {
    let grid = random_grid(rng, 76.2);
    let lattice = build_lattice(&grid);
    let model = random_model(rng, &lattice);
    let q: Vec<f64> = (0..model.num_controls())
        .map(|_| 5.0 * rng.signed_unit())
        .collect();
    (lattice, model, q)
}
