//! The Planes-of-Motion (POM) reduced kinematic model.
//!
//! A control node displaced along one axis activates the lattice plane
//! through it whose normal is the actuation dimension `d`. Every node in
//! that plane translates by the same magnitude, in a direction given by a
//! column of the constant matrix `A_d`, with sign alternating in a
//! checkerboard over the in-plane voxel grid. The displacement of end
//! effector `j` under control displacements `q` is
//!
//! ```text
//! x_j = sum_i a(d_i, n_j) * c_ij * q_i
//! ```
//!
//! which is linear in `q`, so the same map serves forward and inverse
//! kinematics.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Lattice, NodeKey, NodeRef};

/// Actuation matrices, indexed `[d][column n]` -> displacement vector.
///
/// `A[d]` describes how a unit control displacement along dimension `d`
/// moves node `n` of every voxel in the activated plane. Row `d` of `A_d`
/// is zero (no motion along the plane normal) and columns `d`, `d+3` are
/// zero (the out-of-plane nodes of each voxel do not translate).
pub const ACTUATION_MATRICES: [[[i8; 3]; 6]; 3] = [
    // A_0
    [
        [0, 0, 0],
        [0, 0, -1],
        [0, 1, 0],
        [0, 0, 0],
        [0, 0, 1],
        [0, -1, 0],
    ],
    // A_1
    [
        [0, 0, -1],
        [0, 0, 0],
        [1, 0, 0],
        [0, 0, 1],
        [0, 0, 0],
        [-1, 0, 0],
    ],
    // A_2
    [
        [0, 1, 0],
        [-1, 0, 0],
        [0, 0, 0],
        [0, -1, 0],
        [1, 0, 0],
        [0, 0, 0],
    ],
];

/// Column `n` of `A_d` as a float vector.
pub fn actuation_column(d: usize, n: usize) -> Vector3<f64> {
    assert!(d < 3 && n < 6, "actuation_column indices out of range");
    let c = ACTUATION_MATRICES[d][n];
    Vector3::new(c[0] as f64, c[1] as f64, c[2] as f64)
}

/// Tolerance below which an inverse-kinematics residual counts as a
/// consistent specification (mm).
pub const IK_RESIDUAL_TOL_MM: f64 = 1e-6;

/// Relative singular-value threshold for rank decisions in the masked
/// least-squares solve.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PomError {
    #[error("control at {key:?} has node type {axis} equal to its plane normal; the node lies out of every plane with that normal")]
    ControlOutOfPlane { key: NodeKey, axis: usize },
    #[error("plane normal {0} out of range 0..3")]
    BadPlaneNormal(usize),
    #[error("controls {a} and {b} share a plane of motion (normal {d}, coordinate {coord})")]
    SharedPlane { a: usize, b: usize, d: usize, coord: i64 },
    #[error("expected {expected} control displacements, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("control {control} ({key:?}) affects no specified component; the inverse problem is rank deficient")]
    RankDeficient { control: usize, key: NodeKey },
    #[error("desired displacements are inconsistent: residual {residual_mm} mm exceeds {IK_RESIDUAL_TOL_MM} mm")]
    Inconsistent { residual_mm: f64 },
    #[error("expected desired displacements for {expected} effectors, got {got}")]
    EffectorMismatch { expected: usize, got: usize },
    #[error("no displacement component was specified")]
    EmptyMask,
    #[error("control node {0:?} is not part of the lattice")]
    UnknownNode(NodeKey),
}

/// A node driven directly by an actuator.
///
/// `plane_normal` selects the activated plane of motion: all lattice nodes
/// sharing this node's coordinate along that axis. Positive `q` moves the
/// node along `+a(plane_normal, node.node_index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlNode {
    pub node: NodeRef,
    pub plane_normal: usize,
}

impl ControlNode {
    pub fn new(node: NodeRef, plane_normal: usize) -> Result<Self, PomError> {
        if plane_normal >= 3 {
            return Err(PomError::BadPlaneNormal(plane_normal));
        }
        let key = node.key();
        if key.node_type() == plane_normal {
            return Err(PomError::ControlOutOfPlane { key, axis: plane_normal });
        }
        Ok(ControlNode { node, plane_normal })
    }

    pub fn key(&self) -> NodeKey {
        self.node.key()
    }

    /// Half-unit coordinate of the activated plane along its normal.
    pub fn plane_coord(&self) -> i64 {
        self.key().0[self.plane_normal]
    }

    /// Unit direction the control node moves along for positive `q`.
    pub fn motion_direction(&self) -> Vector3<f64> {
        actuation_column(self.plane_normal, self.node.node_index)
    }
}

/// A node whose displacement the model reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndEffector {
    pub node: NodeRef,
}

impl EndEffector {
    pub fn new(node: NodeRef) -> Self {
        EndEffector { node }
    }

    pub fn key(&self) -> NodeKey {
        self.node.key()
    }

    pub fn node_index(&self) -> usize {
        self.node.node_index
    }
}

/// All lattice nodes in the plane a control activates.
///
/// Membership is the integer test `key[d] == control.key[d]`; the plane
/// coordinate is odd, so nodes of type `d` (even coordinate on that axis)
/// are never members.
pub fn plane_members(
    lattice: &Lattice,
    control: &ControlNode,
) -> Result<BTreeSet<NodeKey>, PomError> {
    let key = control.key();
    if !lattice.contains_node(key) {
        return Err(PomError::UnknownNode(key));
    }
    let d = control.plane_normal;
    let coord = key.0[d];
    Ok(lattice
        .nodes()
        .iter()
        .copied()
        .filter(|k| k.0[d] == coord)
        .collect())
}

/// Checkerboard coupling between a control and an effector.
///
/// Zero when the effector is outside the control's plane; otherwise
/// `(-1)^(dga + dgb)` over the two in-plane axes of the host-voxel grid
/// offset. The product `c * a(d, n_j)` does not depend on which host voxel
/// labels a shared node: switching hosts flips both the parity and the
/// column sign.
pub fn connectivity(control: &ControlNode, effector: &EndEffector) -> i8 {
    let d = control.plane_normal;
    if effector.key().0[d] != control.key().0[d] {
        return 0;
    }
    let mut parity = 0i64;
    for axis in 0..3 {
        if axis == d {
            continue;
        }
        parity += effector.node.voxel[axis] - control.node.voxel[axis];
    }
    if parity.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Report of controls found sharing a plane of motion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneViolation {
    /// Pairs of control indices with the shared (normal, coordinate).
    pub pairs: Vec<(usize, usize, usize, i64)>,
}

/// Ok iff every control activates a distinct plane `(d, key[d])`.
pub fn check_disjoint_planes(controls: &[ControlNode]) -> Result<(), PlaneViolation> {
    let mut pairs = Vec::new();
    for i in 0..controls.len() {
        for j in (i + 1)..controls.len() {
            if controls[i].plane_normal == controls[j].plane_normal
                && controls[i].plane_coord() == controls[j].plane_coord()
            {
                pairs.push((i, j, controls[i].plane_normal, controls[i].plane_coord()));
            }
        }
    }
    if pairs.is_empty() {
        Ok(())
    } else {
        Err(PlaneViolation { pairs })
    }
}

/// Solution of the masked inverse problem.
#[derive(Debug, Clone)]
pub struct IkSolution {
    /// Control displacements, mm.
    pub q: Vec<f64>,
    /// Euclidean norm of the residual over specified components, mm.
    pub residual_mm: f64,
}

/// The assembled model: controls, effectors, connectivity, and the cached
/// signed columns `a(d_i, n_j) * c_ij` that Eq.-style evaluation sums.
#[derive(Debug, Clone)]
pub struct PomModel {
    controls: Vec<ControlNode>,
    effectors: Vec<EndEffector>,
    connectivity: Vec<Vec<i8>>,
    signed_columns: Vec<Vec<Vector3<f64>>>,
}

impl PomModel {
    pub fn new(
        controls: Vec<ControlNode>,
        effectors: Vec<EndEffector>,
    ) -> Result<Self, PomError> {
        if let Err(violation) = check_disjoint_planes(&controls) {
            let (a, b, d, coord) = violation.pairs[0];
            return Err(PomError::SharedPlane { a, b, d, coord });
        }
        let connectivity: Vec<Vec<i8>> = effectors
            .iter()
            .map(|e| controls.iter().map(|c| connectivity(c, e)).collect())
            .collect();
        let signed_columns = effectors
            .iter()
            .enumerate()
            .map(|(j, e)| {
                controls
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        actuation_column(c.plane_normal, e.node_index())
                            * connectivity[j][i] as f64
                    })
                    .collect()
            })
            .collect();
        Ok(PomModel { controls, effectors, connectivity, signed_columns })
    }

    pub fn controls(&self) -> &[ControlNode] {
        &self.controls
    }

    pub fn effectors(&self) -> &[EndEffector] {
        &self.effectors
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn num_effectors(&self) -> usize {
        self.effectors.len()
    }

    /// `c_ij` for control `i`, effector `j`.
    pub fn coupling(&self, control: usize, effector: usize) -> i8 {
        self.connectivity[effector][control]
    }

    /// Require every control and effector node to exist in `lattice`.
    pub fn validate_against(&self, lattice: &Lattice) -> Result<(), PomError> {
        for c in &self.controls {
            if !lattice.contains_node(c.key()) {
                return Err(PomError::UnknownNode(c.key()));
            }
        }
        for e in &self.effectors {
            if !lattice.contains_node(e.key()) {
                return Err(PomError::UnknownNode(e.key()));
            }
        }
        Ok(())
    }

    /// Effector displacements for control displacements `q` (mm).
    pub fn forward(&self, q: &[f64]) -> Result<Vec<Vector3<f64>>, PomError> {
        if q.len() != self.controls.len() {
            return Err(PomError::DimensionMismatch {
                expected: self.controls.len(),
                got: q.len(),
            });
        }
        Ok(self
            .signed_columns
            .iter()
            .map(|cols| {
                cols.iter()
                    .zip(q)
                    .fold(Vector3::zeros(), |acc, (col, qi)| acc + col * *qi)
            })
            .collect())
    }

    /// Least-squares inverse: find `q` reproducing every specified component
    /// of `desired` (`None` components are unconstrained).
    ///
    /// Underdetermined systems take the minimum-norm solution. A control
    /// whose column over the specified components vanishes makes the problem
    /// rank deficient and is reported by index; a specification the linear
    /// map cannot meet within [`IK_RESIDUAL_TOL_MM`] is an inconsistency
    /// error carrying the residual.
    pub fn inverse(&self, desired: &[[Option<f64>; 3]]) -> Result<IkSolution, PomError> {
        if desired.len() != self.effectors.len() {
            return Err(PomError::EffectorMismatch {
                expected: self.effectors.len(),
                got: desired.len(),
            });
        }
        let m = self.controls.len();
        let mut matrix_rows: Vec<Vec<f64>> = Vec::new();
        let mut targets: Vec<f64> = Vec::new();
        for (j, spec) in desired.iter().enumerate() {
            for axis in 0..3 {
                if let Some(value) = spec[axis] {
                    matrix_rows.push(
                        (0..m).map(|i| self.signed_columns[j][i][axis]).collect(),
                    );
                    targets.push(value);
                }
            }
        }
        if matrix_rows.is_empty() {
            return Err(PomError::EmptyMask);
        }
        let nrows = matrix_rows.len();
        let a = DMatrix::from_fn(nrows, m, |r, c| matrix_rows[r][c]);
        let b = DVector::from_vec(targets);

        // A control with an all-zero column cannot be determined.
        for i in 0..m {
            if (0..nrows).all(|r| a[(r, i)] == 0.0) {
                return Err(PomError::RankDeficient {
                    control: i,
                    key: self.controls[i].key(),
                });
            }
        }

        let svd = a.clone().svd(true, true);
        let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > RANK_TOL * max_sv)
            .count();
        if rank < m {
            // Name the control that dominates a null direction.
            let v_t = svd.v_t.as_ref().expect("svd computed with V");
            let null_row = v_t.row(v_t.nrows() - 1);
            let control = (0..m)
                .max_by(|&p, &q| {
                    null_row[p]
                        .abs()
                        .partial_cmp(&null_row[q].abs())
                        .expect("finite singular vectors")
                })
                .unwrap_or(0);
            return Err(PomError::RankDeficient {
                control,
                key: self.controls[control].key(),
            });
        }
        let q = svd
            .solve(&b, RANK_TOL * max_sv)
            .expect("svd solve on computed factors");
        let residual = (&a * &q - &b).norm();
        if residual > IK_RESIDUAL_TOL_MM {
            return Err(PomError::Inconsistent { residual_mm: residual });
        }
        Ok(IkSolution { q: q.iter().copied().collect(), residual_mm: residual })
    }
}

/// Time-indexed control displacements `q(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuationSequence {
    pub times_s: Vec<f64>,
    /// One row of length M per time sample, mm.
    pub q: Vec<Vec<f64>>,
}

impl ActuationSequence {
    pub fn new(times_s: Vec<f64>, q: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(times_s.len(), q.len());
        debug_assert!(times_s.windows(2).all(|w| w[0] < w[1]));
        ActuationSequence { times_s, q }
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    pub fn num_controls(&self) -> usize {
        self.q.first().map_or(0, Vec::len)
    }

    /// Samples reordered as `q'[k] = q[(len - k) mod len]`, the sequence a
    /// time-reversed periodic waveform compiles to.
    pub fn time_reversed(&self) -> ActuationSequence {
        let n = self.q.len();
        let q = (0..n).map(|k| self.q[(n - k) % n].clone()).collect();
        ActuationSequence { times_s: self.times_s.clone(), q }
    }
}

/// On-disk model description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PomModelSpec {
    pub controls: Vec<ControlNodeSpec>,
    pub effectors: Vec<EndEffectorSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlNodeSpec {
    pub voxel: [i64; 3],
    pub node: usize,
    pub plane_normal: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndEffectorSpec {
    pub voxel: [i64; 3],
    pub node: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl PomModelSpec {
    pub fn build(&self) -> Result<PomModel, PomError> {
        let controls = self
            .controls
            .iter()
            .map(|c| {
                let node = NodeRef::new(c.voxel, c.node)
                    .map_err(|_| PomError::BadPlaneNormal(c.plane_normal))?;
                ControlNode::new(node, c.plane_normal)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let effectors = self
            .effectors
            .iter()
            .map(|e| NodeRef::new(e.voxel, e.node).map(EndEffector::new))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| PomError::BadPlaneNormal(3))?;
        PomModel::new(controls, effectors)
    }

    /// Column labels for the effectors, defaulting to `e1..eJ`.
    pub fn effector_labels(&self) -> Vec<String> {
        self.effectors
            .iter()
            .enumerate()
            .map(|(j, e)| e.label.clone().unwrap_or_else(|| format!("e{}", j + 1)))
            .collect()
    }
}
