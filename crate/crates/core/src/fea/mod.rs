//! Linear 3D frame finite elements for voxel lattices.
//!
//! This is the physics oracle the reduced kinematic model is checked
//! against: Euler-Bernoulli beam elements with 6 degrees of freedom per
//! node, assembled into a sparse symmetric stiffness matrix and solved as a
//! constrained equilibrium problem. Actuators prescribe relative
//! displacements between node pairs through Lagrange-multiplier rows, which
//! matches stroke-controlled hardware.

mod element;
mod metrics;
mod model;
mod scenario;
mod solve;
mod sparse;

pub use element::{element_stiffness, element_stiffness_oriented, local_stiffness};
pub use metrics::{
    dissipation, out_of_plane_ratio, pattern_signs, plane_translations, pom_control_for_actuator,
    sign_agreement, PlaneSelector,
};
pub use model::{
    Actuator, DisplacementField, FixedDof, Frame, FrameModel, LinearConstraint, Material,
};
pub use scenario::{
    central_actuator_scenario, validate_scenario, ActuatorSpec, ComponentAgreement, FixedSpec,
    LoadSpec, MaterialOverrides, ScenarioSpec, SymmetricPinSpec, ValidationReport,
};
pub use solve::{assemble, solve};
pub use sparse::SparseSym;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeaError {
    #[error("beam between coincident points (length {0} m)")]
    DegenerateBeam(f64),
    #[error("material property {0} must be strictly positive")]
    BadMaterial(&'static str),
    #[error("node index {0} out of range for {1} nodes")]
    BadNode(usize, usize),
    #[error("dof component {0} out of range 0..6")]
    BadDofComponent(usize),
    #[error("actuator endpoints must be distinct nodes")]
    ActuatorSameNode,
    #[error("constrained system is singular; free motion dominated by node {node}, dof {dof} (weight {weight:.3})")]
    Singular { node: usize, dof: usize, weight: f64 },
    #[error("constraints are mutually inconsistent: residual {residual} on a dependent constraint row")]
    InconsistentConstraints { residual: f64 },
    #[error("equilibrium residual {residual} exceeds tolerance {tol}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("system needs at least 6 constrained degrees of freedom, got {0}")]
    UnderConstrained(usize),
    #[error("control node displacement is zero; dissipation undefined")]
    ZeroControlDisplacement,
    #[error("plane contains no lattice nodes")]
    EmptyPlane,
    #[error("node key {0:?} not present in the lattice")]
    UnknownNode(crate::lattice::NodeKey),
    #[error("actuator axis is not a planes-of-motion direction for this node")]
    NotPomActuator,
}
