//! Reduced kinematics for flexible voxel robots.
//!
//! A voxel here is a regular cuboctahedron: 12 beams joined at the 6 face
//! centers of its bounding cube. Lattices of such voxels deform by rotating
//! the squares that make up each voxel, and those rotations propagate within
//! geometric planes. This crate provides:
//!
//! - [`lattice`]: integer-exact node/beam bookkeeping for voxel grids,
//! - [`pom`]: the Planes-of-Motion kinematic model (forward and inverse),
//! - [`fea`]: a linear 3D frame finite-element solver used as a physics
//!   oracle for the reduced model,
//! - [`gait`]: the quadruped robot preset and gait compiler,
//! - [`mocap`]: body-frame correction and comparison for 2D motion-capture
//!   marker trajectories.

pub mod fea;
pub mod gait;
pub mod io;
pub mod lattice;
pub mod mocap;
pub mod pom;
pub mod svg;
#[doc(hidden)]
pub mod testkit;

pub use lattice::{Beam, Lattice, NodeKey, NodeRef, VoxelGrid};
pub use pom::{ActuationSequence, ControlNode, EndEffector, PomModel};
