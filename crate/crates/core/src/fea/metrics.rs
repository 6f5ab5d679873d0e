//! Pattern and dissipation metrics comparing a displacement field to the
//! reduced kinematic model.

use nalgebra::Vector3;

use super::{DisplacementField, FeaError};
use crate::lattice::{Lattice, NodeKey, VoxelGrid};
use crate::pom::{actuation_column, connectivity, ControlNode, EndEffector};

/// A lattice plane: normal axis and half-unit coordinate along it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaneSelector {
    pub normal: usize,
    pub coord: i64,
}

impl PlaneSelector {
    pub fn contains(&self, key: NodeKey) -> bool {
        key.0[self.normal] == self.coord
    }

    pub fn of_control(control: &ControlNode) -> Self {
        PlaneSelector { normal: control.plane_normal, coord: control.plane_coord() }
    }
}

/// Magnitudes below this fraction of the plane maximum count as zero signs.
const SIGN_ZERO_FRACTION: f64 = 1e-12;

/// In-plane node ids with their translations.
pub fn plane_translations<'a>(
    field: &'a DisplacementField,
    lattice: &'a Lattice,
    plane: PlaneSelector,
) -> impl Iterator<Item = (usize, NodeKey, Vector3<f64>)> + 'a {
    lattice
        .nodes()
        .iter()
        .enumerate()
        .filter(move |(_, key)| plane.contains(**key))
        .map(move |(id, key)| (id, *key, field.translations_mm[id]))
}

/// Sign of each in-plane node's displacement along `component`, with tiny
/// magnitudes snapped to zero.
pub fn pattern_signs(
    field: &DisplacementField,
    lattice: &Lattice,
    plane: PlaneSelector,
    component: usize,
) -> Result<Vec<(NodeKey, i8)>, FeaError> {
    let values: Vec<(NodeKey, f64)> =
        plane_translations(field, lattice, plane)
            .map(|(_, key, u)| (key, u[component]))
            .collect();
    if values.is_empty() {
        return Err(FeaError::EmptyPlane);
    }
    let max = values.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    let threshold = SIGN_ZERO_FRACTION * max;
    Ok(values
        .into_iter()
        .map(|(key, v)| {
            let sign = if v.abs() <= threshold {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            };
            (key, sign)
        })
        .collect())
}

/// Fraction of control-node displacement not realized as in-plane nodal
/// translation: `1 - mean |u_node| / |u_control|` over the plane, clamped
/// to [0, 1].
pub fn dissipation(
    field: &DisplacementField,
    lattice: &Lattice,
    plane: PlaneSelector,
    control_key: NodeKey,
) -> Result<f64, FeaError> {
    let control_id = lattice
        .node_id(control_key)
        .ok_or(FeaError::UnknownNode(control_key))?;
    let control_mag = field.translations_mm[control_id].norm();
    if control_mag == 0.0 {
        return Err(FeaError::ZeroControlDisplacement);
    }
    let mut count = 0usize;
    let mut total = 0.0;
    for (_, _, u) in plane_translations(field, lattice, plane) {
        total += u.norm();
        count += 1;
    }
    if count == 0 {
        return Err(FeaError::EmptyPlane);
    }
    let mean = total / count as f64;
    Ok((1.0 - mean / control_mag).clamp(0.0, 1.0))
}

/// Max translation outside the plane over max translation inside it.
pub fn out_of_plane_ratio(
    field: &DisplacementField,
    lattice: &Lattice,
    plane: PlaneSelector,
) -> Result<f64, FeaError> {
    let mut max_in = 0.0_f64;
    let mut max_out = 0.0_f64;
    for (id, key) in lattice.nodes().iter().enumerate() {
        let mag = field.translations_mm[id].norm();
        if plane.contains(*key) {
            max_in = max_in.max(mag);
        } else {
            max_out = max_out.max(mag);
        }
    }
    if max_in == 0.0 {
        return Err(FeaError::ZeroControlDisplacement);
    }
    Ok(max_out / max_in)
}

/// Interpret a prescribed-displacement actuator node as a POM control: a
/// node of type `t` pushed along axis `m != t` activates the plane whose
/// normal is the remaining axis.
pub fn pom_control_for_actuator(
    grid: &VoxelGrid,
    node: NodeKey,
    motion_axis: usize,
) -> Result<ControlNode, FeaError> {
    let t = node.node_type();
    if motion_axis == t || motion_axis > 2 {
        return Err(FeaError::NotPomActuator);
    }
    let d = 3 - t - motion_axis;
    let hosts = grid.hosts(node);
    let host = hosts.first().ok_or(FeaError::UnknownNode(node))?;
    ControlNode::new(*host, d).map_err(|_| FeaError::NotPomActuator)
}

/// Agreement between the field's sign pattern and the parity prediction.
///
/// `q_mm` is the control displacement (its sign convention follows the
/// control's host labeling). Only nodes where the model predicts a nonzero
/// component count; the returned fraction is matches / active nodes.
pub fn sign_agreement(
    field: &DisplacementField,
    lattice: &Lattice,
    control: &ControlNode,
    q_mm: f64,
    component: usize,
) -> Result<f64, FeaError> {
    let plane = PlaneSelector::of_control(control);
    let signs = pattern_signs(field, lattice, plane, component)?;
    let mut active = 0usize;
    let mut matches = 0usize;
    for (key, fea_sign) in signs {
        let hosts = lattice.grid().hosts(key);
        let host = hosts.first().ok_or(FeaError::UnknownNode(key))?;
        let effector = EndEffector::new(*host);
        let coupling = connectivity(control, &effector) as f64;
        let predicted =
            actuation_column(control.plane_normal, effector.node_index())[component]
                * coupling
                * q_mm;
        if predicted == 0.0 {
            continue;
        }
        active += 1;
        let predicted_sign = if predicted > 0.0 { 1 } else { -1 };
        if predicted_sign == fea_sign {
            matches += 1;
        }
    }
    if active == 0 {
        return Err(FeaError::EmptyPlane);
    }
    Ok(matches as f64 / active as f64)
}
