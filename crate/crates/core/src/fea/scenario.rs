//! Scenario descriptions: material overrides, supports, actuators, loads.
//!
//! A scenario file plus a lattice fully determines a solvable frame model,
//! and the stock "central actuator" scenario reproduces the published
//! single-plane actuation experiments on any grid with a y-adjacent voxel
//! pair.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::metrics::{
    dissipation, out_of_plane_ratio, pom_control_for_actuator, sign_agreement, PlaneSelector,
};
use super::model::{Actuator, Frame, FrameModel, Material};
use super::solve::solve;
use super::{DisplacementField, FeaError};
use crate::lattice::{Lattice, NodeKey};
use crate::pom::ControlNode;

/// Partial material specification; anything unset falls back to the default
/// 2 GPa / nu 0.35 / r 1 mm circular section.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_pa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_pa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_m2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iy_m4: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iz_m4: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_m4: Option<f64>,
}

impl MaterialOverrides {
    pub fn resolve(&self) -> Material {
        let mut m = Material::circular(
            self.e_pa.unwrap_or(2.0e9),
            self.poisson.unwrap_or(0.35),
            self.radius_m.unwrap_or(1.0e-3),
        );
        if let Some(v) = self.g_pa {
            m.g_pa = v;
        }
        if let Some(v) = self.area_m2 {
            m.area_m2 = v;
        }
        if let Some(v) = self.iy_m4 {
            m.iy_m4 = v;
        }
        if let Some(v) = self.iz_m4 {
            m.iz_m4 = v;
        }
        if let Some(v) = self.j_m4 {
            m.j_m4 = v;
        }
        m
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedSpec {
    pub node: [i64; 3],
    /// Dof components 0..6 (0..3 translations mm, 3..6 rotations rad).
    pub components: Vec<usize>,
    #[serde(default)]
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActuatorSpec {
    pub node_a: [i64; 3],
    pub node_b: [i64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    pub delta_mm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetricPinSpec {
    pub node_a: [i64; 3],
    pub node_b: [i64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadSpec {
    pub node: [i64; 3],
    /// Dof component 0..6 (forces N, moments N m).
    pub component: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub material: MaterialOverrides,
    #[serde(default)]
    pub fixed: Vec<FixedSpec>,
    #[serde(default)]
    pub actuators: Vec<ActuatorSpec>,
    /// Pairs pinned by `(u_a + u_b) . e = 0` on all three axes, removing
    /// rigid translation symmetrically about the pair.
    #[serde(default)]
    pub symmetric_pins: Vec<SymmetricPinSpec>,
    #[serde(default)]
    pub loads: Vec<LoadSpec>,
}

impl ScenarioSpec {
    /// Resolve node keys against the lattice and build the frame model.
    pub fn build(&self, lattice: &Lattice) -> Result<FrameModel, FeaError> {
        let id = |key: [i64; 3]| -> Result<usize, FeaError> {
            let key = NodeKey(key);
            lattice.node_id(key).ok_or(FeaError::UnknownNode(key))
        };
        let mut model = FrameModel::new(Frame::from_lattice(lattice), self.material.resolve());
        for f in &self.fixed {
            let node = id(f.node)?;
            for &component in &f.components {
                model.fix_dof(node, component, f.value);
            }
        }
        for a in &self.actuators {
            model.add_actuator(Actuator {
                node_a: id(a.node_a)?,
                node_b: id(a.node_b)?,
                axis: a.axis.map(|v| Vector3::new(v[0], v[1], v[2])),
                delta_mm: a.delta_mm,
            })?;
        }
        for p in &self.symmetric_pins {
            let na = id(p.node_a)?;
            let nb = id(p.node_b)?;
            for axis in 0..3 {
                let mut e = Vector3::zeros();
                e[axis] = 1.0;
                model.pin_symmetric(na, nb, e);
            }
        }
        for l in &self.loads {
            model.add_load(id(l.node)?, l.component, l.value);
        }
        Ok(model)
    }
}

/// The stock single-actuator scenario: a prescribed relative displacement
/// along +y between the +x face nodes of the most central y-adjacent voxel
/// pair, with symmetric pinning of the pair. Expansion by `delta_mm` moves
/// each attached node by `delta_mm / 2`.
pub fn central_actuator_scenario(
    lattice: &Lattice,
    delta_mm: f64,
) -> Result<(ScenarioSpec, ControlNode), FeaError> {
    let grid = lattice.grid();
    let voxels: Vec<[i64; 3]> = grid.voxels().copied().collect();
    let mut lo = voxels[0];
    let mut hi = voxels[0];
    for v in &voxels {
        for a in 0..3 {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
    }
    // Most central voxel pair adjacent along +y; ties resolved by order.
    let mut best: Option<([i64; 3], f64)> = None;
    for v in &voxels {
        let up = [v[0], v[1] + 1, v[2]];
        if !grid.contains(up) {
            continue;
        }
        let mut dist = 0.0;
        for a in 0..3 {
            let center = (lo[a] + hi[a]) as f64 / 2.0;
            let mid = v[a] as f64 + if a == 1 { 0.5 } else { 0.0 };
            dist += (mid - center) * (mid - center);
        }
        match best {
            Some((_, d)) if d <= dist => {}
            _ => best = Some((*v, dist)),
        }
    }
    let (g0, _) = best.ok_or(FeaError::NotPomActuator)?;
    let node_a = NodeKey([2 * g0[0] + 2, 2 * g0[1] + 1, 2 * g0[2] + 1]);
    let node_b = NodeKey([2 * g0[0] + 2, 2 * g0[1] + 3, 2 * g0[2] + 1]);
    let spec = ScenarioSpec {
        material: MaterialOverrides::default(),
        fixed: Vec::new(),
        actuators: vec![ActuatorSpec {
            node_a: node_a.0,
            node_b: node_b.0,
            axis: None,
            delta_mm,
        }],
        symmetric_pins: vec![SymmetricPinSpec { node_a: node_a.0, node_b: node_b.0 }],
        loads: Vec::new(),
    };
    let control = pom_control_for_actuator(grid, node_a, 1)?;
    Ok((spec, control))
}

/// Everything `validate` reports about one scenario run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub nodes: usize,
    pub beams: usize,
    pub dofs: usize,
    pub residual: f64,
    pub control_node: [i64; 3],
    pub plane_normal: usize,
    pub plane_coord: i64,
    /// Control displacement in the model's sign convention, mm.
    pub control_q_mm: f64,
    /// Sign-agreement fraction per in-plane displacement component.
    pub sign_agreement: Vec<ComponentAgreement>,
    pub out_of_plane_ratio: f64,
    pub dissipation: f64,
    /// Published upper bound for the paper's own material, for comparison.
    pub paper_dissipation_reference: f64,
    pub max_in_plane_translation_mm: f64,
    pub strain_energy_j: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentAgreement {
    pub component: usize,
    pub fraction: f64,
}

/// Solve a single-actuator scenario and compare the field against the
/// parity prediction.
pub fn validate_scenario(
    lattice: &Lattice,
    spec: &ScenarioSpec,
    control: &ControlNode,
) -> Result<(ValidationReport, DisplacementField), FeaError> {
    let model = spec.build(lattice)?;
    let field = solve(&model)?;
    let plane = PlaneSelector::of_control(control);
    let control_id = lattice
        .node_id(control.key())
        .ok_or(FeaError::UnknownNode(control.key()))?;
    let q_mm = field.translations_mm[control_id].dot(&control.motion_direction());

    let mut agreement = Vec::new();
    for component in 0..3 {
        if component == control.plane_normal {
            continue;
        }
        agreement.push(ComponentAgreement {
            component,
            fraction: sign_agreement(&field, lattice, control, q_mm, component)?,
        });
    }
    let max_in_plane = lattice
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, key)| plane.contains(**key))
        .map(|(id, _)| field.translations_mm[id].norm())
        .fold(0.0, f64::max);
    let report = ValidationReport {
        nodes: lattice.node_count(),
        beams: lattice.beam_count(),
        dofs: 6 * lattice.node_count(),
        residual: field.residual,
        control_node: control.key().0,
        plane_normal: control.plane_normal,
        plane_coord: control.plane_coord(),
        control_q_mm: q_mm,
        sign_agreement: agreement,
        out_of_plane_ratio: out_of_plane_ratio(&field, lattice, plane)?,
        dissipation: dissipation(&field, lattice, plane, control.key())?,
        paper_dissipation_reference: 0.049,
        max_in_plane_translation_mm: max_in_plane,
        strain_energy_j: field.strain_energy_j,
    };
    Ok((report, field))
}
