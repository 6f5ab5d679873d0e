//! Frame geometry, material, and the constrained model description.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::FeaError;
use crate::lattice::Lattice;

pub(crate) const MM_PER_M: f64 = 1000.0;

/// Linear-elastic beam section properties (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Young's modulus, Pa.
    pub e_pa: f64,
    /// Shear modulus, Pa.
    pub g_pa: f64,
    /// Cross-section area, m^2.
    pub area_m2: f64,
    /// Second moment about local y, m^4.
    pub iy_m4: f64,
    /// Second moment about local z, m^4.
    pub iz_m4: f64,
    /// Torsion constant, m^4.
    pub j_m4: f64,
}

impl Material {
    /// Isotropic material with a solid circular section.
    pub fn circular(e_pa: f64, poisson: f64, radius_m: f64) -> Material {
        let g_pa = e_pa / (2.0 * (1.0 + poisson));
        let i = std::f64::consts::PI * radius_m.powi(4) / 4.0;
        Material {
            e_pa,
            g_pa,
            area_m2: std::f64::consts::PI * radius_m * radius_m,
            iy_m4: i,
            iz_m4: i,
            j_m4: 2.0 * i,
        }
    }

    pub fn validate(&self) -> Result<(), FeaError> {
        let checks: [(&'static str, f64); 6] = [
            ("e_pa", self.e_pa),
            ("g_pa", self.g_pa),
            ("area_m2", self.area_m2),
            ("iy_m4", self.iy_m4),
            ("iz_m4", self.iz_m4),
            ("j_m4", self.j_m4),
        ];
        for (name, value) in checks {
            if !(value > 0.0) {
                return Err(FeaError::BadMaterial(name));
            }
        }
        Ok(())
    }
}

impl Default for Material {
    /// Placeholder defaults: E = 2 GPa, nu = 0.35, solid circular section of
    /// radius 1 mm. Override per scenario when real section data exists.
    fn default() -> Self {
        Material::circular(2.0e9, 0.35, 1.0e-3)
    }
}

/// Node coordinates (m) and beam connectivity.
#[derive(Debug, Clone)]
pub struct Frame {
    pub nodes: Vec<Vector3<f64>>,
    pub elements: Vec<[usize; 2]>,
}

impl Frame {
    pub fn new(nodes: Vec<Vector3<f64>>, elements: Vec<[usize; 2]>) -> Self {
        Frame { nodes, elements }
    }

    /// Positions converted from lattice mm to meters; element list shared
    /// with the lattice beams.
    pub fn from_lattice(lattice: &Lattice) -> Self {
        let nodes = (0..lattice.node_count())
            .map(|i| {
                let p = lattice.position(i);
                Vector3::new(p[0], p[1], p[2]) / MM_PER_M
            })
            .collect();
        Frame { nodes, elements: lattice.beam_indices().to_vec() }
    }

    /// Straight chain of `segments` equal elements from `start` to `end`.
    pub fn chain(start: Vector3<f64>, end: Vector3<f64>, segments: usize) -> Self {
        let nodes: Vec<Vector3<f64>> = (0..=segments)
            .map(|i| start + (end - start) * (i as f64 / segments as f64))
            .collect();
        let elements = (0..segments).map(|i| [i, i + 1]).collect();
        Frame { nodes, elements }
    }

    pub fn num_dofs(&self) -> usize {
        6 * self.nodes.len()
    }
}

/// One prescribed degree of freedom. `component` 0..3 are translations
/// (value in mm), 3..6 rotations (value in rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedDof {
    pub node: usize,
    pub component: usize,
    pub value: f64,
}

/// A general linear constraint over degrees of freedom. Translation terms
/// are expressed in mm, rotation terms in rad; `rhs` uses the same units.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, usize, f64)>,
    pub rhs: f64,
}

/// Prescribed relative displacement between two nodes along an axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Actuator {
    pub node_a: usize,
    pub node_b: usize,
    /// Unit axis; when `None`, the rest direction from a to b.
    pub axis: Option<Vector3<f64>>,
    /// `(u_b - u_a) . axis`, mm.
    pub delta_mm: f64,
}

impl Actuator {
    pub fn resolved_axis(&self, frame: &Frame) -> Vector3<f64> {
        match self.axis {
            Some(axis) => axis / axis.norm(),
            None => {
                let d = frame.nodes[self.node_b] - frame.nodes[self.node_a];
                d / d.norm()
            }
        }
    }
}

/// The constrained equilibrium problem: frame, material, supports,
/// actuators, and nodal loads.
#[derive(Debug, Clone)]
pub struct FrameModel {
    pub frame: Frame,
    pub material: Material,
    pub fixed: Vec<FixedDof>,
    pub constraints: Vec<LinearConstraint>,
    pub actuators: Vec<Actuator>,
    /// (node, component, value): forces in N, moments in N m.
    pub loads: Vec<(usize, usize, f64)>,
}

impl FrameModel {
    pub fn new(frame: Frame, material: Material) -> Self {
        FrameModel {
            frame,
            material,
            fixed: Vec::new(),
            constraints: Vec::new(),
            actuators: Vec::new(),
            loads: Vec::new(),
        }
    }

    pub fn fix_dof(&mut self, node: usize, component: usize, value: f64) -> &mut Self {
        self.fixed.push(FixedDof { node, component, value });
        self
    }

    /// Clamp all six degrees of freedom of a node to zero.
    pub fn fix_node(&mut self, node: usize) -> &mut Self {
        for component in 0..6 {
            self.fix_dof(node, component, 0.0);
        }
        self
    }

    /// Fix the three rotational degrees of freedom of a node to zero.
    pub fn fix_rotations(&mut self, node: usize) -> &mut Self {
        for component in 3..6 {
            self.fix_dof(node, component, 0.0);
        }
        self
    }

    pub fn add_load(&mut self, node: usize, component: usize, value: f64) -> &mut Self {
        self.loads.push((node, component, value));
        self
    }

    /// Add an actuator: a relative-displacement constraint row plus fixed
    /// rotations on both attached nodes, which is how the physical actuator
    /// mounts behave.
    pub fn add_actuator(&mut self, actuator: Actuator) -> Result<&mut Self, FeaError> {
        if actuator.node_a == actuator.node_b {
            return Err(FeaError::ActuatorSameNode);
        }
        let n = self.frame.nodes.len();
        if actuator.node_a >= n || actuator.node_b >= n {
            return Err(FeaError::BadNode(actuator.node_a.max(actuator.node_b), n));
        }
        let axis = actuator.resolved_axis(&self.frame);
        let mut terms = Vec::with_capacity(6);
        for comp in 0..3 {
            if axis[comp] != 0.0 {
                terms.push((actuator.node_b, comp, axis[comp]));
                terms.push((actuator.node_a, comp, -axis[comp]));
            }
        }
        self.constraints.push(LinearConstraint { terms, rhs: actuator.delta_mm });
        self.fix_rotations(actuator.node_a);
        self.fix_rotations(actuator.node_b);
        self.actuators.push(actuator);
        Ok(self)
    }

    /// Pin the symmetric translation `(u_a + u_b) . axis = 0`, which removes
    /// a rigid translation without biasing the actuated pair.
    pub fn pin_symmetric(&mut self, node_a: usize, node_b: usize, axis: Vector3<f64>) -> &mut Self {
        let mut terms = Vec::with_capacity(6);
        for comp in 0..3 {
            if axis[comp] != 0.0 {
                terms.push((node_a, comp, axis[comp]));
                terms.push((node_b, comp, axis[comp]));
            }
        }
        self.constraints.push(LinearConstraint { terms, rhs: 0.0 });
        self
    }

    pub fn validate(&self) -> Result<(), FeaError> {
        self.material.validate()?;
        let n = self.frame.nodes.len();
        for f in &self.fixed {
            if f.node >= n {
                return Err(FeaError::BadNode(f.node, n));
            }
            if f.component >= 6 {
                return Err(FeaError::BadDofComponent(f.component));
            }
        }
        for c in &self.constraints {
            for &(node, component, _) in &c.terms {
                if node >= n {
                    return Err(FeaError::BadNode(node, n));
                }
                if component >= 6 {
                    return Err(FeaError::BadDofComponent(component));
                }
            }
        }
        for &(node, component, _) in &self.loads {
            if node >= n {
                return Err(FeaError::BadNode(node, n));
            }
            if component >= 6 {
                return Err(FeaError::BadDofComponent(component));
            }
        }
        Ok(())
    }
}

/// Solution of the constrained equilibrium problem.
#[derive(Debug, Clone)]
pub struct DisplacementField {
    /// Nodal translations, mm.
    pub translations_mm: Vec<Vector3<f64>>,
    /// Nodal rotations, rad.
    pub rotations_rad: Vec<Vector3<f64>>,
    /// Generalized reaction of each retained constraint row, satisfying
    /// `K u = f + C' r`; energy-conjugate to the row's right-hand side
    /// (joules per rhs unit).
    pub constraint_reactions: Vec<f64>,
    /// Relative equilibrium residual on the free degrees of freedom.
    pub residual: f64,
    /// Strain energy `u' K u / 2`, J.
    pub strain_energy_j: f64,
}

impl DisplacementField {
    pub fn translation(&self, node: usize) -> Vector3<f64> {
        self.translations_mm[node]
    }

    pub fn max_translation_mm(&self) -> f64 {
        self.translations_mm
            .iter()
            .map(|u| u.norm())
            .fold(0.0, f64::max)
    }
}
