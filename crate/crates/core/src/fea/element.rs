//! Euler-Bernoulli 3D frame element.

use nalgebra::{Matrix3, SMatrix, Vector3};

use super::{FeaError, Material};

pub type ElementMatrix = SMatrix<f64, 12, 12>;

/// Local-frame stiffness for a beam of length `length` (m), with local dof
/// order `[u v w rx ry rz]` per node. Axial and torsional terms couple `u`
/// and `rx`; bending in the local x-y plane couples `v`/`rz` through `iz`,
/// bending in x-z couples `w`/`ry` through `iy`.
pub fn local_stiffness(material: &Material, length: f64) -> ElementMatrix {
    let l = length;
    let ea = material.e_pa * material.area_m2;
    let gj = material.g_pa * material.j_m4;
    let eiy = material.e_pa * material.iy_m4;
    let eiz = material.e_pa * material.iz_m4;

    let mut k = ElementMatrix::zeros();
    let mut set = |i: usize, j: usize, v: f64| {
        k[(i, j)] = v;
        k[(j, i)] = v;
    };

    // Axial.
    set(0, 0, ea / l);
    set(6, 6, ea / l);
    set(0, 6, -ea / l);

    // Torsion.
    set(3, 3, gj / l);
    set(9, 9, gj / l);
    set(3, 9, -gj / l);

    // Bending in x-y (v, rz), stiffness E*Iz.
    let a = 12.0 * eiz / (l * l * l);
    let b = 6.0 * eiz / (l * l);
    let c = 4.0 * eiz / l;
    let d = 2.0 * eiz / l;
    set(1, 1, a);
    set(1, 5, b);
    set(1, 7, -a);
    set(1, 11, b);
    set(5, 5, c);
    set(5, 7, -b);
    set(5, 11, d);
    set(7, 7, a);
    set(7, 11, -b);
    set(11, 11, c);

    // Bending in x-z (w, ry), stiffness E*Iy; rotation sign conventions flip
    // the off-diagonal couplings relative to the x-y plane.
    let a = 12.0 * eiy / (l * l * l);
    let b = 6.0 * eiy / (l * l);
    let c = 4.0 * eiy / l;
    let d = 2.0 * eiy / l;
    set(2, 2, a);
    set(2, 4, -b);
    set(2, 8, -a);
    set(2, 10, -b);
    set(4, 4, c);
    set(4, 8, b);
    set(4, 10, d);
    set(8, 8, a);
    set(8, 10, b);
    set(10, 10, c);

    k
}

/// Orthonormal local frame for a beam from `pa` to `pb`. The local x axis
/// points along the beam; `y_hint`, when given, fixes the roll orientation
/// (its component perpendicular to the axis becomes local y).
fn local_frame(
    pa: Vector3<f64>,
    pb: Vector3<f64>,
    y_hint: Option<Vector3<f64>>,
) -> Result<(Matrix3<f64>, f64), FeaError> {
    let axis = pb - pa;
    let length = axis.norm();
    if length <= 0.0 || !length.is_finite() {
        return Err(FeaError::DegenerateBeam(length));
    }
    let x = axis / length;
    let y = match y_hint {
        Some(hint) => {
            let perp = hint - x * hint.dot(&x);
            let n = perp.norm();
            if n < 1e-12 {
                return Err(FeaError::DegenerateBeam(length));
            }
            perp / n
        }
        None => {
            let reference = if x[2].abs() > 0.9 {
                Vector3::new(0.0, 1.0, 0.0)
            } else {
                Vector3::new(0.0, 0.0, 1.0)
            };
            let perp = reference.cross(&x);
            perp / perp.norm()
        }
    };
    let z = x.cross(&y);
    // Rows of R are the local axes in global coordinates.
    let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    Ok((r, length))
}

fn conjugate_to_global(k_local: ElementMatrix, r: Matrix3<f64>) -> ElementMatrix {
    let mut t = ElementMatrix::zeros();
    for block in 0..4 {
        t.fixed_view_mut::<3, 3>(3 * block, 3 * block).copy_from(&r);
    }
    let k = t.transpose() * k_local * t;
    // Symmetrize away matmul rounding so assembly stays exactly symmetric.
    0.5 * (k + k.transpose())
}

/// Global-frame element stiffness with an automatically chosen roll
/// orientation. For axisymmetric sections (`iy == iz`) the choice does not
/// affect the result.
pub fn element_stiffness(
    pa: Vector3<f64>,
    pb: Vector3<f64>,
    material: &Material,
) -> Result<ElementMatrix, FeaError> {
    let (r, length) = local_frame(pa, pb, None)?;
    Ok(conjugate_to_global(local_stiffness(material, length), r))
}

/// Global-frame element stiffness with an explicit local-y hint, for cases
/// where the roll orientation matters (`iy != iz`).
pub fn element_stiffness_oriented(
    pa: Vector3<f64>,
    pb: Vector3<f64>,
    material: &Material,
    y_hint: Vector3<f64>,
) -> Result<ElementMatrix, FeaError> {
    let (r, length) = local_frame(pa, pb, Some(y_hint))?;
    Ok(conjugate_to_global(local_stiffness(material, length), r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn material() -> Material {
        Material::default()
    }

    #[test]
    fn axial_entry_is_ea_over_l() {
        let m = material();
        let l = 0.3;
        let k = local_stiffness(&m, l);
        let ea_l = m.e_pa * m.area_m2 / l;
        assert!((k[(0, 0)] - ea_l).abs() < 1e-9 * ea_l);
        assert!((k[(0, 6)] + ea_l).abs() < 1e-9 * ea_l);
    }

    #[test]
    fn stiffness_is_symmetric() {
        let k = element_stiffness(
            Vector3::new(0.1, -0.2, 0.05),
            Vector3::new(0.4, 0.1, -0.3),
            &material(),
        )
        .unwrap();
        assert_eq!(k, k.transpose());
    }

    #[test]
    fn six_rigid_body_modes() {
        let pa = Vector3::new(0.02, 0.01, -0.03);
        let pb = Vector3::new(0.08, 0.06, 0.04);
        let k = element_stiffness(pa, pb, &material()).unwrap();
        let eig = k.symmetric_eigenvalues();
        let max = eig.iter().cloned().fold(0.0_f64, |a, b| a.max(b.abs()));
        let zeros = eig.iter().filter(|v| v.abs() <= 1e-8 * max).count();
        assert_eq!(zeros, 6, "eigenvalues: {eig:?}");
    }

    #[test]
    fn rigid_motions_produce_no_force() {
        let pa = Vector3::new(0.0, 0.0, 0.0);
        let pb = Vector3::new(0.05, 0.02, 0.07);
        let k = element_stiffness(pa, pb, &material()).unwrap();
        let max = k.amax();
        // Rigid translation.
        let mut u = SMatrix::<f64, 12, 1>::zeros();
        u[0] = 1.0;
        u[6] = 1.0;
        assert!((k * u).amax() < 1e-10 * max);
        // Rigid rotation about z through the origin: u = w x p, rx..rz = w.
        let w = Vector3::new(0.0, 0.0, 1.0);
        let mut u = SMatrix::<f64, 12, 1>::zeros();
        let ua = w.cross(&pa);
        let ub = w.cross(&pb);
        for i in 0..3 {
            u[i] = ua[i];
            u[3 + i] = w[i];
            u[6 + i] = ub[i];
            u[9 + i] = w[i];
        }
        assert!((k * u).amax() < 1e-10 * max);
    }

    #[test]
    fn rotation_conjugates_stiffness() {
        let m = material();
        let pa = Vector3::new(0.01, 0.02, 0.03);
        let pb = Vector3::new(0.07, -0.02, 0.05);
        let y0 = Vector3::new(0.0, 0.0, 1.0);
        let k0 = element_stiffness_oriented(pa, pb, &m, y0).unwrap();
        let rot = Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let r = *rot.matrix();
        let k1 = element_stiffness_oriented(r * pa, r * pb, &m, r * y0).unwrap();
        let mut t = ElementMatrix::zeros();
        for block in 0..4 {
            t.fixed_view_mut::<3, 3>(3 * block, 3 * block).copy_from(&r);
        }
        let expect = t * k0 * t.transpose();
        let scale = k0.amax();
        assert!((k1 - expect).amax() <= 1e-10 * scale);
    }

    #[test]
    fn degenerate_beam_rejected() {
        let p = Vector3::new(0.1, 0.1, 0.1);
        assert!(matches!(
            element_stiffness(p, p, &material()),
            Err(FeaError::DegenerateBeam(_))
        ));
    }
}
