//! Assembly and the constrained equilibrium solve.
//!
//! Fixed degrees of freedom are eliminated exactly; actuator and pin rows
//! become Lagrange-multiplier constraints, giving the symmetric indefinite
//! system
//!
//! ```text
//! [ K_ss  C'] [u_s]   [f_s - K_sf u_f]
//! [ C     0 ] [l  ] = [g - C_f u_f   ]
//! ```
//!
//! solved by dense LU with partial pivoting; the sizes this crate targets
//! (a few thousand degrees of freedom) do not justify a sparse
//! factorization. A cheap inverse-iteration probe guards against silently
//! accepting a singular system.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};

use super::model::{FrameModel, MM_PER_M};
use super::sparse::SparseSym;
use super::{DisplacementField, FeaError};

/// Relative equilibrium-residual tolerance.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Assemble the global stiffness (SI units) as a sparse symmetric matrix.
pub fn assemble(model: &FrameModel) -> Result<SparseSym, FeaError> {
    model.validate()?;
    let n = model.frame.num_dofs();
    let mut triplets = Vec::with_capacity(model.frame.elements.len() * 144);
    for &[a, b] in &model.frame.elements {
        let k = super::element_stiffness(
            model.frame.nodes[a],
            model.frame.nodes[b],
            &model.material,
        )?;
        let dofs: Vec<usize> = (0..6)
            .map(|c| 6 * a + c)
            .chain((0..6).map(|c| 6 * b + c))
            .collect();
        for i in 0..12 {
            for j in 0..12 {
                let v = k[(i, j)];
                if v != 0.0 {
                    triplets.push((dofs[i], dofs[j], v));
                }
            }
        }
    }
    Ok(SparseSym::from_triplets(n, triplets))
}

/// Scale factor turning a user-facing dof value into SI: translations are
/// specified in mm, rotations in rad.
fn dof_to_si(component: usize) -> f64 {
    if component < 3 {
        1.0 / MM_PER_M
    } else {
        1.0
    }
}

/// Coefficient scale so that `coeff * u_si` matches `coeff * u_mm` for
/// translation terms.
fn coeff_scale(component: usize) -> f64 {
    if component < 3 {
        MM_PER_M
    } else {
        1.0
    }
}

struct ReducedSystem {
    free: Vec<usize>,
    free_index: Vec<Option<usize>>,
    fixed_values: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

fn reduce(model: &FrameModel, n: usize) -> Result<ReducedSystem, FeaError> {
    // Fixed dofs, conflicting duplicates rejected.
    let mut fixed: BTreeMap<usize, f64> = BTreeMap::new();
    for f in &model.fixed {
        let dof = 6 * f.node + f.component;
        let value = f.value * dof_to_si(f.component);
        if let Some(prev) = fixed.insert(dof, value) {
            if (prev - value).abs() > 1e-15 {
                return Err(FeaError::InconsistentConstraints {
                    residual: (prev - value).abs(),
                });
            }
        }
    }
    let mut fixed_values = vec![0.0; n];
    let mut free_index = vec![None; n];
    let mut free = Vec::with_capacity(n - fixed.len());
    for dof in 0..n {
        if let Some(v) = fixed.get(&dof) {
            fixed_values[dof] = *v;
        } else {
            free_index[dof] = Some(free.len());
            free.push(dof);
        }
    }

    // Constraint rows restricted to free dofs; fixed terms move to the rhs.
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for c in &model.constraints {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(node, component, coeff) in &c.terms {
            *merged.entry(6 * node + component).or_insert(0.0) +=
                coeff * coeff_scale(component);
        }
        let mut row = Vec::new();
        let mut b = c.rhs;
        let mut scale = 0.0_f64;
        for (dof, coeff) in merged {
            scale = scale.max(coeff.abs());
            if let Some(fi) = free_index[dof] {
                row.push((fi, coeff));
            } else {
                b -= coeff * fixed_values[dof];
            }
        }
        if row.is_empty() {
            if b.abs() > 1e-9 * scale.max(1.0) {
                return Err(FeaError::InconsistentConstraints { residual: b.abs() });
            }
            continue;
        }
        rows.push(row);
        rhs.push(b);
    }
    Ok(ReducedSystem { free, free_index, fixed_values, rows, rhs })
}

/// Drop dependent constraint rows; a dependent row with an incompatible
/// right-hand side is an inconsistency.
fn independent_rows(
    rows: &[Vec<(usize, f64)>],
    rhs: &[f64],
    nfree: usize,
) -> Result<Vec<usize>, FeaError> {
    let m = rows.len();
    let mut dense: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![0.0; nfree];
            for &(c, x) in r {
                v[c] = x;
            }
            v
        })
        .collect();
    let mut b: Vec<f64> = rhs.to_vec();
    let mut keep = Vec::new();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (kept row, pivot col)
    for r in 0..m {
        let norm0 = dense[r].iter().map(|v| v * v).sum::<f64>().sqrt();
        for &(kr, pc) in &pivots {
            let factor = dense[r][pc] / dense[kr][pc];
            if factor != 0.0 {
                let (head, tail) = dense.split_at_mut(r);
                let pivot_row = &head[kr];
                let row = &mut tail[0];
                for c in 0..nfree {
                    row[c] -= factor * pivot_row[c];
                }
                b[r] -= factor * b[kr];
            }
        }
        let norm = dense[r].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 * norm0.max(1.0) {
            // Dependent row: must also be consistent.
            if b[r].abs() > 1e-9 * norm0.max(1.0) {
                return Err(FeaError::InconsistentConstraints { residual: b[r].abs() });
            }
            continue;
        }
        let pivot = (0..nfree)
            .max_by(|&i, &j| {
                dense[r][i]
                    .abs()
                    .partial_cmp(&dense[r][j].abs())
                    .expect("finite row")
            })
            .expect("nonempty row");
        pivots.push((r, pivot));
        keep.push(r);
    }
    Ok(keep)
}

/// Solve the constrained equilibrium problem.
pub fn solve(model: &FrameModel) -> Result<DisplacementField, FeaError> {
    let stiffness = assemble(model)?;
    let n = stiffness.dim();
    let reduced = reduce(model, n)?;
    let nfree = reduced.free.len();
    let n_fixed = n - nfree;

    let kept = independent_rows(&reduced.rows, &reduced.rhs, nfree)?;
    let rows: Vec<&Vec<(usize, f64)>> = kept.iter().map(|&r| &reduced.rows[r]).collect();
    let rhs: Vec<f64> = kept.iter().map(|&r| reduced.rhs[r]).collect();
    let nc = rows.len();

    if n_fixed + nc < 6 {
        return Err(FeaError::UnderConstrained(n_fixed + nc));
    }

    // Dense KKT system.
    let dim = nfree + nc;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    for (si, &dof) in reduced.free.iter().enumerate() {
        for (col, v) in stiffness.row(dof) {
            if let Some(sj) = reduced.free_index[col] {
                kkt[(si, sj)] = v;
            }
        }
    }
    for (r, row) in rows.iter().enumerate() {
        for &(fi, coeff) in row.iter() {
            kkt[(nfree + r, fi)] = coeff;
            kkt[(fi, nfree + r)] = coeff;
        }
    }

    let mut b = DVector::<f64>::zeros(dim);
    for &(node, component, value) in &model.loads {
        let dof = 6 * node + component;
        if let Some(fi) = reduced.free_index[dof] {
            b[fi] += value;
        }
    }
    // Move prescribed-displacement coupling to the right-hand side.
    if n_fixed > 0 {
        for (si, &dof) in reduced.free.iter().enumerate() {
            let mut coupling = 0.0;
            for (col, v) in stiffness.row(dof) {
                if reduced.free_index[col].is_none() {
                    coupling += v * reduced.fixed_values[col];
                }
            }
            b[si] -= coupling;
        }
    }
    for (r, value) in rhs.iter().enumerate() {
        b[nfree + r] = *value;
    }

    let lu = kkt.clone().lu();
    let solution = lu.solve(&b);
    let solution = match solution {
        Some(s) => s,
        None => return Err(diagnose_singular(&kkt, &reduced, nfree)),
    };

    // Inverse-iteration probe for a silently rank-deficient factorization.
    let row_scale = kkt
        .row_iter()
        .map(|r| r.amax())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let probe = DVector::from_fn(dim, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
    if let Some(grown) = lu.solve(&probe) {
        let sigma_min_est = probe.norm() / grown.norm().max(f64::MIN_POSITIVE);
        if sigma_min_est <= 1e-12 * row_scale {
            return Err(diagnose_singular(&kkt, &reduced, nfree));
        }
    }

    // Full displacement vector in SI units.
    let mut u = reduced.fixed_values.clone();
    for (si, &dof) in reduced.free.iter().enumerate() {
        u[dof] = solution[si];
    }
    // Store reactions r = -lambda, the generalized force each constraint
    // row applies to the structure: K u = f + C' r.
    let multipliers: Vec<f64> = (0..nc).map(|r| -solution[nfree + r]).collect();

    // Equilibrium residual on the free dofs: K u - C' r - f.
    let ku = stiffness.matvec(&u);
    let mut force_scale = 0.0_f64;
    let mut residual_sq = 0.0_f64;
    let mut applied = vec![0.0; n];
    for &(node, component, value) in &model.loads {
        applied[6 * node + component] += value;
    }
    let mut constraint_force = vec![0.0; n];
    for (r, row) in rows.iter().enumerate() {
        for &(fi, coeff) in row.iter() {
            constraint_force[reduced.free[fi]] += coeff * multipliers[r];
        }
    }
    for &dof in &reduced.free {
        let r = ku[dof] - constraint_force[dof] - applied[dof];
        residual_sq += r * r;
        force_scale = force_scale
            .max(ku[dof].abs())
            .max(constraint_force[dof].abs())
            .max(applied[dof].abs());
    }
    let residual = if force_scale > 0.0 {
        residual_sq.sqrt() / force_scale
    } else {
        residual_sq.sqrt()
    };
    if residual > RESIDUAL_TOL {
        return Err(FeaError::ResidualTooLarge { residual, tol: RESIDUAL_TOL });
    }

    let strain_energy_j = 0.5 * stiffness.quadratic_form(&u);
    let num_nodes = model.frame.nodes.len();
    let mut translations_mm = Vec::with_capacity(num_nodes);
    let mut rotations_rad = Vec::with_capacity(num_nodes);
    for node in 0..num_nodes {
        translations_mm.push(Vector3::new(
            u[6 * node] * MM_PER_M,
            u[6 * node + 1] * MM_PER_M,
            u[6 * node + 2] * MM_PER_M,
        ));
        rotations_rad.push(Vector3::new(
            u[6 * node + 3],
            u[6 * node + 4],
            u[6 * node + 5],
        ));
    }
    Ok(DisplacementField {
        translations_mm,
        rotations_rad,
        constraint_reactions: multipliers,
        residual,
        strain_energy_j,
    })
}

/// Name the dominant free motion of a singular system.
fn diagnose_singular(kkt: &DMatrix<f64>, reduced: &ReducedSystem, nfree: usize) -> FeaError {
    let svd = kkt.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let null = v_t.row(v_t.nrows() - 1);
    let mut best = (0usize, 0.0_f64);
    for fi in 0..nfree {
        if null[fi].abs() > best.1 {
            best = (fi, null[fi].abs());
        }
    }
    let dof = reduced.free[best.0];
    FeaError::Singular { node: dof / 6, dof: dof % 6, weight: best.1 }
}
