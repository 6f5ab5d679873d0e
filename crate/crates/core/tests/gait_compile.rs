//! Compiling the quadruped gait and checking its kinematic guarantees.

use voxelpom_core::gait::{
    compile_gait, front_foot_positions, predicted_markers, tripod_preset, GaitError,
    GaitKeyframes, Keyframe, STROKE_LIMIT_MM,
};
use voxelpom_core::pom::check_disjoint_planes;

fn preset() -> voxelpom_core::gait::RobotConfig {
    tripod_preset(76.2)
}

#[test]
fn preset_satisfies_its_invariants() {
    let config = preset();
    assert!(check_disjoint_planes(config.model.controls()).is_ok());
    assert_eq!(config.model.num_controls(), 4);
    assert_eq!(config.markers.len(), 4);
    assert_eq!(config.feet.len(), 4);
    assert_eq!(config.lattice.grid().len(), 10);

    // Each marker sits on the intersection of exactly two control planes.
    for &m in &config.markers {
        let coupled = (0..4)
            .filter(|&i| config.model.coupling(i, m) != 0)
            .count();
        assert_eq!(coupled, 2, "marker effector {m}");
        // And those two couplings move it along two independent axes.
        let mut axes = Vec::new();
        for i in 0..4 {
            if config.model.coupling(i, m) != 0 {
                let col = voxelpom_core::pom::actuation_column(
                    config.model.controls()[i].plane_normal,
                    config.model.effectors()[m].node_index(),
                );
                axes.push(col);
            }
        }
        assert!(axes[0].dot(&axes[1]).abs() < 1e-12);
    }

    // Front attachments ride exactly one plane each, vertically.
    for &e in &[4usize, 5] {
        let coupled: Vec<usize> = (0..4)
            .filter(|&i| config.model.coupling(i, e) != 0)
            .collect();
        assert_eq!(coupled.len(), 1);
        let col = voxelpom_core::pom::actuation_column(
            config.model.controls()[coupled[0]].plane_normal,
            config.model.effectors()[e].node_index(),
        );
        assert_eq!(col[0], 0.0);
        assert_eq!(col[1], 0.0);
        assert_eq!(col[2].abs(), 1.0);
    }
}

#[test]
fn default_gait_compiles_within_stroke() {
    let config = preset();
    let keyframes = GaitKeyframes::default_tripod();
    let seq = compile_gait(&config, &keyframes, 0.04, 1).unwrap();
    assert_eq!(seq.len(), 50);
    assert_eq!(seq.num_controls(), 4);
    for row in &seq.q {
        for q in row {
            assert!(q.abs() <= STROKE_LIMIT_MM);
        }
    }
    // All four actuators participate, with strokes of both signs somewhere.
    for i in 0..4 {
        let max = seq.q.iter().map(|r| r[i]).fold(f64::NEG_INFINITY, f64::max);
        let min = seq.q.iter().map(|r| r[i]).fold(f64::INFINITY, f64::min);
        assert!(max > 0.5, "actuator {i} never pushes");
        assert!(min < -0.5 || max > 0.5, "actuator {i} is idle");
    }
    // Right front steps before left front: the y=3 plane stroke peaks in
    // the first half cycle, the y=1 plane stroke in the second.
    let peak_step = |i: usize| {
        seq.q
            .iter()
            .enumerate()
            .max_by(|a, b| a.1[i].abs().partial_cmp(&b.1[i].abs()).unwrap())
            .unwrap()
            .0
    };
    assert!(peak_step(1) < 25, "front-right lift late");
    assert!(peak_step(0) >= 25, "front-left lift early");
}

#[test]
fn round_trip_reproduces_constrained_components() {
    // 80 steps per cycle puts every dyadic keyframe phase on the sample
    // grid, so predicted marker components at those steps must equal the
    // literal keyframe values.
    let config = preset();
    let keyframes = GaitKeyframes::default_tripod();
    let seq = compile_gait(&config, &keyframes, 0.025, 1).unwrap();
    assert_eq!(seq.len(), 80);
    let prediction = predicted_markers(&config, &seq).unwrap();
    let at = |phase: f64| (phase * 80.0).round() as usize;
    // back_right = marker 4: x dips to -3 at phase 0.125, back at 0.25.
    assert!((prediction.displacements_mm[at(0.125)][3][0] + 3.0).abs() < 1e-9);
    assert!(prediction.displacements_mm[at(0.25)][3][0].abs() < 1e-9);
    // back_left = marker 1: y peaks at +2 at phase 0.375, x dips at 0.625.
    assert!((prediction.displacements_mm[at(0.375)][0][1] - 2.0).abs() < 1e-9);
    assert!((prediction.displacements_mm[at(0.625)][0][0] + 3.0).abs() < 1e-9);
    // marker2 sway: y = -2 at phase 0.375.
    assert!((prediction.displacements_mm[at(0.375)][1][1] + 2.0).abs() < 1e-9);
}

#[test]
fn reversed_keyframes_compile_to_reversed_sequence_exactly() {
    let config = preset();
    let keyframes = GaitKeyframes::default_tripod();
    let forward = compile_gait(&config, &keyframes, 0.04, 1).unwrap();
    let reversed = compile_gait(&config, &keyframes.time_reversed(), 0.04, 1).unwrap();
    let expect = forward.time_reversed();
    assert_eq!(reversed.q.len(), expect.q.len());
    for (k, (got, want)) in reversed.q.iter().zip(&expect.q).enumerate() {
        for i in 0..4 {
            assert!(
                got[i] == want[i],
                "step {k} control {i}: {} vs {} (bitwise)",
                got[i],
                want[i]
            );
        }
    }
}

#[test]
fn periodic_waveforms_give_periodic_sequences() {
    let config = preset();
    let keyframes = GaitKeyframes::default_tripod();
    let two = compile_gait(&config, &keyframes, 0.04, 2).unwrap();
    assert_eq!(two.len(), 100);
    for k in 0..50 {
        assert_eq!(two.q[k], two.q[k + 50]);
    }
    let times_ok = two.times_s.windows(2).all(|w| w[1] > w[0]);
    assert!(times_ok);
}

#[test]
fn single_foot_step_moves_only_its_planes() {
    // A back-left (marker 1) step demands x and y; the only nonzero
    // strokes are the two planes through marker 1.
    let config = preset();
    let mut targets = std::collections::BTreeMap::new();
    targets.insert(
        "back_left".to_string(),
        vec![
            Keyframe { phase: 0.0, displacement_mm: [Some(0.0), Some(0.0), None] },
            Keyframe { phase: 0.25, displacement_mm: [Some(2.0), Some(1.0), None] },
            Keyframe { phase: 0.5, displacement_mm: [Some(0.0), Some(0.0), None] },
        ],
    );
    let keyframes = GaitKeyframes { cycle_s: 1.0, targets };
    let seq = compile_gait(&config, &keyframes, 0.02, 1).unwrap();
    let mut touched = [false; 4];
    for row in &seq.q {
        for i in 0..4 {
            if row[i] != 0.0 {
                touched[i] = true;
            }
        }
    }
    // Marker 1 lies on planes y=1 (control 0) and x=1 (control 2).
    assert_eq!(touched, [true, false, true, false]);
}

#[test]
fn excessive_demand_is_an_error_not_a_clip() {
    let config = preset();
    let mut targets = std::collections::BTreeMap::new();
    targets.insert(
        "back_left".to_string(),
        vec![
            Keyframe { phase: 0.0, displacement_mm: [Some(0.0), None, None] },
            Keyframe { phase: 0.5, displacement_mm: [Some(7.5), None, None] },
        ],
    );
    let keyframes = GaitKeyframes { cycle_s: 1.0, targets };
    match compile_gait(&config, &keyframes, 0.02, 1) {
        Err(GaitError::AmplitudeExceeded { value, .. }) => assert_eq!(value, 7.5),
        other => panic!("expected amplitude error, got {other:?}"),
    }
}

#[test]
fn foot_kind_masks_are_enforced() {
    let config = preset();
    let mut targets = std::collections::BTreeMap::new();
    targets.insert(
        "front_left".to_string(),
        vec![Keyframe { phase: 0.0, displacement_mm: [Some(1.0), None, None] }],
    );
    let keyframes = GaitKeyframes { cycle_s: 1.0, targets };
    assert!(matches!(
        compile_gait(&config, &keyframes, 0.02, 1),
        Err(GaitError::ComponentNotAllowed { .. })
    ));

    let mut targets = std::collections::BTreeMap::new();
    targets.insert(
        "back_right".to_string(),
        vec![Keyframe { phase: 0.0, displacement_mm: [None, None, Some(1.0)] }],
    );
    let keyframes = GaitKeyframes { cycle_s: 1.0, targets };
    assert!(matches!(
        compile_gait(&config, &keyframes, 0.02, 1),
        Err(GaitError::ComponentNotAllowed { .. })
    ));
}

#[test]
fn zero_gait_compiles_to_zero() {
    let config = preset();
    let mut targets = std::collections::BTreeMap::new();
    for name in ["back_left", "back_right"] {
        targets.insert(
            name.to_string(),
            vec![Keyframe { phase: 0.0, displacement_mm: [Some(0.0), Some(0.0), None] }],
        );
    }
    for name in ["front_left", "front_right"] {
        targets.insert(
            name.to_string(),
            vec![Keyframe { phase: 0.0, displacement_mm: [None, None, Some(0.0)] }],
        );
    }
    let keyframes = GaitKeyframes { cycle_s: 1.0, targets };
    let seq = compile_gait(&config, &keyframes, 0.02, 1).unwrap();
    for row in &seq.q {
        assert!(row.iter().all(|q| *q == 0.0));
    }
    let prediction = predicted_markers(&config, &seq).unwrap();
    for sample in &prediction.displacements_mm {
        for m in sample {
            assert_eq!(m.norm(), 0.0);
        }
    }
}

#[test]
fn front_feet_follow_attachments_rigidly() {
    let config = preset();
    let zero = vec![nalgebra::Vector3::zeros(); 6];
    let (states, pitch) = front_foot_positions(&config, &zero).unwrap();
    assert_eq!(states.len(), 2);
    assert_eq!(pitch, 0.0);
    // Rest offsets: one voxel pitch forward of the attachment nodes.
    assert_eq!(states[0].rest_mm[0], 76.2 * 2.0 + 76.2);

    let mut displaced = zero.clone();
    displaced[4][2] = 3.0;
    let (states, pitch) = front_foot_positions(&config, &displaced).unwrap();
    assert_eq!(states[0].displacement_mm[2], 3.0);
    assert_eq!(states[1].displacement_mm[2], 0.0);
    // Differential lift of 3 mm across one pitch of span; small-angle
    // approximation agrees with the exact angle to 1e-3.
    let span = 76.2;
    let exact = (-3.0_f64 / span).atan();
    assert!((pitch - exact).abs() < 1e-12);
    assert!((pitch.abs() - 3.0 / span).abs() < 1e-3);
}
