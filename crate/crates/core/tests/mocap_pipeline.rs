//! Body-frame correction: recovery, idempotence, invariances, comparison.

use nalgebra::Vector2;
use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use voxelpom_core::gait::{compile_gait, predicted_markers, tripod_preset, GaitKeyframes};
use voxelpom_core::mocap::{
    body_frame_correct, compare, load_markers, render_markers_csv, FrameTag, MarkerTrajectory,
    MocapError,
};

/// The top-down view of the walking robot: rest marker square plus the
/// gait-predicted ground-plane displacements.
fn raw_marker_positions(cycles: usize) -> MarkerTrajectory {
    let config = tripod_preset(76.2);
    let keyframes = GaitKeyframes::default_tripod();
    let seq = compile_gait(&config, &keyframes, 0.04, cycles).unwrap();
    let prediction = predicted_markers(&config, &seq).unwrap();
    let rest: Vec<Vector2<f64>> = config
        .markers
        .iter()
        .map(|&m| {
            let p = config.model.effectors()[m].key().position(76.2);
            Vector2::new(p[0], p[1])
        })
        .collect();
    let positions = prediction
        .displacements_mm
        .iter()
        .map(|sample| {
            let mut out = [Vector2::zeros(); 4];
            for m in 0..4 {
                out[m] = rest[m] + Vector2::new(sample[m][0], sample[m][1]);
            }
            out
        })
        .collect();
    MarkerTrajectory {
        times_s: prediction.times_s.clone(),
        positions_mm: positions,
        frame: FrameTag::Lab,
    }
}

fn canonical_template(cycles: usize) -> MarkerTrajectory {
    body_frame_correct(&raw_marker_positions(cycles)).unwrap()
}

fn apply_rigid_motion(
    traj: &MarkerTrajectory,
    mut angle: impl FnMut(f64) -> f64,
    mut shift: impl FnMut(f64) -> Vector2<f64>,
) -> MarkerTrajectory {
    let positions = traj
        .times_s
        .iter()
        .zip(&traj.positions_mm)
        .map(|(t, sample)| {
            let a = angle(*t);
            let (s, c) = a.sin_cos();
            let d = shift(*t);
            let mut out = [Vector2::zeros(); 4];
            for m in 0..4 {
                let v = sample[m];
                out[m] = Vector2::new(c * v[0] - s * v[1], s * v[0] + c * v[1]) + d;
            }
            out
        })
        .collect();
    MarkerTrajectory {
        times_s: traj.times_s.clone(),
        positions_mm: positions,
        frame: FrameTag::Lab,
    }
}

fn rms(a: &MarkerTrajectory, b: &MarkerTrajectory) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for (x, y) in a.positions_mm.iter().zip(&b.positions_mm) {
        for m in 0..4 {
            acc += (x[m] - y[m]).norm_squared();
            n += 1;
        }
    }
    (acc / n as f64).sqrt()
}

#[test]
fn rigid_motion_is_removed_exactly() {
    let template = canonical_template(2);
    // Time-varying rotation with a deliberately nonzero mean, plus a large
    // wandering translation.
    let moved = apply_rigid_motion(
        &template,
        |t| 0.4 * (1.3 * t).sin() + 0.25,
        |t| Vector2::new(40.0 * (0.7 * t).cos(), -25.0 * (0.9 * t).sin() + 60.0 * t),
    );
    let recovered = body_frame_correct(&moved).unwrap();
    let err = rms(&recovered, &template);
    assert!(err <= 1e-6, "recovery rms {err}");
}

#[test]
fn correction_is_idempotent() {
    let template = canonical_template(1);
    let twice = body_frame_correct(&template).unwrap();
    let err = rms(&twice, &template);
    assert!(err <= 1e-9, "idempotence rms {err}");
}

#[test]
fn static_square_stays_constant() {
    let square = [
        Vector2::new(-38.1, -38.1),
        Vector2::new(38.1, -38.1),
        Vector2::new(38.1, 38.1),
        Vector2::new(-38.1, 38.1),
    ];
    let traj = MarkerTrajectory {
        times_s: (0..20).map(|k| k as f64 * 0.1).collect(),
        positions_mm: vec![square; 20],
        frame: FrameTag::Lab,
    };
    let out = body_frame_correct(&traj).unwrap();
    for sample in &out.positions_mm {
        for m in 0..4 {
            assert!((sample[m] - out.positions_mm[0][m]).norm() < 1e-12);
        }
    }
}

#[test]
fn scaling_deviations_scales_output() {
    // A symmetric breathing square keeps the centroid at zero and every
    // bearing fixed, so the pipeline is exactly 1-homogeneous in the
    // deviations: the rescale really is one global factor.
    let make = |alpha: f64| {
        let times: Vec<f64> = (0..40).map(|k| k as f64 * 0.05).collect();
        let positions = times
            .iter()
            .map(|t| {
                let mut out = [Vector2::zeros(); 4];
                for m in 0..4 {
                    let bearing = voxelpom_core::mocap::MARKER1_BEARING_RAD
                        + m as f64 * std::f64::consts::FRAC_PI_2;
                    let r = 50.0 + alpha * 3.0 * (2.0 * t).sin();
                    out[m] = Vector2::new(r * bearing.cos(), r * bearing.sin());
                }
                out
            })
            .collect();
        MarkerTrajectory { times_s: times, positions_mm: positions, frame: FrameTag::Lab }
    };
    let unit = body_frame_correct(&make(1.0)).unwrap();
    let double = body_frame_correct(&make(2.0)).unwrap();
    for m in 0..4 {
        let mean_unit: Vector2<f64> =
            unit.positions_mm.iter().map(|s| s[m]).sum::<Vector2<f64>>() / unit.len() as f64;
        let mean_double: Vector2<f64> =
            double.positions_mm.iter().map(|s| s[m]).sum::<Vector2<f64>>() / double.len() as f64;
        for (u, d) in unit.positions_mm.iter().zip(&double.positions_mm) {
            let du = u[m] - mean_unit;
            let dd = d[m] - mean_double;
            assert!((dd - 2.0 * du).norm() < 1e-9);
        }
    }

    // The realistic gait template scales to first order: small angular
    // nonlinearities stay under a percent of the deviation size.
    let template = raw_marker_positions(1);
    let scaled_input = MarkerTrajectory {
        times_s: template.times_s.clone(),
        positions_mm: {
            let mut means = [Vector2::<f64>::zeros(); 4];
            for s in &template.positions_mm {
                for m in 0..4 {
                    means[m] += s[m];
                }
            }
            for m in means.iter_mut() {
                *m /= template.len() as f64;
            }
            template
                .positions_mm
                .iter()
                .map(|s| {
                    let mut out = [Vector2::zeros(); 4];
                    for m in 0..4 {
                        out[m] = means[m] + 2.0 * (s[m] - means[m]);
                    }
                    out
                })
                .collect()
        },
        frame: FrameTag::Lab,
    };
    let base = body_frame_correct(&template).unwrap();
    let scaled = body_frame_correct(&scaled_input).unwrap();
    let mut worst: f64 = 0.0;
    for m in 0..4 {
        let mean_b: Vector2<f64> =
            base.positions_mm.iter().map(|s| s[m]).sum::<Vector2<f64>>() / base.len() as f64;
        let mean_s: Vector2<f64> =
            scaled.positions_mm.iter().map(|s| s[m]).sum::<Vector2<f64>>() / scaled.len() as f64;
        for (b, s) in base.positions_mm.iter().zip(&scaled.positions_mm) {
            let db = b[m] - mean_b;
            let ds = s[m] - mean_s;
            worst = worst.max((ds - 2.0 * db).norm() / (db.norm().max(0.1)));
        }
    }
    assert!(worst < 0.02, "first-order scaling violated: {worst}");
}

#[test]
fn csv_round_trip_and_row_dropping() {
    let template = canonical_template(1);
    let text = render_markers_csv(&template);
    let (parsed, dropped) = load_markers(&text).unwrap();
    assert_eq!(dropped, 0);
    assert_eq!(parsed.len(), template.len());
    assert!(rms(&parsed, &template) < 1e-7);

    let broken = "time_s,m1_x,m1_y,m2_x,m2_y,m3_x,m3_y,m4_x,m4_y\n\
                  0.0,1,2,3,4,5,6,7,8\n\
                  0.1,1,2,3,nan,5,6,7,8\n\
                  0.2,1,2,3,4,5,6,7,8\n";
    let (parsed, dropped) = load_markers(broken).unwrap();
    assert_eq!(parsed.len(), 2);
    assert_eq!(dropped, 1);

    let shuffled = "time_s,m1_x,m1_y,m2_x,m2_y,m3_x,m3_y,m4_x,m4_y\n\
                    0.2,1,2,3,4,5,6,7,8\n\
                    0.1,1,2,3,4,5,6,7,8\n";
    assert!(matches!(
        load_markers(shuffled),
        Err(MocapError::Csv(_))
    ));

    assert!(load_markers("time_s,m1_x\n0,1\n").is_err());
}

#[test]
fn coincident_markers_are_rejected() {
    let traj = MarkerTrajectory {
        times_s: vec![0.0, 0.1],
        positions_mm: vec![[Vector2::new(5.0, 5.0); 4]; 2],
        frame: FrameTag::Lab,
    };
    assert!(matches!(
        body_frame_correct(&traj),
        Err(MocapError::CoincidentMarkers { sample: 0 })
    ));
}

#[test]
fn compare_identical_and_shifted() {
    let template = canonical_template(2);
    let report = compare(&template, &template).unwrap();
    assert_eq!(report.shift_s, 0.0);
    assert!(report.overall_rms_mm < 1e-12);
    for (_, m) in &report.markers {
        assert!(m.rms_mm < 1e-12);
        if let Some(ratio) = m.area_ratio {
            assert!((ratio - 1.0).abs() < 1e-9);
        }
    }

    // Delay the measurement by 0.2 s (5 samples at dt = 0.04).
    let delayed = MarkerTrajectory {
        times_s: template.times_s.iter().map(|t| t + 0.2).collect(),
        positions_mm: template.positions_mm.clone(),
        frame: FrameTag::Body,
    };
    let report = compare(&template, &delayed).unwrap();
    assert!((report.shift_s - 0.2).abs() < 1e-12);
    assert!(report.overall_rms_mm < 1e-9);
}

#[test]
fn compare_rejects_disjoint_and_lab_frames() {
    let template = canonical_template(1);
    let far = MarkerTrajectory {
        times_s: template.times_s.iter().map(|t| t + 1e5).collect(),
        positions_mm: template.positions_mm.clone(),
        frame: FrameTag::Body,
    };
    assert!(matches!(
        compare(&template, &far),
        Err(MocapError::DisjointTime)
    ));
    let lab = raw_marker_positions(1);
    assert!(matches!(compare(&template, &lab), Err(MocapError::NotBodyFrame)));
}

#[test]
fn noisy_measurement_rms_lands_in_band() {
    // 0.5 mm per-component white noise; after centroid and rotation
    // removal about 5/8 of the 8 noise dofs per sample survive, so the
    // expected per-marker 2D rms is 0.5 * sqrt(2 * 5/8) = 0.56 mm.
    let template = canonical_template(2);
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d6f63);
    let sigma = 0.5;
    let mut rms_values = Vec::new();
    for _ in 0..5 {
        let noisy = MarkerTrajectory {
            times_s: template.times_s.clone(),
            positions_mm: template
                .positions_mm
                .iter()
                .map(|sample| {
                    let mut out = *sample;
                    for m in out.iter_mut() {
                        *m += Vector2::new(
                            sigma * gauss(&mut rng),
                            sigma * gauss(&mut rng),
                        );
                    }
                    out
                })
                .collect(),
            frame: FrameTag::Lab,
        };
        let corrected = body_frame_correct(&noisy).unwrap();
        let report = compare(&template, &corrected).unwrap();
        rms_values.push(report.overall_rms_mm);
    }
    let mean: f64 = rms_values.iter().sum::<f64>() / rms_values.len() as f64;
    assert!(
        (0.4..=0.6).contains(&mean),
        "rms {mean} outside 0.5 mm +/- 20% (runs: {rms_values:?})"
    );
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from two uniforms.
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
