//! The quadruped robot preset and the gait compiler.
//!
//! The robot core is a 2x2x2 voxel block with two extra voxels attached on
//! the +x side. Four vertical linear actuators sit on the internal node
//! columns between the bottom and top layer; each bottom connection site is
//! a control node whose vertical displacement activates one of the planes
//! x=1, x=3, y=1, y=3 (half-unit coordinates). The four bottom corner nodes
//! lie on the intersection of two such planes each and serve as markers;
//! the back feet ride markers 1 and 4, while the front feet are rigid
//! extensions of the nodes the front voxels attach to.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{fmt_sig, render_csv, CsvError, CsvTable};
use crate::lattice::{build_lattice, Lattice, NodeRef, VoxelGrid};
use crate::pom::{ActuationSequence, ControlNode, EndEffector, PomError, PomModel};

/// Actuator stroke limit per attached node, mm.
pub const STROKE_LIMIT_MM: f64 = 5.0;

/// Phase resolution: keyframe phases snap to multiples of 2^-20 of a cycle,
/// making mirrored phases exactly representable.
pub const PHASE_TICKS: i64 = 1 << 20;

#[derive(Debug, Error)]
pub enum GaitError {
    #[error("keyframe phase {0} outside [0, 1)")]
    BadPhase(f64),
    #[error("target {0:?} is not part of the robot configuration")]
    UnknownTarget(String),
    #[error("target {target:?} may not constrain component {component} ({reason})")]
    ComponentNotAllowed { target: String, component: usize, reason: &'static str },
    #[error("demanded amplitude {value} mm at {target:?} exceeds the {STROKE_LIMIT_MM} mm stroke limit")]
    AmplitudeExceeded { target: String, value: f64 },
    #[error("waveform for {0:?} has duplicate or unordered phases")]
    UnorderedPhases(String),
    #[error("no waveform constrains any component")]
    EmptyGait,
    #[error("cycle and timestep must be positive, got cycle {cycle_s} s, timestep {timestep_s} s")]
    BadTimestep { cycle_s: f64, timestep_s: f64 },
    #[error("compiled stroke |q{index}| = {value} mm exceeds {STROKE_LIMIT_MM} mm at step {step}")]
    StrokeExceeded { index: usize, value: f64, step: usize },
    #[error("forward round trip misses a constrained component by {error} mm at step {step}")]
    RoundTrip { step: usize, error: f64 },
    #[error("sequence has {got} controls, robot has {expected}")]
    SequenceMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Pom(#[from] PomError),
    #[error(transparent)]
    Csv(#[from] CsvError),
}

/// Which components a foot may constrain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FootKind {
    /// Ground-plane foot: x and y only.
    Back,
    /// Lifting foot on a rigid extension: z only.
    Front,
}

/// One foot: a named binding of a model effector plus the rigid offset from
/// the bound node to the physical foot tip.
#[derive(Debug, Clone)]
pub struct Foot {
    pub name: String,
    pub effector: usize,
    pub kind: FootKind,
    pub offset_mm: Vector3<f64>,
}

/// The assembled robot: lattice, kinematic model, marker bookkeeping, feet.
#[derive(Debug, Clone)]
pub struct RobotConfig {
    pub lattice: Lattice,
    pub model: PomModel,
    /// Effector indices of markers 1..4.
    pub markers: [usize; 4],
    pub feet: Vec<Foot>,
}

impl RobotConfig {
    /// Effector index for a gait target name: a foot name or `marker1..4`.
    pub fn target_effector(&self, name: &str) -> Option<(usize, Option<FootKind>)> {
        if let Some(foot) = self.feet.iter().find(|f| f.name == name) {
            return Some((foot.effector, Some(foot.kind)));
        }
        for (i, &e) in self.markers.iter().enumerate() {
            if name == format!("marker{}", i + 1) {
                return Some((e, None));
            }
        }
        None
    }

    pub fn pitch_mm(&self) -> f64 {
        self.lattice.pitch_mm()
    }
}

/// The locomotive robot preset: 2x2x2 core plus two front voxels, four
/// vertical actuators on distinct planes of motion, four corner markers.
///
/// Control order: q0 plane y=1, q1 plane y=3, q2 plane x=1, q3 plane x=3.
/// Effector order: markers 1..4, then the front-voxel attachment nodes
/// (left y=1, right y=3).
pub fn tripod_preset(pitch_mm: f64) -> RobotConfig {
    let mut cells = Vec::new();
    for x in 0..2 {
        for y in 0..2 {
            for z in 0..2 {
                cells.push([x, y, z]);
            }
        }
    }
    cells.push([2, 0, 0]);
    cells.push([2, 1, 0]);
    let grid = VoxelGrid::new(cells, pitch_mm).expect("preset grid is valid");
    let lattice = build_lattice(&grid);

    let node = |voxel: [i64; 3], index: usize| NodeRef::new(voxel, index).expect("valid index");
    let controls = vec![
        // Bottom actuator connection sites; vertical motion activates the
        // plane whose normal is the third axis.
        ControlNode::new(node([0, 0, 0], 0), 1).expect("key (2,1,1), plane y=1"),
        ControlNode::new(node([0, 1, 0], 0), 1).expect("key (2,3,1), plane y=3"),
        ControlNode::new(node([0, 0, 0], 1), 0).expect("key (1,2,1), plane x=1"),
        ControlNode::new(node([1, 0, 0], 1), 0).expect("key (3,2,1), plane x=3"),
    ];
    let effectors = vec![
        EndEffector::new(node([0, 0, 0], 5)), // marker1 (1,1,0)
        EndEffector::new(node([1, 0, 0], 5)), // marker2 (3,1,0)
        EndEffector::new(node([1, 1, 0], 5)), // marker3 (3,3,0)
        EndEffector::new(node([0, 1, 0], 5)), // marker4 (1,3,0)
        EndEffector::new(node([2, 0, 0], 3)), // front attachment, left (4,1,1)
        EndEffector::new(node([2, 1, 0], 3)), // front attachment, right (4,3,1)
    ];
    let model = PomModel::new(controls, effectors).expect("preset planes are disjoint");
    model.validate_against(&lattice).expect("preset nodes exist");

    let feet = vec![
        Foot {
            name: "back_left".to_string(),
            effector: 0,
            kind: FootKind::Back,
            offset_mm: Vector3::zeros(),
        },
        Foot {
            name: "back_right".to_string(),
            effector: 3,
            kind: FootKind::Back,
            offset_mm: Vector3::zeros(),
        },
        // Front feet extend one voxel pitch forward of their attachments.
        Foot {
            name: "front_left".to_string(),
            effector: 4,
            kind: FootKind::Front,
            offset_mm: Vector3::new(pitch_mm, 0.0, 0.0),
        },
        Foot {
            name: "front_right".to_string(),
            effector: 5,
            kind: FootKind::Front,
            offset_mm: Vector3::new(pitch_mm, 0.0, 0.0),
        },
    ];
    RobotConfig { lattice, model, markers: [0, 1, 2, 3], feet }
}

/// One keyframe: phase in [0, 1) and per-axis displacement, `null` = leave
/// the component unconstrained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Keyframe {
    pub phase: f64,
    pub displacement_mm: [Option<f64>; 3],
}

/// Gait description: cycle duration plus per-target keyframe lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaitKeyframes {
    pub cycle_s: f64,
    pub targets: BTreeMap<String, Vec<Keyframe>>,
}

/// The default gait asset: right front step, sway, left front step, sway
/// back, with the back feet riding their checkerboard couplings.
pub const DEFAULT_GAIT_JSON: &str = include_str!("../assets/tripod_gait.json");

impl GaitKeyframes {
    pub fn default_tripod() -> GaitKeyframes {
        serde_json::from_str(DEFAULT_GAIT_JSON).expect("bundled gait asset parses")
    }

    /// Phases mirrored about the cycle midpoint: running the feet backwards.
    /// Mirrored phases stay exact because phases live on the tick grid.
    pub fn time_reversed(&self) -> GaitKeyframes {
        let targets = self
            .targets
            .iter()
            .map(|(name, frames)| {
                let mut mirrored: Vec<Keyframe> = frames
                    .iter()
                    .map(|k| {
                        let ticks = phase_ticks(k.phase);
                        let rev = (PHASE_TICKS - ticks) % PHASE_TICKS;
                        Keyframe {
                            phase: rev as f64 / PHASE_TICKS as f64,
                            displacement_mm: k.displacement_mm,
                        }
                    })
                    .collect();
                mirrored.sort_by(|a, b| a.phase.partial_cmp(&b.phase).expect("finite phases"));
                (name.clone(), mirrored)
            })
            .collect();
        GaitKeyframes { cycle_s: self.cycle_s, targets }
    }
}

fn phase_ticks(phase: f64) -> i64 {
    (phase * PHASE_TICKS as f64).round() as i64
}

/// One component's periodic waveform on the tick grid.
#[derive(Debug, Clone)]
struct Waveform {
    effector: usize,
    axis: usize,
    /// (ticks, value), sorted, ticks unique in [0, PHASE_TICKS).
    points: Vec<(i64, f64)>,
}

impl Waveform {
    /// Value at phase `k/n` of the cycle, evaluated symmetrically so that a
    /// mirrored query on the mirrored waveform is bitwise identical.
    fn sample(&self, k: i64, n: i64) -> f64 {
        if self.points.len() == 1 {
            return self.points[0].1;
        }
        let query = k * PHASE_TICKS; // phase as a rational over denominator n
        let m = self.points.len();
        // Find the segment whose start tick*n <= query < next tick*n,
        // wrapping the final segment around the cycle.
        let mut seg = m - 1;
        let mut offset = -PHASE_TICKS; // last keyframe shifted one cycle back
        for (i, &(t, _)) in self.points.iter().enumerate() {
            if t * n <= query {
                seg = i;
                offset = 0;
            } else {
                break;
            }
        }
        let (t0, v0) = self.points[seg];
        let (t1, v1) = if seg + 1 < m {
            self.points[seg + 1]
        } else {
            let (t, v) = self.points[0];
            (t + PHASE_TICKS, v)
        };
        let t0 = t0 + offset;
        let t1 = t1 + offset;
        // Exact integer numerator/denominator of the local coordinate.
        let num = query - t0 * n;
        let den = (t1 - t0) * n;
        debug_assert!(num >= 0 && num <= den);
        smoothstep_segment(v0, v1, num, den)
    }
}

/// Smoothstep interpolation evaluated from the nearer endpoint, so a
/// mirrored (num -> den-num, v0 <-> v1) evaluation produces bitwise the
/// same value.
fn smoothstep_segment(v0: f64, v1: f64, num: i64, den: i64) -> f64 {
    let s = |u: f64| u * u * (3.0 - 2.0 * u);
    if 2 * num < den {
        let u = num as f64 / den as f64;
        v0 + (v1 - v0) * s(u)
    } else if 2 * num > den {
        let u = (den - num) as f64 / den as f64;
        v1 + (v0 - v1) * s(u)
    } else {
        0.5 * (v0 + v1)
    }
}

fn build_waveforms(
    config: &RobotConfig,
    keyframes: &GaitKeyframes,
) -> Result<Vec<Waveform>, GaitError> {
    let mut waveforms = Vec::new();
    for (name, frames) in &keyframes.targets {
        let (effector, kind) = config
            .target_effector(name)
            .ok_or_else(|| GaitError::UnknownTarget(name.clone()))?;
        for axis in 0..3 {
            let mut points = Vec::new();
            for frame in frames {
                if !(0.0..1.0).contains(&frame.phase) {
                    return Err(GaitError::BadPhase(frame.phase));
                }
                if let Some(value) = frame.displacement_mm[axis] {
                    match kind {
                        Some(FootKind::Back) if axis == 2 => {
                            return Err(GaitError::ComponentNotAllowed {
                                target: name.clone(),
                                component: axis,
                                reason: "back feet stay in the ground plane",
                            });
                        }
                        Some(FootKind::Front) if axis != 2 => {
                            return Err(GaitError::ComponentNotAllowed {
                                target: name.clone(),
                                component: axis,
                                reason: "front feet only lift vertically",
                            });
                        }
                        _ => {}
                    }
                    if value.abs() > STROKE_LIMIT_MM {
                        return Err(GaitError::AmplitudeExceeded {
                            target: name.clone(),
                            value,
                        });
                    }
                    points.push((phase_ticks(frame.phase), value));
                }
            }
            if points.is_empty() {
                continue;
            }
            if points.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(GaitError::UnorderedPhases(name.clone()));
            }
            waveforms.push(Waveform { effector, axis, points });
        }
    }
    if waveforms.is_empty() {
        return Err(GaitError::EmptyGait);
    }
    Ok(waveforms)
}

/// Compile foot/marker trajectories into per-timestep control displacements.
///
/// `timestep_s` is rounded so that a whole number of steps covers one cycle.
/// Controls reached by no constrained component stay at zero; demands the
/// coupled structure cannot meet fail loudly rather than being clipped or
/// averaged away.
pub fn compile_gait(
    config: &RobotConfig,
    keyframes: &GaitKeyframes,
    timestep_s: f64,
    cycles: usize,
) -> Result<ActuationSequence, GaitError> {
    if !(keyframes.cycle_s > 0.0) || !(timestep_s > 0.0) {
        return Err(GaitError::BadTimestep {
            cycle_s: keyframes.cycle_s,
            timestep_s,
        });
    }
    let waveforms = build_waveforms(config, keyframes)?;
    let steps_per_cycle = ((keyframes.cycle_s / timestep_s).round() as i64).max(1);
    let dt = keyframes.cycle_s / steps_per_cycle as f64;

    // Controls with no reachable constrained component hold position; the
    // rest form the reduced model handed to the least-squares inverse.
    let m = config.model.num_controls();
    let mut active = vec![false; m];
    for w in &waveforms {
        for (i, flag) in active.iter_mut().enumerate() {
            let column = crate::pom::actuation_column(
                config.model.controls()[i].plane_normal,
                config.model.effectors()[w.effector].node_index(),
            ) * config.model.coupling(i, w.effector) as f64;
            if column[w.axis] != 0.0 {
                *flag = true;
            }
        }
    }
    let active_controls: Vec<ControlNode> = config
        .model
        .controls()
        .iter()
        .zip(&active)
        .filter(|(_, a)| **a)
        .map(|(c, _)| *c)
        .collect();
    if active_controls.is_empty() {
        return Err(GaitError::EmptyGait);
    }
    let reduced = PomModel::new(active_controls, config.model.effectors().to_vec())?;

    let mut times = Vec::with_capacity(steps_per_cycle as usize * cycles.max(1));
    let mut rows = Vec::with_capacity(times.capacity());
    for k in 0..steps_per_cycle {
        let mut desired = vec![[None, None, None]; config.model.num_effectors()];
        for w in &waveforms {
            desired[w.effector][w.axis] = Some(w.sample(k, steps_per_cycle));
        }
        let solution = reduced.inverse(&desired)?;
        let mut q = vec![0.0; m];
        let mut it = solution.q.iter();
        for (i, flag) in active.iter().enumerate() {
            if *flag {
                q[i] = *it.next().expect("one value per active control");
            }
        }
        // Round trip: the compiled strokes must reproduce every constrained
        // component, and never exceed the physical stroke.
        let forward = config.model.forward(&q)?;
        for (j, spec) in desired.iter().enumerate() {
            for axis in 0..3 {
                if let Some(value) = spec[axis] {
                    let err = (forward[j][axis] - value).abs();
                    if err > 1e-9 {
                        return Err(GaitError::RoundTrip { step: k as usize, error: err });
                    }
                }
            }
        }
        for (i, qi) in q.iter().enumerate() {
            if qi.abs() > STROKE_LIMIT_MM + 1e-9 {
                return Err(GaitError::StrokeExceeded {
                    index: i,
                    value: *qi,
                    step: k as usize,
                });
            }
        }
        times.push(k as f64 * dt);
        rows.push(q);
    }
    let cycles = cycles.max(1);
    if cycles > 1 {
        let base_rows = rows.clone();
        for c in 1..cycles {
            for (k, row) in base_rows.iter().enumerate() {
                times.push((c as i64 * steps_per_cycle + k as i64) as f64 * dt);
                rows.push(row.clone());
            }
        }
    }
    Ok(ActuationSequence::new(times, rows))
}

/// Marker displacement trajectories, body frame, mm.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerPrediction {
    pub times_s: Vec<f64>,
    /// Per time sample, displacement of markers 1..4.
    pub displacements_mm: Vec<[Vector3<f64>; 4]>,
}

/// Forward kinematics of a compiled sequence, restricted to the markers.
pub fn predicted_markers(
    config: &RobotConfig,
    sequence: &ActuationSequence,
) -> Result<MarkerPrediction, GaitError> {
    if sequence.num_controls() != config.model.num_controls() {
        return Err(GaitError::SequenceMismatch {
            expected: config.model.num_controls(),
            got: sequence.num_controls(),
        });
    }
    let mut displacements = Vec::with_capacity(sequence.len());
    for q in &sequence.q {
        let x = config.model.forward(q)?;
        displacements.push([
            x[config.markers[0]],
            x[config.markers[1]],
            x[config.markers[2]],
            x[config.markers[3]],
        ]);
    }
    Ok(MarkerPrediction {
        times_s: sequence.times_s.clone(),
        displacements_mm: displacements,
    })
}

/// State of the front feet under a given set of effector displacements.
#[derive(Debug, Clone)]
pub struct FrontFootState {
    pub name: String,
    /// Rest position of the foot tip, mm.
    pub rest_mm: Vector3<f64>,
    /// Rigid-extension displacement (equal to the attachment node's), mm.
    pub displacement_mm: Vector3<f64>,
}

/// Front feet as rigid extensions, plus the shared pitch angle implied by
/// differential lift of the two attachments.
pub fn front_foot_positions(
    config: &RobotConfig,
    effector_displacements: &[Vector3<f64>],
) -> Result<(Vec<FrontFootState>, f64), GaitError> {
    if effector_displacements.len() != config.model.num_effectors() {
        return Err(GaitError::SequenceMismatch {
            expected: config.model.num_effectors(),
            got: effector_displacements.len(),
        });
    }
    let pitch = config.pitch_mm();
    let mut states = Vec::new();
    let mut lifts = Vec::new();
    let mut attach_positions = Vec::new();
    for foot in config.feet.iter().filter(|f| f.kind == FootKind::Front) {
        let effector = &config.model.effectors()[foot.effector];
        let p = effector.key().position(pitch);
        let rest = Vector3::new(p[0], p[1], p[2]) + foot.offset_mm;
        let displacement = effector_displacements[foot.effector];
        lifts.push(displacement[2]);
        attach_positions.push(Vector3::new(p[0], p[1], p[2]));
        states.push(FrontFootState {
            name: foot.name.clone(),
            rest_mm: rest,
            displacement_mm: displacement,
        });
    }
    let pitch_angle = if lifts.len() == 2 {
        let span = (attach_positions[1] - attach_positions[0]).norm();
        (lifts[1] - lifts[0]).atan2(span)
    } else {
        0.0
    };
    Ok((states, pitch_angle))
}

/// Sequence CSV: `time_s,q0..q{M-1}`.
pub fn render_sequence_csv(sequence: &ActuationSequence) -> String {
    let m = sequence.num_controls();
    let names: Vec<String> = (0..m).map(|i| format!("q{i}")).collect();
    let mut header: Vec<&str> = vec!["time_s"];
    header.extend(names.iter().map(String::as_str));
    let rows: Vec<(f64, Vec<f64>)> = sequence
        .times_s
        .iter()
        .zip(&sequence.q)
        .map(|(t, q)| (*t, q.clone()))
        .collect();
    render_csv(&header, &rows)
}

pub fn parse_sequence_csv(text: &str) -> Result<ActuationSequence, GaitError> {
    let table = CsvTable::parse(text)?;
    let times = table.times()?;
    let mut q_cols = Vec::new();
    let mut i = 0usize;
    while let Ok(idx) = table.column_index(&format!("q{i}")) {
        q_cols.push(idx);
        i += 1;
    }
    if q_cols.is_empty() {
        return Err(GaitError::Csv(CsvError::MissingColumn("q0".to_string())));
    }
    let mut rows = Vec::with_capacity(table.rows.len());
    for (line, cells) in &table.rows {
        let mut q = Vec::with_capacity(q_cols.len());
        for &c in &q_cols {
            q.push(cells[c].ok_or(CsvError::Malformed {
                line: *line,
                message: "missing stroke value".to_string(),
            })?);
        }
        rows.push(q);
    }
    Ok(ActuationSequence::new(times, rows))
}

/// Marker prediction CSV: `time_s,marker1_x,...,marker4_z`.
pub fn render_marker_csv(prediction: &MarkerPrediction) -> String {
    let mut header: Vec<String> = vec!["time_s".to_string()];
    for m in 1..=4 {
        for axis in ["x", "y", "z"] {
            header.push(format!("marker{m}_{axis}"));
        }
    }
    let mut out = String::new();
    crate::io::write_row(&mut out, &header);
    for (t, markers) in prediction.times_s.iter().zip(&prediction.displacements_mm) {
        let mut fields = vec![fmt_sig(*t)];
        for m in markers {
            for axis in 0..3 {
                fields.push(fmt_sig(m[axis]));
            }
        }
        crate::io::write_row(&mut out, &fields);
    }
    out
}
