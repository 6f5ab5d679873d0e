//! One binary for the whole workflow: forward/inverse kinematics over CSV,
//! frame-element validation of the reduced model, gait compilation, and
//! motion-capture comparison. All outputs are deterministic: identical
//! inputs produce byte-identical files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector2;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use voxelpom_core::fea::{
    central_actuator_scenario, pom_control_for_actuator, validate_scenario, FeaError,
    MaterialOverrides, PlaneSelector, ScenarioSpec,
};
use voxelpom_core::gait::{
    compile_gait, parse_sequence_csv, predicted_markers, render_marker_csv, render_sequence_csv,
    tripod_preset, GaitError, GaitKeyframes,
};
use voxelpom_core::io::{fmt_sig, to_json_pretty, CsvTable};
use voxelpom_core::lattice::{build_lattice, LatticeSpec, NodeKey};
use voxelpom_core::mocap::{
    body_frame_correct, compare, load_markers, render_markers_csv, FrameTag, MarkerTrajectory,
    MocapError,
};
use voxelpom_core::pom::{PomError, PomModelSpec};
use voxelpom_core::svg::{heatmap, HeatPoint};

/// Exit codes: 0 success, 2 input/schema error, 3 inverse-kinematics
/// failure, 4 frame-solver failure.
const EXIT_SCHEMA: u8 = 2;
const EXIT_IK: u8 = 3;
const EXIT_FEA: u8 = 4;

#[derive(Parser)]
#[command(name = "voxelpom", version, about = "Planes-of-motion voxel robot toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ComponentArg {
    X,
    Y,
    Z,
}

impl ComponentArg {
    fn index(self) -> usize {
        match self {
            ComponentArg::X => 0,
            ComponentArg::Y => 1,
            ComponentArg::Z => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ComponentArg::X => "x",
            ComponentArg::Y => "y",
            ComponentArg::Z => "z",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Forward kinematics: stroke sequence CSV -> effector displacement CSV.
    Fk {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inverse kinematics: desired trajectory CSV -> stroke sequence CSV.
    Ik {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a frame scenario and compare the field against the parity
    /// prediction; writes report.json and heatmap.svg.
    Validate {
        #[arg(long)]
        lattice: PathBuf,
        /// Scenario JSON; defaults to the central-actuator scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Material-overrides JSON merged over the scenario's material.
        #[arg(long)]
        material: Option<PathBuf>,
        /// Actuator separation for the default scenario, mm.
        #[arg(long, default_value_t = 10.0)]
        delta_mm: f64,
        /// Displacement component shown in the heatmap.
        #[arg(long, value_enum, default_value_t = ComponentArg::X)]
        component: ComponentArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile a gait for the quadruped preset; writes sequence.csv and
    /// predicted_markers.csv.
    Gait {
        /// Keyframes JSON; defaults to the bundled gait.
        #[arg(long)]
        keyframes: Option<PathBuf>,
        #[arg(long, default_value_t = 0.04)]
        timestep: f64,
        #[arg(long, default_value_t = 1)]
        cycles: usize,
        #[arg(long, default_value_t = 76.2)]
        pitch_mm: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correct measured markers into the body frame and compare with a
    /// prediction; writes corrected.csv and compare.json.
    Mocap {
        /// Predicted markers: either gait displacements
        /// (marker1_x..marker4_z) or 2D positions (m1_x..m4_y).
        #[arg(long)]
        predicted: PathBuf,
        /// Measured 2D positions (m1_x..m4_y). Omit to synthesize one from
        /// the prediction with --synthetic-noise-mm.
        #[arg(long)]
        measured: Option<PathBuf>,
        /// Generate the measurement: seeded rigid motion plus white noise.
        #[arg(long)]
        synthetic_noise_mm: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 76.2)]
        pitch_mm: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
struct CliFailure {
    code: u8,
    message: String,
}

impl CliFailure {
    fn schema(message: impl Into<String>) -> Self {
        CliFailure { code: EXIT_SCHEMA, message: message.into() }
    }
}

impl From<PomError> for CliFailure {
    fn from(e: PomError) -> Self {
        let code = match &e {
            PomError::RankDeficient { .. } | PomError::Inconsistent { .. } => EXIT_IK,
            _ => EXIT_SCHEMA,
        };
        CliFailure { code, message: e.to_string() }
    }
}

impl From<FeaError> for CliFailure {
    fn from(e: FeaError) -> Self {
        let code = match &e {
            FeaError::UnknownNode(_) | FeaError::BadNode(..) | FeaError::BadDofComponent(_) => {
                EXIT_SCHEMA
            }
            _ => EXIT_FEA,
        };
        CliFailure { code, message: e.to_string() }
    }
}

impl From<GaitError> for CliFailure {
    fn from(e: GaitError) -> Self {
        let code = match &e {
            GaitError::Pom(PomError::RankDeficient { .. })
            | GaitError::Pom(PomError::Inconsistent { .. })
            | GaitError::RoundTrip { .. }
            | GaitError::StrokeExceeded { .. } => EXIT_IK,
            _ => EXIT_SCHEMA,
        };
        CliFailure { code, message: e.to_string() }
    }
}

impl From<MocapError> for CliFailure {
    fn from(e: MocapError) -> Self {
        CliFailure { code: EXIT_SCHEMA, message: e.to_string() }
    }
}

fn read_file(path: &Path) -> Result<String, CliFailure> {
    std::fs::read_to_string(path)
        .map_err(|e| CliFailure::schema(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliFailure> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliFailure::schema(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliFailure::schema(format!("cannot write {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliFailure> {
    let text = read_file(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliFailure::schema(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliFailure> {
    match command {
        Command::Fk { model, sequence, out } => cmd_fk(&model, &sequence, &out),
        Command::Ik { model, trajectories, out } => cmd_ik(&model, &trajectories, &out),
        Command::Validate { lattice, scenario, material, delta_mm, component, out } => {
            cmd_validate(&lattice, scenario.as_deref(), material.as_deref(), delta_mm, component, &out)
        }
        Command::Gait { keyframes, timestep, cycles, pitch_mm, out } => {
            cmd_gait(keyframes.as_deref(), timestep, cycles, pitch_mm, &out)
        }
        Command::Mocap { predicted, measured, synthetic_noise_mm, seed, pitch_mm, out } => {
            cmd_mocap(
                &predicted,
                measured.as_deref(),
                synthetic_noise_mm,
                seed,
                pitch_mm,
                &out,
            )
        }
    }
}

fn cmd_fk(model_path: &Path, sequence_path: &Path, out: &Path) -> Result<(), CliFailure> {
    let spec: PomModelSpec = parse_json(model_path)?;
    let model = spec.build()?;
    let labels = spec.effector_labels();
    let sequence = parse_sequence_csv(&read_file(sequence_path)?)?;
    if sequence.num_controls() != model.num_controls() {
        return Err(CliFailure::schema(format!(
            "sequence has {} stroke columns, model has {} controls",
            sequence.num_controls(),
            model.num_controls()
        )));
    }
    let mut header: Vec<String> = vec!["time_s".to_string()];
    for label in &labels {
        for axis in ["x", "y", "z"] {
            header.push(format!("{label}_{axis}"));
        }
    }
    let mut text = String::new();
    voxelpom_core::io::write_row(&mut text, &header);
    for (t, q) in sequence.times_s.iter().zip(&sequence.q) {
        let x = model.forward(q)?;
        let mut fields = vec![fmt_sig(*t)];
        for v in &x {
            for axis in 0..3 {
                fields.push(fmt_sig(v[axis]));
            }
        }
        voxelpom_core::io::write_row(&mut text, &fields);
    }
    write_file(out, &text)
}

fn cmd_ik(model_path: &Path, trajectories_path: &Path, out: &Path) -> Result<(), CliFailure> {
    let spec: PomModelSpec = parse_json(model_path)?;
    let model = spec.build()?;
    let labels = spec.effector_labels();
    let table = CsvTable::parse(&read_file(trajectories_path)?)
        .map_err(|e| CliFailure::schema(e.to_string()))?;
    let times = table.times().map_err(|e| CliFailure::schema(e.to_string()))?;
    // Column map: effector j, axis a -> column index, where present.
    let mut columns: Vec<[Option<usize>; 3]> = vec![[None; 3]; labels.len()];
    for (j, label) in labels.iter().enumerate() {
        for (a, axis) in ["x", "y", "z"].iter().enumerate() {
            if let Ok(idx) = table.column_index(&format!("{label}_{axis}")) {
                columns[j][a] = Some(idx);
            }
        }
    }
    if columns.iter().flatten().all(Option::is_none) {
        return Err(CliFailure::schema(
            "trajectory file constrains no effector component".to_string(),
        ));
    }
    let mut rows = Vec::with_capacity(times.len());
    let mut max_residual = 0.0_f64;
    for (t, (_, cells)) in times.iter().zip(&table.rows) {
        let desired: Vec<[Option<f64>; 3]> = columns
            .iter()
            .map(|per_axis| {
                let mut spec = [None; 3];
                for a in 0..3 {
                    if let Some(idx) = per_axis[a] {
                        spec[a] = cells[idx];
                    }
                }
                spec
            })
            .collect();
        let solution = model.inverse(&desired)?;
        max_residual = max_residual.max(solution.residual_mm);
        rows.push((*t, solution.q));
    }
    let sequence = voxelpom_core::pom::ActuationSequence::new(
        times,
        rows.iter().map(|(_, q)| q.clone()).collect(),
    );
    write_file(out, &render_sequence_csv(&sequence))?;
    println!("max residual: {} mm", fmt_sig(max_residual));
    Ok(())
}

fn cmd_validate(
    lattice_path: &Path,
    scenario_path: Option<&Path>,
    material_path: Option<&Path>,
    delta_mm: f64,
    component: ComponentArg,
    out: &Path,
) -> Result<(), CliFailure> {
    let lattice_spec: LatticeSpec = parse_json(lattice_path)?;
    let grid = lattice_spec
        .to_grid()
        .map_err(|e| CliFailure::schema(e.to_string()))?;
    let lattice = build_lattice(&grid);

    let (mut scenario, control) = match scenario_path {
        Some(path) => {
            let scenario: ScenarioSpec = parse_json(path)?;
            let first = scenario.actuators.first().ok_or_else(|| {
                CliFailure::schema("scenario needs at least one actuator".to_string())
            })?;
            let node_a = NodeKey(first.node_a);
            let node_b = NodeKey(first.node_b);
            let axis = match first.axis {
                Some(a) => a,
                None => {
                    let pa = node_a.position(grid.pitch_mm());
                    let pb = node_b.position(grid.pitch_mm());
                    [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]]
                }
            };
            let dominant = (0..3)
                .max_by(|&i, &j| axis[i].abs().partial_cmp(&axis[j].abs()).expect("finite"))
                .expect("three components");
            let off_axis = (0..3)
                .filter(|&i| i != dominant)
                .map(|i| axis[i].abs())
                .fold(0.0, f64::max);
            if off_axis > 1e-9 * axis[dominant].abs() {
                return Err(CliFailure::schema(
                    "validation requires an axis-aligned actuator".to_string(),
                ));
            }
            let control = pom_control_for_actuator(&grid, node_a, dominant)?;
            (scenario, control)
        }
        None => central_actuator_scenario(&lattice, delta_mm)?,
    };
    if let Some(path) = material_path {
        let overrides: MaterialOverrides = parse_json(path)?;
        scenario.material = overrides;
    }

    let (report, field) = validate_scenario(&lattice, &scenario, &control)?;

    // Heatmap of the chosen component over the actuated plane.
    let plane = PlaneSelector { normal: report.plane_normal, coord: report.plane_coord };
    let in_plane_axes: Vec<usize> = (0..3).filter(|&a| a != report.plane_normal).collect();
    let axis_names = ["x", "y", "z"];
    let points: Vec<HeatPoint> = lattice
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, key)| plane.contains(**key))
        .map(|(id, key)| {
            let p = key.position(grid.pitch_mm());
            HeatPoint {
                u_mm: p[in_plane_axes[0]],
                v_mm: p[in_plane_axes[1]],
                value: field.translations_mm[id][component.index()],
            }
        })
        .collect();
    let svg = heatmap(
        &points,
        &format!("u{} over plane {}={}", component.name(), axis_names[report.plane_normal], report.plane_coord),
        axis_names[in_plane_axes[0]],
        axis_names[in_plane_axes[1]],
    );

    write_file(&out.join("report.json"), &to_json_pretty(&report))?;
    write_file(&out.join("heatmap.svg"), &svg)?;
    println!(
        "sign agreement: {}; out-of-plane: {}; dissipation: {}",
        report
            .sign_agreement
            .iter()
            .map(|a| fmt_sig(a.fraction))
            .collect::<Vec<_>>()
            .join(","),
        fmt_sig(report.out_of_plane_ratio),
        fmt_sig(report.dissipation)
    );
    Ok(())
}

fn cmd_gait(
    keyframes_path: Option<&Path>,
    timestep: f64,
    cycles: usize,
    pitch_mm: f64,
    out: &Path,
) -> Result<(), CliFailure> {
    let keyframes: GaitKeyframes = match keyframes_path {
        Some(path) => parse_json(path)?,
        None => GaitKeyframes::default_tripod(),
    };
    let config = tripod_preset(pitch_mm);
    let sequence = compile_gait(&config, &keyframes, timestep, cycles)?;
    let prediction = predicted_markers(&config, &sequence)?;
    write_file(&out.join("sequence.csv"), &render_sequence_csv(&sequence))?;
    write_file(&out.join("predicted_markers.csv"), &render_marker_csv(&prediction))?;
    println!(
        "compiled {} steps over {} cycle(s); peak stroke {} mm",
        sequence.len(),
        cycles.max(1),
        fmt_sig(
            sequence
                .q
                .iter()
                .flatten()
                .fold(0.0_f64, |m, q| m.max(q.abs()))
        )
    );
    Ok(())
}

/// Read a prediction file in either schema and return lab-frame positions.
fn load_predicted_positions(path: &Path, pitch_mm: f64) -> Result<MarkerTrajectory, CliFailure> {
    let text = read_file(path)?;
    let table = CsvTable::parse(&text).map_err(|e| CliFailure::schema(e.to_string()))?;
    if table.column_index("m1_x").is_ok() {
        let (traj, _) = load_markers(&text)?;
        return Ok(traj);
    }
    // Gait displacement schema: add the preset's rest marker positions.
    let times = table.times().map_err(|e| CliFailure::schema(e.to_string()))?;
    let config = tripod_preset(pitch_mm);
    let rest: Vec<Vector2<f64>> = config
        .markers
        .iter()
        .map(|&m| {
            let p = config.model.effectors()[m].key().position(pitch_mm);
            Vector2::new(p[0], p[1])
        })
        .collect();
    let mut cols = Vec::new();
    for m in 1..=4 {
        for axis in ["x", "y"] {
            cols.push(
                table
                    .column_index(&format!("marker{m}_{axis}"))
                    .map_err(|e| CliFailure::schema(e.to_string()))?,
            );
        }
    }
    let mut positions = Vec::with_capacity(times.len());
    for (line, cells) in &table.rows {
        let mut sample = [Vector2::zeros(); 4];
        for m in 0..4 {
            let dx = cells[cols[2 * m]].ok_or_else(|| {
                CliFailure::schema(format!("line {line}: missing marker displacement"))
            })?;
            let dy = cells[cols[2 * m + 1]].ok_or_else(|| {
                CliFailure::schema(format!("line {line}: missing marker displacement"))
            })?;
            sample[m] = rest[m] + Vector2::new(dx, dy);
        }
        positions.push(sample);
    }
    Ok(MarkerTrajectory { times_s: times, positions_mm: positions, frame: FrameTag::Lab })
}

fn cmd_mocap(
    predicted_path: &Path,
    measured_path: Option<&Path>,
    synthetic_noise_mm: Option<f64>,
    seed: u64,
    pitch_mm: f64,
    out: &Path,
) -> Result<(), CliFailure> {
    let predicted_lab = load_predicted_positions(predicted_path, pitch_mm)?;
    let measured_lab = match (measured_path, synthetic_noise_mm) {
        (Some(path), _) => {
            let (traj, dropped) = load_markers(&read_file(path)?)?;
            if dropped > 0 {
                println!("dropped {dropped} incomplete row(s)");
            }
            traj
        }
        (None, Some(noise)) => {
            let synthetic = synthesize_measurement(&predicted_lab, noise, seed);
            write_file(&out.join("measured_synthetic.csv"), &render_markers_csv(&synthetic))?;
            synthetic
        }
        (None, None) => {
            return Err(CliFailure::schema(
                "provide --measured or --synthetic-noise-mm".to_string(),
            ))
        }
    };
    let predicted = body_frame_correct(&predicted_lab)?;
    let corrected = body_frame_correct(&measured_lab)?;
    let report = compare(&predicted, &corrected)?;
    write_file(&out.join("corrected.csv"), &render_markers_csv(&corrected))?;
    write_file(&out.join("compare.json"), &to_json_pretty(&report))?;
    println!(
        "shift {} s; overall rms {} mm",
        fmt_sig(report.shift_s),
        fmt_sig(report.overall_rms_mm)
    );
    Ok(())
}

/// Rigid motion (wandering translation, slow turning) plus white noise,
/// fully determined by the seed.
fn synthesize_measurement(
    predicted: &MarkerTrajectory,
    noise_mm: f64,
    seed: u64,
) -> MarkerTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle_amp = 0.2 + 0.2 * rng.random::<f64>();
    let angle_rate = 0.5 + rng.random::<f64>();
    let angle_bias = 0.4 * (rng.random::<f64>() - 0.5);
    let shift_amp = 20.0 + 30.0 * rng.random::<f64>();
    let drift = 10.0 * (rng.random::<f64>() - 0.5);
    let gauss = move |rng: &mut ChaCha8Rng| -> f64 {
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random::<f64>();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let positions = predicted
        .times_s
        .iter()
        .zip(&predicted.positions_mm)
        .map(|(t, sample)| {
            let angle = angle_bias + angle_amp * (angle_rate * t).sin();
            let (s, c) = angle.sin_cos();
            let shift = Vector2::new(
                shift_amp * (0.7 * t).cos() + drift * t,
                shift_amp * (0.9 * t).sin(),
            );
            let mut outp = [Vector2::zeros(); 4];
            for m in 0..4 {
                let v = sample[m];
                let rotated = Vector2::new(c * v[0] - s * v[1], s * v[0] + c * v[1]);
                outp[m] = rotated
                    + shift
                    + Vector2::new(noise_mm * gauss(&mut rng), noise_mm * gauss(&mut rng));
            }
            outp
        })
        .collect();
    MarkerTrajectory {
        times_s: predicted.times_s.clone(),
        positions_mm: positions,
        frame: FrameTag::Lab,
    }
}
