//! Body-frame correction and comparison for 2D marker trajectories.
//!
//! A top-down motion-capture view of the robot mixes the gait-induced
//! marker motion with rigid translation and slow turning of the whole body.
//! The correction removes the per-sample centroid, then the common rotation
//! (estimated as the circular mean of each marker's angle deviation from
//! its own time-average bearing, iterated to a fixed point), and finally
//! normalizes the overall orientation so that marker 1's mean bearing sits
//! at its rest direction. The result is a canonical body frame: applying
//! the correction twice changes nothing, and any time-varying rigid motion
//! of the input leaves the output untouched.

use std::collections::BTreeMap;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{fmt_sig, write_row, CsvError, CsvTable};

/// Canonical bearing of marker 1 (the back-left rest corner): atan2(-1,-1).
pub const MARKER1_BEARING_RAD: f64 = -3.0 * std::f64::consts::FRAC_PI_4;

/// Which frame a trajectory lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameTag {
    Lab,
    Body,
}

#[derive(Debug, Error)]
pub enum MocapError {
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("markers are coincident at sample {sample}; the common rotation is undefined")]
    CoincidentMarkers { sample: usize },
    #[error("expected a body-frame trajectory, found lab frame")]
    NotBodyFrame,
    #[error("trajectories do not overlap in time")]
    DisjointTime,
    #[error("trajectory needs at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("common-rotation estimate failed to converge")]
    NonConvergent,
}

/// Four labelled 2D markers over time.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerTrajectory {
    pub times_s: Vec<f64>,
    pub positions_mm: Vec<[Vector2<f64>; 4]>,
    pub frame: FrameTag,
}

impl MarkerTrajectory {
    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        if self.times_s.len() < 2 {
            0.0
        } else {
            self.times_s[self.times_s.len() - 1] - self.times_s[0]
        }
    }
}

/// Parse the `time_s,m1_x,m1_y,...,m4_y` schema. Rows with any missing
/// marker value are dropped; the count of dropped rows is returned.
pub fn load_markers(text: &str) -> Result<(MarkerTrajectory, usize), MocapError> {
    let table = CsvTable::parse(text)?;
    let time_idx = table.column_index("time_s")?;
    let mut marker_cols = Vec::with_capacity(8);
    for m in 1..=4 {
        for axis in ["x", "y"] {
            marker_cols.push(table.column_index(&format!("m{m}_{axis}"))?);
        }
    }
    let mut times = Vec::new();
    let mut positions = Vec::new();
    let mut dropped = 0usize;
    let mut prev_time = f64::NEG_INFINITY;
    for (line, cells) in &table.rows {
        let t = cells[time_idx].ok_or(CsvError::Malformed {
            line: *line,
            message: "missing time value".to_string(),
        })?;
        if t <= prev_time {
            return Err(MocapError::Csv(CsvError::NonMonotoneTime { line: *line }));
        }
        prev_time = t;
        let values: Vec<Option<f64>> = marker_cols.iter().map(|&c| cells[c]).collect();
        if values.iter().any(Option::is_none) {
            dropped += 1;
            continue;
        }
        let mut sample = [Vector2::zeros(); 4];
        for m in 0..4 {
            sample[m] = Vector2::new(
                values[2 * m].expect("checked above"),
                values[2 * m + 1].expect("checked above"),
            );
        }
        times.push(t);
        positions.push(sample);
    }
    Ok((
        MarkerTrajectory { times_s: times, positions_mm: positions, frame: FrameTag::Lab },
        dropped,
    ))
}

/// Render the same schema back out.
pub fn render_markers_csv(traj: &MarkerTrajectory) -> String {
    let mut out = String::new();
    let mut header = vec!["time_s".to_string()];
    for m in 1..=4 {
        for axis in ["x", "y"] {
            header.push(format!("m{m}_{axis}"));
        }
    }
    write_row(&mut out, &header);
    for (t, sample) in traj.times_s.iter().zip(&traj.positions_mm) {
        let mut fields = vec![fmt_sig(*t)];
        for m in sample {
            fields.push(fmt_sig(m[0]));
            fields.push(fmt_sig(m[1]));
        }
        write_row(&mut out, &fields);
    }
    out
}

fn circular_mean(angles: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for a in angles {
        s += a.sin();
        c += a.cos();
    }
    s.atan2(c)
}

/// Transform a lab-frame trajectory into the canonical body frame.
///
/// Per sample: subtract the marker centroid, then remove the common
/// rotation (iterated until the estimate vanishes below 1e-13 rad), then
/// rotate the whole record so marker 1's time-average bearing equals its
/// rest bearing. Finally the record is rescaled by
/// `sqrt(spread_before / spread_after)` over the per-sample centroid
/// deviations; rotations about the centroid preserve that spread, so the
/// factor is unity up to rounding and is applied only to keep the
/// amplitude bookkeeping explicit.
pub fn body_frame_correct(traj: &MarkerTrajectory) -> Result<MarkerTrajectory, MocapError> {
    let n = traj.len();
    if n == 0 {
        return Err(MocapError::TooShort { need: 1, got: 0 });
    }
    // Step 1: centroid removal.
    let mut pos: Vec<[Vector2<f64>; 4]> = Vec::with_capacity(n);
    for sample in &traj.positions_mm {
        let centroid = (sample[0] + sample[1] + sample[2] + sample[3]) / 4.0;
        pos.push([
            sample[0] - centroid,
            sample[1] - centroid,
            sample[2] - centroid,
            sample[3] - centroid,
        ]);
    }
    let spread_before: f64 = pos
        .iter()
        .flat_map(|s| s.iter())
        .map(|v| v.norm_squared())
        .sum();
    let scale = (spread_before / (4.0 * n as f64)).sqrt();
    for (k, sample) in pos.iter().enumerate() {
        if sample.iter().all(|v| v.norm() <= 1e-12 * scale.max(1e-300)) {
            return Err(MocapError::CoincidentMarkers { sample: k });
        }
    }

    // Steps 2-4: iterated common-rotation removal in polar form.
    let mut converged = false;
    for _ in 0..128 {
        let mut marker_means = [0.0_f64; 4];
        for (m, mean) in marker_means.iter_mut().enumerate() {
            *mean = circular_mean(pos.iter().map(|s| s[m][1].atan2(s[m][0])));
        }
        let mut worst = 0.0_f64;
        for sample in pos.iter_mut() {
            let common = circular_mean(sample.iter().zip(&marker_means).map(
                |(v, mean)| {
                    let angle = v[1].atan2(v[0]);
                    angle - mean
                },
            ));
            worst = worst.max(common.abs());
            if common != 0.0 {
                let (s, c) = (-common).sin_cos();
                for v in sample.iter_mut() {
                    *v = Vector2::new(c * v[0] - s * v[1], s * v[0] + c * v[1]);
                }
            }
        }
        if worst < 1e-13 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MocapError::NonConvergent);
    }

    // Orientation pin: marker 1's mean bearing sits at the rest corner.
    let phi1 = circular_mean(pos.iter().map(|s| s[0][1].atan2(s[0][0])));
    let turn = MARKER1_BEARING_RAD - phi1;
    if turn != 0.0 {
        let (s, c) = turn.sin_cos();
        for sample in pos.iter_mut() {
            for v in sample.iter_mut() {
                *v = Vector2::new(c * v[0] - s * v[1], s * v[0] + c * v[1]);
            }
        }
    }

    // Step 5: amplitude rescale.
    let spread_after: f64 = pos
        .iter()
        .flat_map(|s| s.iter())
        .map(|v| v.norm_squared())
        .sum();
    let s = if spread_after > 0.0 {
        (spread_before / spread_after).sqrt()
    } else {
        1.0
    };
    if s != 1.0 {
        for sample in pos.iter_mut() {
            for v in sample.iter_mut() {
                *v *= s;
            }
        }
    }

    Ok(MarkerTrajectory {
        times_s: traj.times_s.clone(),
        positions_mm: pos,
        frame: FrameTag::Body,
    })
}

/// Per-marker comparison metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkerReport {
    /// Root-mean-square 2D error over the aligned window, mm.
    pub rms_mm: f64,
    /// Time shift applied to the measured record, s.
    pub shift_s: f64,
    /// Measured loop area over predicted loop area; absent when the
    /// predicted loop is degenerate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub shift_s: f64,
    pub overall_rms_mm: f64,
    pub samples_compared: usize,
    pub markers: BTreeMap<String, MarkerReport>,
}

fn interpolate(traj: &MarkerTrajectory, t: f64) -> Option<[Vector2<f64>; 4]> {
    let times = &traj.times_s;
    if times.is_empty() || t < times[0] || t > times[times.len() - 1] {
        return None;
    }
    let idx = times.partition_point(|x| *x <= t);
    if idx == 0 {
        return Some(traj.positions_mm[0]);
    }
    if idx >= times.len() {
        return Some(traj.positions_mm[times.len() - 1]);
    }
    let (t0, t1) = (times[idx - 1], times[idx]);
    let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    let (a, b) = (&traj.positions_mm[idx - 1], &traj.positions_mm[idx]);
    let mut out = [Vector2::zeros(); 4];
    for m in 0..4 {
        out[m] = a[m] + (b[m] - a[m]) * w;
    }
    Some(out)
}

/// Signed polygon area of one marker's sampled loop.
fn loop_area(points: &[Vector2<f64>]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc / 2.0
}

/// Align `measured` against `predicted` by time shift and report per-marker
/// errors. Both trajectories must be in the body frame. The shift search
/// scans multiples of the predicted sampling step across one period
/// (the shorter record's duration), keeping the smallest-RMS shift and
/// breaking ties toward zero shift.
pub fn compare(
    predicted: &MarkerTrajectory,
    measured: &MarkerTrajectory,
) -> Result<CompareReport, MocapError> {
    if predicted.frame != FrameTag::Body || measured.frame != FrameTag::Body {
        return Err(MocapError::NotBodyFrame);
    }
    if predicted.len() < 2 || measured.len() < 2 {
        return Err(MocapError::TooShort {
            need: 2,
            got: predicted.len().min(measured.len()),
        });
    }
    let m_start = measured.times_s[0];
    let m_end = measured.times_s[measured.len() - 1];
    let p_start = predicted.times_s[0];
    let p_end = predicted.times_s[predicted.len() - 1];
    if m_start > p_end || m_end < p_start {
        return Err(MocapError::DisjointTime);
    }
    let dt = predicted.duration_s() / (predicted.len() - 1) as f64;
    let period = predicted.duration_s().min(measured.duration_s());
    let half_steps = ((period / 2.0) / dt).floor() as i64;

    let mut best: Option<(f64, f64, [f64; 4], usize)> = None;
    for k in 0..=(2 * half_steps) {
        // 0, +1, -1, +2, -2, ... so ties resolve toward zero shift.
        let signed = if k % 2 == 0 { k / 2 } else { -(k / 2 + 1) };
        let shift = signed as f64 * dt;
        let mut per_marker = [0.0_f64; 4];
        let mut count = 0usize;
        for (t, sample) in predicted.times_s.iter().zip(&predicted.positions_mm) {
            if let Some(meas) = interpolate(measured, t + shift) {
                for m in 0..4 {
                    per_marker[m] += (meas[m] - sample[m]).norm_squared();
                }
                count += 1;
            }
        }
        if count < (predicted.len() / 2).max(2) {
            continue;
        }
        let total: f64 = per_marker.iter().sum::<f64>() / (4 * count) as f64;
        let total = total.sqrt();
        if best.as_ref().is_none_or(|(b, ..)| total < *b) {
            best = Some((total, shift, per_marker, count));
        }
    }
    let (overall, shift, per_marker, count) = best.ok_or(MocapError::DisjointTime)?;

    // Loop-area ratios at the chosen alignment.
    let mut predicted_loops: [Vec<Vector2<f64>>; 4] = Default::default();
    let mut measured_loops: [Vec<Vector2<f64>>; 4] = Default::default();
    for (t, sample) in predicted.times_s.iter().zip(&predicted.positions_mm) {
        if let Some(meas) = interpolate(measured, t + shift) {
            for m in 0..4 {
                predicted_loops[m].push(sample[m]);
                measured_loops[m].push(meas[m]);
            }
        }
    }
    let mut markers = BTreeMap::new();
    for m in 0..4 {
        let rms = (per_marker[m] / count as f64).sqrt();
        let pa = loop_area(&predicted_loops[m]);
        let ma = loop_area(&measured_loops[m]);
        let area_ratio = if pa.abs() > 1e-9 { Some(ma.abs() / pa.abs()) } else { None };
        markers.insert(
            format!("marker{}", m + 1),
            MarkerReport { rms_mm: rms, shift_s: shift, area_ratio },
        );
    }
    Ok(CompareReport {
        shift_s: shift,
        overall_rms_mm: overall,
        samples_compared: count,
        markers,
    })
}
