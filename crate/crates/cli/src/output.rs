//! On-disk data products. Field names and CSV column order are part of the
//! interface with the plotting scripts.

use std::fs;
use std::io::Write;
use std::path::Path;

use cc_ik_core::benchmark::{BenchmarkSummary, TrialRecord};
use cc_ik_core::cc_model::centerline;
use cc_ik_core::solvers::TrajectoryPoint;
use cc_ik_core::{FailCause, ManipulatorState, Method, Pose, SegmentState, SolveResult, SolverOptions};
use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const TRIALS_HEADER: [&str; 15] = [
    "trial_id",
    "method",
    "n_segments",
    "iter_limit",
    "tolerance",
    "seed",
    "converged",
    "iterations",
    "final_error",
    "deadlock_any",
    "fail_cause",
    "target_x",
    "target_y",
    "target_z",
    "wall_time_us",
];

pub const WORKSPACE_HEADER: [&str; 6] = ["label", "method", "n_segments", "x", "y", "z"];

/// Centerline samples per segment in trajectory files.
pub const CENTERLINE_SAMPLES: usize = 21;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        write(&mut buf).map_err(|e| CliError::io(path, e))?;
        buf.flush().map_err(|e| CliError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseJson {
    /// Unit quaternion (w, x, y, z) with w ≥ 0.
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
}

impl From<&Pose> for PoseJson {
    fn from(p: &Pose) -> Self {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix(&p.rotation));
        let sign = if q.w < 0.0 { -1.0 } else { 1.0 };
        Self { quaternion: [q.w * sign, q.i * sign, q.j * sign, q.k * sign], translation: p.translation.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentJson {
    pub kappa: f64,
    pub phi: f64,
    pub l: f64,
    #[serde(rename = "L")]
    pub nominal: f64,
}

impl From<&SegmentState> for SegmentJson {
    fn from(s: &SegmentState) -> Self {
        Self { kappa: s.kappa, phi: s.phi, l: s.length, nominal: s.nominal_length }
    }
}

impl SegmentJson {
    pub fn to_segment(self) -> SegmentState {
        SegmentState::new(self.kappa, self.phi, self.l, self.nominal)
    }
}

pub fn configuration_json(state: &ManipulatorState) -> Vec<SegmentJson> {
    state.segments().iter().map(SegmentJson::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionsJson {
    pub method: Method,
    pub beta: f64,
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub vvl_initial_length_factor: f64,
    pub length_floor_fraction: f64,
}

impl From<&SolverOptions> for OptionsJson {
    fn from(o: &SolverOptions) -> Self {
        Self {
            method: o.method,
            beta: o.beta,
            lambda: o.lambda,
            tol: o.tol,
            max_iter: o.max_iter,
            vvl_initial_length_factor: o.vvl_initial_length_factor,
            length_floor_fraction: o.length_floor_fraction,
        }
    }
}

/// `result.json`. A non-finite final error is written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultJson {
    pub converged: bool,
    pub iterations: usize,
    pub final_error: Option<f64>,
    pub fail_cause: Option<FailCause>,
    pub deadlock_flags: Vec<bool>,
    pub deadlock_any: bool,
    pub final_configuration: Vec<SegmentJson>,
    pub final_pose: PoseJson,
    pub initial_configuration: Vec<SegmentJson>,
    pub target_pose: PoseJson,
    pub options: OptionsJson,
}

impl ResultJson {
    pub fn new(result: &SolveResult, initial: &ManipulatorState, target: &Pose, opts: &SolverOptions) -> Self {
        Self {
            converged: result.converged,
            iterations: result.iterations,
            final_error: result.final_error.is_finite().then_some(result.final_error),
            fail_cause: result.fail_cause,
            deadlock_flags: result.deadlock_flags.clone(),
            deadlock_any: result.deadlock_any(),
            final_configuration: configuration_json(&result.final_state),
            final_pose: PoseJson::from(&cc_ik_core::forward_kinematics(&result.final_state)),
            initial_configuration: configuration_json(initial),
            target_pose: PoseJson::from(target),
            options: OptionsJson::from(opts),
        }
    }

    pub fn final_state(&self) -> Result<ManipulatorState, CliError> {
        let segs = self.final_configuration.iter().map(|s| s.to_segment()).collect();
        ManipulatorState::new(segs).map_err(|e| CliError::bad(e.to_string()))
    }
}

pub fn read_result(path: &Path) -> Result<ResultJson, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::bad(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPointJson {
    pub iteration: usize,
    pub error: Option<f64>,
    pub configuration: Vec<SegmentJson>,
    pub centerline: Vec<[f64; 3]>,
}

/// `trajectory.json`: one entry per iterate, each with its backbone polyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryJson {
    pub method: Method,
    pub target_pose: PoseJson,
    pub target_centerline: Option<Vec<[f64; 3]>>,
    pub converged: bool,
    pub points: Vec<TrajectoryPointJson>,
}

fn polyline(state: &ManipulatorState) -> Vec<[f64; 3]> {
    centerline(state, CENTERLINE_SAMPLES).into_iter().map(|p: Vector3<f64>| p.into()).collect()
}

impl TrajectoryJson {
    pub fn new(
        method: Method,
        target: &Pose,
        target_configuration: Option<&ManipulatorState>,
        result: &SolveResult,
        points: &[TrajectoryPoint],
    ) -> Self {
        Self {
            method,
            target_pose: PoseJson::from(target),
            target_centerline: target_configuration.map(polyline),
            converged: result.converged,
            points: points
                .iter()
                .map(|p| TrajectoryPointJson {
                    iteration: p.iteration,
                    error: p.error.is_finite().then_some(p.error),
                    configuration: configuration_json(&p.state),
                    centerline: polyline(&p.state),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
struct TrialRow<'a> {
    trial_id: u64,
    method: &'a str,
    n_segments: usize,
    iter_limit: usize,
    tolerance: f64,
    seed: u64,
    converged: bool,
    iterations: usize,
    final_error: f64,
    deadlock_any: bool,
    fail_cause: &'a str,
    target_x: f64,
    target_y: f64,
    target_z: f64,
    wall_time_us: u64,
}

pub fn write_trials_csv(path: &Path, records: &[TrialRecord]) -> Result<(), CliError> {
    write_atomic(path, |w| {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        out.write_record(TRIALS_HEADER)?;
        for r in records {
            out.serialize(TrialRow {
                trial_id: r.trial_id,
                method: r.method.as_str(),
                n_segments: r.n_segments,
                iter_limit: r.iter_limit,
                tolerance: r.tolerance,
                seed: r.seed,
                converged: r.converged,
                iterations: r.iterations,
                final_error: r.final_error,
                deadlock_any: r.deadlock_any,
                fail_cause: r.fail_cause.map(|c| c.as_str()).unwrap_or(""),
                target_x: r.target_tip[0],
                target_y: r.target_tip[1],
                target_z: r.target_tip[2],
                wall_time_us: r.wall_time_us,
            })?;
        }
        out.flush()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryJson {
    pub method: Method,
    pub n_segments: usize,
    pub iter_limit: usize,
    pub tolerance: f64,
    pub trial_count: usize,
    pub success_rate: f64,
    pub mean_iter_converged: Option<f64>,
    pub mean_iter_paired: Option<f64>,
    pub deadlock_rate: f64,
}

pub fn summary_json(summary: &BenchmarkSummary) -> Vec<SummaryJson> {
    summary
        .cells
        .iter()
        .map(|c| SummaryJson {
            method: c.method,
            n_segments: c.n_segments,
            iter_limit: c.iter_limit,
            tolerance: c.tolerance,
            trial_count: c.trial_count,
            success_rate: c.success_rate,
            mean_iter_converged: c.mean_iter_converged,
            mean_iter_paired: c.mean_iter_paired,
            deadlock_rate: c.deadlock_rate,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceRow {
    /// "reachable" for cloud samples, "failed" for failed benchmark targets.
    pub label: String,
    /// Empty for cloud samples.
    pub method: String,
    pub n_segments: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub fn write_workspace_csv(path: &Path, rows: &[WorkspaceRow]) -> Result<(), CliError> {
    write_atomic(path, |w| {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        out.write_record(WORKSPACE_HEADER)?;
        for r in rows {
            out.serialize(r)?;
        }
        out.flush()
    })
}
