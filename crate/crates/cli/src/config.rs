//! TOML configuration files and their merge with command-line flags.
//!
//! ```toml
//! [solver]
//! method = "VVL"
//! beta = 0.5
//! tol = 1e-8
//!
//! [target]
//! kappa = [1.57, 1.05]
//! phi = [0.63, 0.79]
//!
//! [bench]
//! segments = [2, 3, 4]
//! trials = 200
//! ```

use std::path::Path;

use cc_ik_core::benchmark::BenchmarkSpec;
use cc_ik_core::{ManipulatorState, Method, Pose, SolverOptions};
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::Deserialize;

use crate::args::{GridFlags, SolverFlags};
use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub solver: SolverSection,
    pub target: Option<TargetSection>,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub workspace: WorkspaceSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub method: Option<Method>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub vvl_factor: Option<f64>,
    pub length_floor_fraction: Option<f64>,
    pub trajectory: Option<bool>,
}

/// Either a configuration (`kappa`, `phi`, optional `length`) or a pose
/// (`quaternion` as w, x, y, z plus `translation`).
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub kappa: Option<Vec<f64>>,
    pub phi: Option<Vec<f64>>,
    pub length: Option<Vec<f64>>,
    pub quaternion: Option<[f64; 4]>,
    pub translation: Option<[f64; 3]>,
    /// Nominal segment lengths; defaults to 1 per segment.
    pub nominal_lengths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub methods: Option<Vec<Method>>,
    pub segments: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub iter_limits: Option<Vec<usize>>,
    pub tolerances: Option<Vec<f64>>,
    pub theta_max: Option<f64>,
    pub seed: Option<u64>,
    pub full_grid: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceSection {
    pub samples: Option<usize>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::bad(format!("invalid config: {e}")))
}

pub fn load_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound | std::io::ErrorKind::InvalidData => {
            CliError::bad(format!("{}: {e}", path.display()))
        }
        _ => CliError::io(path, e),
    })?;
    parse_config(&text).map_err(|e| CliError::bad(format!("{}: {e}", path.display())))
}

/// Default options, then the `[solver]` table, then flags.
pub fn solver_options(section: &SolverSection, flags: &SolverFlags, base: SolverOptions) -> SolverOptions {
    let mut o = base;
    let s = section;
    if let Some(m) = s.method {
        o.method = m;
    }
    o.beta = flags.beta.or(s.beta).unwrap_or(o.beta);
    o.lambda = flags.lambda.or(s.lambda).unwrap_or(o.lambda);
    o.tol = s.tol.unwrap_or(o.tol);
    o.max_iter = s.max_iter.unwrap_or(o.max_iter);
    o.vvl_initial_length_factor = flags.vvl_factor.or(s.vvl_factor).unwrap_or(o.vvl_initial_length_factor);
    o.length_floor_fraction = s.length_floor_fraction.unwrap_or(o.length_floor_fraction);
    o.record_trajectory = s.trajectory.unwrap_or(o.record_trajectory);
    o
}

pub fn validate_options(opts: &SolverOptions) -> Result<(), CliError> {
    // Validate the VVL-specific fields too, whatever the method.
    let probe = SolverOptions { method: Method::Vvl, ..*opts };
    probe.validate().map_err(|e| CliError::bad(e.to_string()))
}

/// A non-empty flag list wins over the file's list.
fn pick<T: Clone>(flag: &[T], file: &Option<Vec<T>>) -> Option<Vec<T>> {
    if flag.is_empty() {
        file.clone()
    } else {
        Some(flag.to_vec())
    }
}

pub fn benchmark_spec(
    config: &ConfigFile,
    grid: &GridFlags,
    solver: &SolverFlags,
    full_grid: bool,
) -> Result<BenchmarkSpec, CliError> {
    let b = &config.bench;
    let mut spec =
        if full_grid || b.full_grid.unwrap_or(false) { BenchmarkSpec::default() } else { BenchmarkSpec::desk_scale() };
    if let Some(v) = pick(&grid.methods, &b.methods) {
        spec.methods = v;
    }
    if let Some(v) = pick(&grid.segments, &b.segments) {
        spec.segment_counts = v;
    }
    if let Some(v) = pick(&grid.max_iter, &b.iter_limits) {
        spec.iteration_limits = v;
    }
    if let Some(v) = pick(&grid.tol, &b.tolerances) {
        spec.tolerances = v;
    }
    spec.trials_per_config = grid.trials.or(b.trials).unwrap_or(spec.trials_per_config);
    spec.theta_max = grid.theta_max.or(b.theta_max).unwrap_or(spec.theta_max);
    spec.master_seed = grid.seed.or(b.seed).unwrap_or(spec.master_seed);
    spec.solver = solver_options(&config.solver, solver, spec.solver);
    spec.validate().map_err(|e| CliError::bad(e.to_string()))?;
    Ok(spec)
}

/// Resolved target of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub pose: Pose,
    pub nominal_lengths: Vec<f64>,
    /// Present when the target was given as a configuration.
    pub configuration: Option<ManipulatorState>,
}

fn pose_from_parts(q: [f64; 4], t: [f64; 3]) -> Result<Pose, CliError> {
    let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
    let norm = quat.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
        return Err(CliError::bad(format!("target quaternion must have unit norm (got {norm})")));
    }
    if t.iter().any(|x| !x.is_finite()) {
        return Err(CliError::bad("target translation must be finite"));
    }
    let rotation = UnitQuaternion::from_quaternion(quat).to_rotation_matrix().into_inner();
    Ok(Pose::new(rotation, Vector3::from(t)))
}

pub fn resolve_target(section: &TargetSection, segments: Option<usize>) -> Result<Target, CliError> {
    let by_config = section.kappa.is_some() || section.phi.is_some() || section.length.is_some();
    let by_pose = section.quaternion.is_some() || section.translation.is_some();
    match (by_config, by_pose) {
        (true, true) => Err(CliError::bad("target must be either a configuration or a pose, not both")),
        (false, false) => Err(CliError::bad("target needs kappa/phi or quaternion/translation")),
        (true, false) => {
            let (Some(kappa), Some(phi)) = (&section.kappa, &section.phi) else {
                return Err(CliError::bad("configuration target needs both kappa and phi"));
            };
            let n = kappa.len();
            if n == 0 || phi.len() != n {
                return Err(CliError::bad("kappa and phi must be non-empty and of equal length"));
            }
            if segments.is_some_and(|s| s != n) {
                return Err(CliError::bad("--segments disagrees with the target configuration"));
            }
            let nominal = section
                .nominal_lengths
                .clone()
                .unwrap_or_else(|| section.length.clone().unwrap_or_else(|| vec![1.0; n]));
            let length = section.length.clone().unwrap_or_else(|| nominal.clone());
            if nominal.len() != n || length.len() != n {
                return Err(CliError::bad("length lists must match the number of segments"));
            }
            let segs = (0..n).map(|i| cc_ik_core::SegmentState::new(kappa[i], phi[i], length[i], nominal[i])).collect();
            let state = ManipulatorState::new(segs).map_err(|e| CliError::bad(e.to_string()))?;
            Ok(Target {
                pose: cc_ik_core::forward_kinematics(&state),
                nominal_lengths: nominal,
                configuration: Some(state),
            })
        }
        (false, true) => {
            let (Some(q), Some(t)) = (section.quaternion, section.translation) else {
                return Err(CliError::bad("pose target needs both quaternion and translation"));
            };
            let nominal = match (&section.nominal_lengths, segments) {
                (Some(l), Some(s)) if l.len() != s => {
                    return Err(CliError::bad("--segments disagrees with nominal_lengths"))
                }
                (Some(l), _) => l.clone(),
                (None, Some(s)) => vec![1.0; s],
                (None, None) => return Err(CliError::bad("pose target needs nominal_lengths or --segments")),
            };
            if nominal.is_empty() || nominal.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                return Err(CliError::bad("nominal lengths must be positive"));
            }
            Ok(Target { pose: pose_from_parts(q, t)?, nominal_lengths: nominal, configuration: None })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let cfg = parse_config("[solver]\nbeta = 0.3\nlambda = 0.2\nmethod = \"DLS\"\n").unwrap();
        let flags = SolverFlags { beta: Some(0.7), ..SolverFlags::default() };
        let o = solver_options(&cfg.solver, &flags, SolverOptions::default());
        assert_eq!(o.beta, 0.7);
        assert_eq!(o.lambda, 0.2);
        assert_eq!(o.method, Method::Dls);
        assert_eq!(o.tol, SolverOptions::default().tol);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config("[solver]\nbta = 0.3\n").is_err());
        assert!(parse_config("[solver]\nmethod = \"NEWTON\"\n").is_err());
    }

    #[test]
    fn default_bench_is_desk_scale() {
        let spec =
            benchmark_spec(&ConfigFile::default(), &GridFlags::default(), &SolverFlags::default(), false).unwrap();
        assert_eq!(spec, BenchmarkSpec::desk_scale());
    }

    #[test]
    fn pose_target_needs_a_segment_count() {
        let t = TargetSection {
            quaternion: Some([1.0, 0.0, 0.0, 0.0]),
            translation: Some([0.0, 0.0, 2.0]),
            ..TargetSection::default()
        };
        assert!(resolve_target(&t, None).is_err());
        let r = resolve_target(&t, Some(2)).unwrap();
        assert_eq!(r.nominal_lengths, vec![1.0, 1.0]);
    }

    #[test]
    fn quaternion_must_be_unit() {
        let t = TargetSection {
            quaternion: Some([2.0, 0.0, 0.0, 0.0]),
            translation: Some([0.0, 0.0, 2.0]),
            ..TargetSection::default()
        };
        assert!(matches!(resolve_target(&t, Some(2)), Err(CliError::BadInput(_))));
    }
}
