//! Iterative inverse kinematics.
//!
//! All three methods share the spatial error twist `V_D = log(T_D T_e⁻¹)`:
//!
//! * `Jacobian`: `Δx = β J⁺ V_D` over `(κᵢ, φᵢ)`.
//! * `Dls`: `Δx = β Jᵀ (J Jᵀ + λ² I)⁻¹ V_D`.
//! * `Vvl`: lengths become free variables and the augmented system
//!   `Δx = β J_a⁺ [V_D; L − l]` pulls them back to their nominal values while
//!   the pose converges.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cc_model::{
    forward_kinematics, jacobian_augmented_from, jacobian_standard_from, transported_partials, ColumnLabel,
    ManipulatorState, ModelError, Parameter, SegmentState, TransportedPartials,
};
use crate::liegroup::{log_se3, pseudo_inverse, LieError, Pose, Twist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Jacobian,
    Dls,
    Vvl,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Jacobian, Method::Dls, Method::Vvl];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Jacobian => "JACOBIAN",
            Method::Dls => "DLS",
            Method::Vvl => "VVL",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "JACOBIAN" | "J" => Ok(Method::Jacobian),
            "DLS" | "D" => Ok(Method::Dls),
            "VVL" | "V" => Ok(Method::Vvl),
            other => Err(format!("unknown method '{other}' (expected JACOBIAN, DLS or VVL)")),
        }
    }
}

/// Why a solve did not converge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailCause {
    #[serde(rename = "max-iter")]
    MaxIter,
    #[serde(rename = "deadlock-flagged")]
    Deadlock,
    #[serde(rename = "log-branch")]
    LogBranch,
}

impl FailCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            FailCause::MaxIter => "max-iter",
            FailCause::Deadlock => "deadlock-flagged",
            FailCause::LogBranch => "log-branch",
        }
    }
}

impl fmt::Display for FailCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("error twist unavailable: {0}")]
    LogBranch(#[from] LieError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: Method,
    /// Step factor β.
    pub beta: f64,
    /// DLS damping λ.
    pub lambda: f64,
    /// Convergence tolerance on the composite error.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting length of each segment, as a fraction of its nominal length.
    pub vvl_initial_length_factor: f64,
    pub record_trajectory: bool,
    /// Virtual lengths are clamped to at least this fraction of nominal.
    pub length_floor_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::Jacobian,
            beta: 0.5,
            lambda: 0.01,
            tol: 1e-4,
            max_iter: 500,
            vvl_initial_length_factor: 1.0 / 3.0,
            record_trajectory: false,
            length_floor_fraction: 0.05,
        }
    }
}

impl SolverOptions {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidOptions(msg));
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1".into());
        }
        if self.method == Method::Vvl {
            let f = self.vvl_initial_length_factor;
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("vvl_initial_length_factor must lie in (0, 1], got {f}"));
            }
            let floor = self.length_floor_fraction;
            if !(floor > 0.0 && floor < 1.0) {
                return bad(format!("length_floor_fraction must lie in (0, 1), got {floor}"));
            }
        }
        Ok(())
    }
}

/// Labelled parameter update produced by one solver step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDelta {
    pub values: DVector<f64>,
    pub labels: Vec<ColumnLabel>,
}

impl ParameterDelta {
    pub fn norm(&self) -> f64 {
        self.values.norm()
    }

    pub fn get(&self, segment: usize, parameter: Parameter) -> Option<f64> {
        self.labels.iter().position(|l| l.segment == segment && l.parameter == parameter).map(|j| self.values[j])
    }

    /// Adds the update to `state`. Lengths are kept at or above
    /// `length_floor · nominal`.
    pub fn apply(&self, state: &ManipulatorState, length_floor: f64) -> ManipulatorState {
        let mut next = state.clone();
        let segments = next.segments_mut();
        for (label, &dx) in self.labels.iter().zip(self.values.iter()) {
            let seg = &mut segments[label.segment];
            match label.parameter {
                Parameter::Kappa => seg.kappa += dx,
                Parameter::Phi => seg.phi += dx,
                Parameter::Length => seg.length = (seg.length + dx).max(length_floor * seg.nominal_length),
            }
        }
        next
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub state: ManipulatorState,
    /// Composite pose error of `state` as it stands (virtual lengths included).
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub converged: bool,
    /// Number of updates applied.
    pub iterations: usize,
    /// Composite error of `final_state` against the target.
    pub final_error: f64,
    /// Final configuration; for VVL always at nominal lengths.
    pub final_state: ManipulatorState,
    /// Segments that reached `|κ l| ≥ 2π` at any point of the run.
    pub deadlock_flags: Vec<bool>,
    pub fail_cause: Option<FailCause>,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

impl SolveResult {
    pub fn deadlock_any(&self) -> bool {
        self.deadlock_flags.iter().any(|&f| f)
    }
}

/// Spatial error twist `log(target · current⁻¹)`.
pub fn pose_error_twist(current: &Pose, target: &Pose) -> Result<Twist, LieError> {
    log_se3(&(target * &current.inverse()))
}

/// Composite pose error: the Euclidean norm of the error twist.
pub fn error_norm(error: &Twist) -> f64 {
    error.norm()
}

fn check_target(state: &ManipulatorState, target: &Pose) -> Result<Twist, SolverError> {
    Ok(pose_error_twist(&forward_kinematics(state), target)?)
}

fn twist_column(t: &Twist) -> DVector<f64> {
    DVector::from_column_slice(&t.components())
}

fn jacobian_update(partials: &TransportedPartials, error: &Twist, beta: f64) -> ParameterDelta {
    let j = jacobian_standard_from(partials);
    let values = pseudo_inverse(&j.matrix) * twist_column(error) * beta;
    ParameterDelta { values, labels: j.columns }
}

fn dls_update(partials: &TransportedPartials, error: &Twist, beta: f64, lambda: f64) -> ParameterDelta {
    let j = jacobian_standard_from(partials);
    let jt = j.matrix.transpose();
    let damped = &j.matrix * &jt + DMatrix::identity(6, 6) * (lambda * lambda);
    let rhs = twist_column(error);
    let y = match damped.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => pseudo_inverse(&damped) * rhs,
    };
    ParameterDelta { values: jt * y * beta, labels: j.columns }
}

fn vvl_update(partials: &TransportedPartials, state: &ManipulatorState, error: &Twist, beta: f64) -> ParameterDelta {
    let j = jacobian_augmented_from(partials);
    let n = state.len();
    let mut residual = DVector::zeros(6 + n);
    residual.rows_mut(0, 6).copy_from(&twist_column(error));
    for (i, seg) in state.segments().iter().enumerate() {
        residual[6 + i] = seg.nominal_length - seg.length;
    }
    ParameterDelta { values: pseudo_inverse(&j.matrix) * residual * beta, labels: j.columns }
}

/// `β J⁺ V_D` over the interleaved `(κ₁, φ₁, …)` parameters.
pub fn step_jacobian(
    state: &ManipulatorState,
    target: &Pose,
    opts: &SolverOptions,
) -> Result<ParameterDelta, SolverError> {
    let error = check_target(state, target)?;
    Ok(jacobian_update(&transported_partials(state), &error, opts.beta))
}

/// `β Jᵀ (J Jᵀ + λ² I)⁻¹ V_D`.
pub fn step_dls(state: &ManipulatorState, target: &Pose, opts: &SolverOptions) -> Result<ParameterDelta, SolverError> {
    let error = check_target(state, target)?;
    Ok(dls_update(&transported_partials(state), &error, opts.beta, opts.lambda))
}

/// `β J_a⁺ [V_D; L − l]` over the grouped `(κ… | φ… | l…)` parameters.
pub fn step_vvl(state: &ManipulatorState, target: &Pose, opts: &SolverOptions) -> Result<ParameterDelta, SolverError> {
    let error = check_target(state, target)?;
    Ok(vvl_update(&transported_partials(state), state, &error, opts.beta))
}

/// Flags segments whose bending angle has reached a full turn.
pub fn detect_deadlock(state: &ManipulatorState) -> Vec<bool> {
    state.segments().iter().map(|s| s.bending_angle().abs() >= TAU).collect()
}

/// Straight rest configuration. VVL starts from shortened virtual lengths.
pub fn make_initial_guess(
    n: usize,
    nominal_lengths: &[f64],
    opts: &SolverOptions,
) -> Result<ManipulatorState, SolverError> {
    if nominal_lengths.len() != n {
        return Err(SolverError::InvalidOptions(format!(
            "expected {n} nominal lengths, got {}",
            nominal_lengths.len()
        )));
    }
    let factor = match opts.method {
        Method::Vvl => opts.vvl_initial_length_factor,
        _ => 1.0,
    };
    let segments = nominal_lengths.iter().map(|&len| SegmentState::new(0.0, 0.0, len * factor, len)).collect();
    Ok(ManipulatorState::new(segments)?)
}

fn length_residual_sq(state: &ManipulatorState) -> f64 {
    state.segments().iter().map(|s| (s.nominal_length - s.length).powi(2)).sum()
}

/// Runs the chosen method from `initial` until the error drops to `tol` or
/// `max_iter` updates have been applied.
///
/// For VVL the loop stops once `‖[V_D; L − l]‖ ≤ tol` and the configuration
/// snapped to nominal lengths also meets `tol`.
pub fn solve(initial: &ManipulatorState, target: &Pose, opts: &SolverOptions) -> Result<SolveResult, SolverError> {
    opts.validate()?;
    let vvl = opts.method == Method::Vvl;
    let mut state = initial.clone();
    let mut deadlock_flags = vec![false; state.len()];
    let mut trajectory = opts.record_trajectory.then(Vec::new);

    let finish = |converged: bool,
                  iterations: usize,
                  state: ManipulatorState,
                  raw_error: f64,
                  deadlock_flags: Vec<bool>,
                  fail_cause: Option<FailCause>,
                  trajectory: Option<Vec<TrajectoryPoint>>| {
        let (final_state, final_error) = if vvl {
            let snapped = state.at_nominal_lengths();
            let e = check_target(&snapped, target).map(|t| error_norm(&t)).unwrap_or(f64::NAN);
            (snapped, e)
        } else {
            (state, raw_error)
        };
        SolveResult { converged, iterations, final_error, final_state, deadlock_flags, fail_cause, trajectory }
    };

    for iteration in 0..=opts.max_iter {
        for (flag, hit) in deadlock_flags.iter_mut().zip(detect_deadlock(&state)) {
            *flag |= hit;
        }
        let partials = transported_partials(&state);
        let error = match pose_error_twist(&partials.tip, target) {
            Ok(e) => e,
            Err(_) => {
                return Ok(finish(
                    false,
                    iteration,
                    state,
                    f64::NAN,
                    deadlock_flags,
                    Some(FailCause::LogBranch),
                    trajectory,
                ))
            }
        };
        let e_v = error_norm(&error);
        if let Some(points) = trajectory.as_mut() {
            points.push(TrajectoryPoint { iteration, state: state.clone(), error: e_v });
        }

        let done = if vvl {
            let metric = (e_v * e_v + length_residual_sq(&state)).sqrt();
            metric <= opts.tol
                && check_target(&state.at_nominal_lengths(), target)
                    .map(|t| error_norm(&t) <= opts.tol)
                    .unwrap_or(false)
        } else {
            e_v <= opts.tol
        };
        if done {
            return Ok(finish(true, iteration, state, e_v, deadlock_flags, None, trajectory));
        }
        if iteration == opts.max_iter {
            let cause = if deadlock_flags.iter().any(|&f| f) { FailCause::Deadlock } else { FailCause::MaxIter };
            return Ok(finish(false, iteration, state, e_v, deadlock_flags, Some(cause), trajectory));
        }

        let delta = match opts.method {
            Method::Jacobian => jacobian_update(&partials, &error, opts.beta),
            Method::Dls => dls_update(&partials, &error, opts.beta, opts.lambda),
            Method::Vvl => vvl_update(&partials, &state, &error, opts.beta),
        };
        state = delta.apply(&state, opts.length_floor_fraction);
    }
    unreachable!("loop returns on its final iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::exp_se3;
    use nalgebra::Vector3;
    use std::f64::consts::PI;

    #[test]
    fn zero_error_at_target() {
        let pose = exp_se3(&Twist::from_components([0.1, 0.2, 0.3, 1.0, 2.0, 3.0]));
        assert!(pose_error_twist(&pose, &pose).unwrap().norm() < 1e-14);
        let target = Pose::from_translation(Vector3::new(0.0, 0.0, 0.3));
        let e = pose_error_twist(&Pose::identity(), &target).unwrap();
        assert_eq!(e.components(), [0.0, 0.0, 0.0, 0.0, 0.0, 0.3]);
        assert_eq!(error_norm(&Twist::zero()), 0.0);
        assert_eq!(error_norm(&e), 0.3);
    }

    #[test]
    fn deadlock_threshold() {
        let flags = |k: f64| detect_deadlock(&ManipulatorState::from_curvatures(&[k], &[0.0], &[1.0]).unwrap())[0];
        assert!(!flags(PI));
        assert!(flags(2.1 * PI));
        assert!(flags(-7.0));
        assert!(!flags(-6.0));
    }

    #[test]
    fn initial_guesses() {
        let jac = make_initial_guess(4, &[1.0; 4], &SolverOptions::default()).unwrap();
        for s in jac.segments() {
            assert_eq!((s.kappa, s.phi, s.length, s.nominal_length), (0.0, 0.0, 1.0, 1.0));
        }
        let vvl = make_initial_guess(4, &[1.0; 4], &SolverOptions::with_method(Method::Vvl)).unwrap();
        for s in vvl.segments() {
            assert_eq!((s.kappa, s.phi, s.length, s.nominal_length), (0.0, 0.0, 1.0 / 3.0, 1.0));
        }
        let tip = forward_kinematics(&jac.at_nominal_lengths());
        assert_eq!(tip.translation, Vector3::new(0.0, 0.0, 4.0));
        assert!(make_initial_guess(3, &[1.0; 4], &SolverOptions::default()).is_err());
    }

    #[test]
    fn options_validation() {
        let ok = SolverOptions::default();
        assert!(ok.validate().is_ok());
        for bad in [
            SolverOptions { beta: 0.0, ..ok },
            SolverOptions { tol: 0.0, ..ok },
            SolverOptions { max_iter: 0, ..ok },
            SolverOptions { lambda: -1.0, ..ok },
            SolverOptions { method: Method::Vvl, vvl_initial_length_factor: 0.0, ..ok },
            SolverOptions { method: Method::Vvl, vvl_initial_length_factor: 1.5, ..ok },
            SolverOptions { method: Method::Vvl, length_floor_fraction: 1.0, ..ok },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn steps_vanish_at_target() {
        let state = ManipulatorState::from_curvatures(&[1.0, -0.5], &[0.3, 2.0], &[1.0, 1.0]).unwrap();
        let target = forward_kinematics(&state);
        for method in Method::ALL {
            let opts = SolverOptions::with_method(method);
            let delta = match method {
                Method::Jacobian => step_jacobian(&state, &target, &opts),
                Method::Dls => step_dls(&state, &target, &opts),
                Method::Vvl => step_vvl(&state, &target, &opts),
            }
            .unwrap();
            assert!(delta.norm() < 1e-12, "{method}: {}", delta.norm());
        }
    }

    #[test]
    fn length_floor_clamps() {
        let state = ManipulatorState::new(vec![SegmentState::new(0.0, 0.0, 0.2, 1.0)]).unwrap();
        let delta = ParameterDelta {
            values: DVector::from_vec(vec![-1.0]),
            labels: vec![ColumnLabel { segment: 0, parameter: Parameter::Length }],
        };
        assert_eq!(delta.apply(&state, 0.05).segments()[0].length, 0.05);
    }

    #[test]
    fn method_round_trips_through_strings() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("newton".parse::<Method>().is_err());
    }
}
