//! Built-in four-segment scenario: one target reached from a rest start,
//! from a start bent away from the target, and by VVL.

use std::f64::consts::PI;

use crate::cc_model::{forward_kinematics, ManipulatorState, SegmentState};
use crate::liegroup::Pose;
use crate::solvers::{make_initial_guess, solve, Method, SolveResult, SolverError, SolverOptions};

pub const DEMO_SEGMENTS: usize = 4;
pub const DEMO_TOLERANCE: f64 = 1e-8;
pub const DEMO_MAX_ITER: usize = 500;

/// Bending angle of every segment in the adverse start.
pub const ADVERSE_BEND: f64 = PI / 4.0;

pub fn demo_target_configuration() -> ManipulatorState {
    let kappa = [PI / 2.0, PI / 3.0, PI / 4.0, PI / 5.0];
    let phi = [PI / 5.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];
    ManipulatorState::from_curvatures(&kappa, &phi, &[1.0; DEMO_SEGMENTS]).expect("demo configuration is valid")
}

pub fn demo_target() -> Pose {
    forward_kinematics(&demo_target_configuration())
}

/// Uniform bend of [`ADVERSE_BEND`] per segment in the plane opposite the
/// target's first bending plane, so the tip starts on the far side of the base.
pub fn adverse_start() -> ManipulatorState {
    let target = demo_target_configuration();
    let phi = target.segments()[0].phi + PI;
    let segments = target
        .segments()
        .iter()
        .map(|s| SegmentState::nominal(ADVERSE_BEND / s.nominal_length, phi, s.nominal_length))
        .collect();
    ManipulatorState::new(segments).expect("adverse start is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoCase {
    RestJacobian,
    AdverseJacobian,
    RestVvl,
}

impl DemoCase {
    pub const ALL: [DemoCase; 3] = [DemoCase::RestJacobian, DemoCase::AdverseJacobian, DemoCase::RestVvl];

    pub fn name(&self) -> &'static str {
        match self {
            DemoCase::RestJacobian => "rest_jacobian",
            DemoCase::AdverseJacobian => "adverse_jacobian",
            DemoCase::RestVvl => "rest_vvl",
        }
    }

    pub fn method(&self) -> Method {
        match self {
            DemoCase::RestVvl => Method::Vvl,
            _ => Method::Jacobian,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoRun {
    pub case: DemoCase,
    pub initial: ManipulatorState,
    pub result: SolveResult,
}

/// Runs one case. `base` supplies β, λ and the VVL length factor; tolerance
/// and iteration limit are fixed by the scenario unless overridden there.
pub fn run_case(case: DemoCase, base: &SolverOptions) -> Result<DemoRun, SolverError> {
    let opts = SolverOptions { method: case.method(), ..*base };
    let initial = match case {
        DemoCase::AdverseJacobian => adverse_start(),
        _ => make_initial_guess(DEMO_SEGMENTS, &[1.0; DEMO_SEGMENTS], &opts)?,
    };
    let result = solve(&initial, &demo_target(), &opts)?;
    Ok(DemoRun { case, initial, result })
}

pub fn demo_options() -> SolverOptions {
    SolverOptions { tol: DEMO_TOLERANCE, max_iter: DEMO_MAX_ITER, record_trajectory: true, ..SolverOptions::default() }
}

/// All three cases with the scenario's default options.
pub fn run_demo() -> Result<Vec<DemoRun>, SolverError> {
    let opts = demo_options();
    DemoCase::ALL.iter().map(|&c| run_case(c, &opts)).collect()
}
