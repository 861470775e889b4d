//! Forward and inverse kinematics for multi-segment constant-curvature
//! continuum manipulators.
//!
//! * [`liegroup`]: SE(3) exponential/logarithm, adjoints, screws, pseudo-inverse.
//! * [`cc_model`]: segment twists, product-of-exponentials kinematics and
//!   the standard, variable-length and augmented Jacobians.
//! * [`solvers`]: Jacobian, damped least-squares and virtual-variable-length
//!   iterative solvers.
//! * [`benchmark`]: seeded randomized trials, aggregation and workspace sampling.
//! * [`demo`]: the built-in four-segment comparison scenario.

pub mod benchmark;
pub mod cc_model;
pub mod demo;
pub mod liegroup;
pub mod solvers;

pub use cc_model::{
    forward_kinematics, ColumnLabel, JacobianMatrix, ManipulatorState, ModelError, Parameter, SegmentState,
};
pub use liegroup::{LieError, Pose, ScrewDecomposition, Twist};
pub use solvers::{solve, FailCause, Method, SolveResult, SolverError, SolverOptions};
