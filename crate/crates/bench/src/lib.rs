//! Shared inputs for the criterion benchmarks.

use cc_ik_core::{forward_kinematics, ManipulatorState, Pose, SegmentState};

/// Deterministic `n`-segment configuration with moderate bending.
pub fn sample_state(n: usize) -> ManipulatorState {
    bent(n, 0.4, 0.2)
}

/// A nearby pose for timing single solver steps from [`sample_state`].
pub fn sample_target(n: usize) -> Pose {
    forward_kinematics(&bent(n, 0.55, 0.5))
}

fn bent(n: usize, kappa0: f64, phi0: f64) -> ManipulatorState {
    let segments = (0..n)
        .map(|i| {
            let i = i as f64;
            SegmentState::nominal(kappa0 + 0.3 * i, 0.7 * i + phi0, 1.0)
        })
        .collect();
    ManipulatorState::new(segments).expect("valid fixture")
}
