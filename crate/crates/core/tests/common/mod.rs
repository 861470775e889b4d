#![allow(dead_code)]

use cc_ik_core::{ManipulatorState, Pose, SegmentState, Twist};
use nalgebra::{Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn hat(t: &Twist) -> Matrix4<f64> {
    let (w, v) = (t.omega, t.v);
    Matrix4::new(
        0.0, -w.z, w.y, v.x, //
        w.z, 0.0, -w.x, v.y, //
        -w.y, w.x, 0.0, v.z, //
        0.0, 0.0, 0.0, 0.0,
    )
}

pub fn vee(m: &Matrix4<f64>) -> Twist {
    Twist::new(Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]), Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]))
}

/// Dense matrix exponential by scaling and squaring with a 30-term Taylor sum.
pub fn expm(a: &Matrix4<f64>) -> Matrix4<f64> {
    let norm = a.abs().max();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(s);
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for k in 1..30 {
        term = term * scaled / k as f64;
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

/// Forward kinematics straight from the segment twist definition.
pub fn fk_oracle(state: &ManipulatorState) -> Matrix4<f64> {
    state.segments().iter().fold(Matrix4::identity(), |acc, s| {
        let omega = Vector3::new(-s.phi.sin(), s.phi.cos(), 0.0) * s.kappa * s.length;
        let v = Vector3::new(0.0, 0.0, s.length);
        acc * expm(&hat(&Twist::new(omega, v)))
    })
}

pub fn pose_matrix_distance(p: &Pose, m: &Matrix4<f64>) -> f64 {
    (p.to_homogeneous() - m).abs().max()
}

pub fn random_state<R: Rng>(rng: &mut R, n: usize) -> ManipulatorState {
    let segments = (0..n)
        .map(|_| {
            let nominal = rng.random_range(0.5..1.5);
            let length = nominal * rng.random_range(0.3..1.2);
            let theta = rng.random_range(-3.0..3.0);
            SegmentState::new(theta / length, rng.random_range(0.0..std::f64::consts::TAU), length, nominal)
        })
        .collect();
    ManipulatorState::new(segments).unwrap()
}

pub fn random_twist<R: Rng>(rng: &mut R, max_angle: f64) -> Twist {
    let dir = loop {
        let d = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = d.norm();
        if n > 1e-3 && n <= 1.0 {
            break d / n;
        }
    };
    let omega = dir * rng.random_range(0.0..max_angle);
    let v = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    Twist::new(omega, v)
}

pub fn random_pose<R: Rng>(rng: &mut R) -> Pose {
    cc_ik_core::liegroup::exp_se3(&random_twist(rng, 3.0))
}
