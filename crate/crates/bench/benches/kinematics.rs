use std::hint::black_box;

use cc_ik_bench::{sample_state, sample_target};
use cc_ik_core::cc_model::{jacobian_augmented, jacobian_standard, jacobian_vvl};
use cc_ik_core::demo::{demo_options, run_case, DemoCase};
use cc_ik_core::solvers::{step_dls, step_jacobian, step_vvl};
use cc_ik_core::{forward_kinematics, SolverOptions};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const SEGMENTS: [usize; 3] = [2, 4, 7];

fn kinematics(c: &mut Criterion) {
    let mut g = c.benchmark_group("kinematics");
    for n in SEGMENTS {
        let state = sample_state(n);
        g.bench_with_input(BenchmarkId::new("forward", n), &state, |b, s| b.iter(|| forward_kinematics(black_box(s))));
        g.bench_with_input(BenchmarkId::new("jacobian_standard", n), &state, |b, s| {
            b.iter(|| jacobian_standard(black_box(s)))
        });
        g.bench_with_input(BenchmarkId::new("jacobian_vvl", n), &state, |b, s| b.iter(|| jacobian_vvl(black_box(s))));
        g.bench_with_input(BenchmarkId::new("jacobian_augmented", n), &state, |b, s| {
            b.iter(|| jacobian_augmented(black_box(s)))
        });
    }
    g.finish();
}

fn solver_steps(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    let opts = SolverOptions::default();
    for n in SEGMENTS {
        let (state, target) = (sample_state(n), sample_target(n));
        g.bench_function(BenchmarkId::new("jacobian", n), |b| {
            b.iter(|| step_jacobian(black_box(&state), &target, &opts).unwrap())
        });
        g.bench_function(BenchmarkId::new("dls", n), |b| {
            b.iter(|| step_dls(black_box(&state), &target, &opts).unwrap())
        });
        g.bench_function(BenchmarkId::new("vvl", n), |b| {
            b.iter(|| step_vvl(black_box(&state), &target, &opts).unwrap())
        });
    }
    g.finish();
}

fn demo_solve(c: &mut Criterion) {
    let opts = SolverOptions { record_trajectory: false, ..demo_options() };
    c.bench_function("demo/rest_jacobian", |b| b.iter(|| run_case(DemoCase::RestJacobian, black_box(&opts)).unwrap()));
}

criterion_group!(benches, kinematics, solver_steps, demo_solve);
criterion_main!(benches);
