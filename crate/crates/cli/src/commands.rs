use std::path::Path;

use cc_ik_core::benchmark::{aggregate, derive_seed, run_suite, sample_workspace, BenchmarkSpec, TrialRecord};
use cc_ik_core::demo::{demo_options, demo_target, demo_target_configuration, run_case, DemoCase};
use cc_ik_core::solvers::make_initial_guess;
use cc_ik_core::{solve, SolverOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::{BenchArgs, DemoArgs, SolveArgs, WorkspaceArgs};
use crate::config::{benchmark_spec, load_config, resolve_target, solver_options, validate_options};
use crate::error::CliError;
use crate::output::{
    summary_json, write_json, write_trials_csv, write_workspace_csv, ResultJson, TrajectoryJson, WorkspaceRow,
};

/// Environment variable capping the benchmark worker count.
pub const THREADS_ENV: &str = "CC_IK_THREADS";

/// Runs `f` on a pool sized by [`THREADS_ENV`], or on rayon's global pool.
fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(f());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::bad(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::bad(format!("cannot build a {threads}-thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let config = load_config(Some(&args.input))?;
    let section = config
        .target
        .as_ref()
        .ok_or_else(|| CliError::bad(format!("{}: missing [target] table", args.input.display())))?;
    let target = resolve_target(section, args.segments)?;

    let mut opts = solver_options(&config.solver, &args.solver, SolverOptions::default());
    opts.method = args.method.unwrap_or(opts.method);
    opts.tol = args.tol.unwrap_or(opts.tol);
    opts.max_iter = args.max_iter.unwrap_or(opts.max_iter);
    opts.record_trajectory |= args.trajectory;
    validate_options(&opts)?;

    let n = target.nominal_lengths.len();
    let initial = make_initial_guess(n, &target.nominal_lengths, &opts).map_err(|e| CliError::bad(e.to_string()))?;
    let result = solve(&initial, &target.pose, &opts).map_err(|e| CliError::bad(e.to_string()))?;

    write_json(&args.out_dir.join("result.json"), &ResultJson::new(&result, &initial, &target.pose, &opts))?;
    if let Some(points) = &result.trajectory {
        let traj = TrajectoryJson::new(opts.method, &target.pose, target.configuration.as_ref(), &result, points);
        write_json(&args.out_dir.join("trajectory.json"), &traj)?;
    }
    println!(
        "{}: converged={} iterations={} final_error={:.3e}{}",
        opts.method,
        result.converged,
        result.iterations,
        result.final_error,
        result.fail_cause.map(|c| format!(" cause={c}")).unwrap_or_default()
    );
    Ok(())
}

pub fn cmd_demo(args: &DemoArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let mut opts = solver_options(&config.solver, &args.solver, demo_options());
    opts.tol = args.tol.unwrap_or(opts.tol);
    opts.max_iter = args.max_iter.unwrap_or(opts.max_iter);
    opts.record_trajectory = true;
    validate_options(&opts)?;

    let target = demo_target();
    let target_config = demo_target_configuration();
    println!("{:<18} {:>9} {:>10} {:>12}  deadlock", "case", "converged", "iterations", "final_error");
    for case in DemoCase::ALL {
        let run = run_case(case, &opts).map_err(|e| CliError::bad(e.to_string()))?;
        let case_opts = SolverOptions { method: case.method(), ..opts };
        let dir = args.out_dir.join(case.name());
        let r = &run.result;
        write_json(&dir.join("result.json"), &ResultJson::new(r, &run.initial, &target, &case_opts))?;
        let points = r.trajectory.as_deref().unwrap_or_default();
        write_json(
            &dir.join("trajectory.json"),
            &TrajectoryJson::new(case.method(), &target, Some(&target_config), r, points),
        )?;
        let flags: String = r.deadlock_flags.iter().map(|&f| if f { 'X' } else { '.' }).collect();
        println!("{:<18} {:>9} {:>10} {:>12.3e}  {}", case.name(), r.converged, r.iterations, r.final_error, flags);
    }
    Ok(())
}

fn print_summary(records: &[TrialRecord]) {
    println!(
        "{:<9} {:>2} {:>5} {:>8} {:>7} {:>8} {:>8} {:>8}",
        "method", "n", "limit", "tol", "success", "iter", "paired", "deadlock"
    );
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into());
    for c in aggregate(records).cells {
        println!(
            "{:<9} {:>2} {:>5} {:>8.0e} {:>7.3} {:>8} {:>8} {:>8.3}",
            c.method.as_str(),
            c.n_segments,
            c.iter_limit,
            c.tolerance,
            c.success_rate,
            fmt(c.mean_iter_converged),
            fmt(c.mean_iter_paired),
            c.deadlock_rate
        );
    }
}

pub fn run_bench(spec: &BenchmarkSpec, out_dir: &Path) -> Result<Vec<TrialRecord>, CliError> {
    let records = with_pool(|| run_suite(spec))?.map_err(|e| CliError::bad(e.to_string()))?;
    write_trials_csv(&out_dir.join("trials.csv"), &records)?;
    write_json(&out_dir.join("summary.json"), &summary_json(&aggregate(&records)))?;
    Ok(records)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let spec = benchmark_spec(&config, &args.grid, &args.solver, args.full_grid)?;
    let records = run_bench(&spec, &args.out_dir)?;
    print_summary(&records);
    Ok(())
}

/// Default number of cloud samples per segment count.
pub const DEFAULT_WORKSPACE_SAMPLES: usize = 1000;

/// Seed stream tag for the reachable cloud, distinct from trial targets.
const CLOUD_STREAM: u64 = 0xC10D;

pub fn workspace_rows(spec: &BenchmarkSpec, samples: usize) -> Result<Vec<WorkspaceRow>, CliError> {
    let mut counts = spec.segment_counts.clone();
    counts.sort_unstable();
    counts.dedup();
    let mut rows = Vec::new();
    for &n in &counts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.master_seed, &[CLOUD_STREAM, n as u64]));
        rows.extend(sample_workspace(&mut rng, n, samples, spec).into_iter().map(|p| WorkspaceRow {
            label: "reachable".into(),
            method: String::new(),
            n_segments: n,
            x: p.tip.x,
            y: p.tip.y,
            z: p.tip.z,
        }));
    }
    let records = with_pool(|| run_suite(spec))?.map_err(|e| CliError::bad(e.to_string()))?;
    rows.extend(records.iter().filter(|r| !r.converged).map(|r| WorkspaceRow {
        label: "failed".into(),
        method: r.method.as_str().into(),
        n_segments: r.n_segments,
        x: r.target_tip[0],
        y: r.target_tip[1],
        z: r.target_tip[2],
    }));
    Ok(rows)
}

pub fn cmd_workspace(args: &WorkspaceArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let spec = benchmark_spec(&config, &args.grid, &args.solver, false)?;
    let samples = args.samples.or(config.workspace.samples).unwrap_or(DEFAULT_WORKSPACE_SAMPLES);
    let rows = workspace_rows(&spec, samples)?;
    write_workspace_csv(&args.out_dir.join("workspace.csv"), &rows)?;
    let failed = rows.iter().filter(|r| r.label == "failed").count();
    println!("{} reachable samples, {failed} failed targets", rows.len() - failed);
    Ok(())
}
