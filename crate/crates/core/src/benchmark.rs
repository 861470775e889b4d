//! Randomized benchmark harness.
//!
//! Targets are drawn in joint space (bending angle `θ ~ U[0, θ_max]` and
//! bending-plane angle `φ ~ U[φ_lo, φ_hi)` per segment), so every target is
//! exactly reachable. A trial's target depends only on
//! `(master_seed, n_segments, trial_index)`, which pairs trials across
//! methods, iteration limits and tolerances.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{PI, TAU};
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cc_model::{forward_kinematics, ManipulatorState, SegmentState};
use crate::liegroup::Pose;
use crate::solvers::{make_initial_guess, solve, FailCause, Method, SolverOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchmarkError {
    #[error("invalid benchmark spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub segment_counts: Vec<usize>,
    pub trials_per_config: usize,
    pub iteration_limits: Vec<usize>,
    pub tolerances: Vec<f64>,
    pub methods: Vec<Method>,
    /// Upper bound of the per-segment bending angle.
    pub theta_max: f64,
    /// Half-open range of the bending-plane angle.
    pub phi_range: (f64, f64),
    pub master_seed: u64,
    pub nominal_length: f64,
    /// Step factor, damping and VVL settings shared by every trial; the
    /// method, tolerance and iteration limit come from the trial's cell.
    pub solver: SolverOptions,
}

impl Default for BenchmarkSpec {
    /// Full grid: 3 methods × n ∈ 2..=7 × 5 limits × 3 tolerances.
    fn default() -> Self {
        Self {
            segment_counts: (2..=7).collect(),
            trials_per_config: 1000,
            iteration_limits: vec![30, 60, 100, 160, 500],
            tolerances: vec![1e-4, 1e-6, 1e-8],
            methods: Method::ALL.to_vec(),
            theta_max: PI,
            phi_range: (0.0, TAU),
            master_seed: 0x5EED_2025,
            nominal_length: 1.0,
            solver: SolverOptions::default(),
        }
    }
}

impl BenchmarkSpec {
    /// Single (limit 500, tol 1e-4) cell per method and segment count.
    pub fn desk_scale() -> Self {
        Self { iteration_limits: vec![500], tolerances: vec![1e-4], ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), BenchmarkError> {
        let bad = |m: &str| Err(BenchmarkError::InvalidSpec(m.to_string()));
        if self.segment_counts.is_empty()
            || self.iteration_limits.is_empty()
            || self.tolerances.is_empty()
            || self.methods.is_empty()
        {
            return bad("segment counts, iteration limits, tolerances and methods must be non-empty");
        }
        if self.trials_per_config == 0 {
            return bad("trials_per_config must be at least 1");
        }
        if self.segment_counts.iter().any(|&n| n == 0 || n > crate::cc_model::DEFAULT_MAX_SEGMENTS) {
            return bad("segment counts must lie in 1..=16");
        }
        if self.iteration_limits.contains(&0) {
            return bad("iteration limits must be at least 1");
        }
        if self.tolerances.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
            return bad("tolerances must be positive");
        }
        if !(self.theta_max >= 0.0 && self.theta_max <= TAU) {
            return bad("theta_max must lie in [0, 2π]");
        }
        let (lo, hi) = self.phi_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad("phi range must be finite and ordered");
        }
        if !(self.nominal_length.is_finite() && self.nominal_length > 0.0) {
            return bad("nominal_length must be positive");
        }
        let mut probe = self.solver;
        probe.method = Method::Vvl;
        probe.validate().map_err(|e| BenchmarkError::InvalidSpec(e.to_string()))
    }

    fn sorted_methods(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        m
    }

    fn sorted_counts(&self) -> Vec<usize> {
        let mut v = self.segment_counts.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn sorted_limits(&self) -> Vec<usize> {
        let mut v = self.iteration_limits.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn sorted_tolerances(&self) -> Vec<f64> {
        let mut v = self.tolerances.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v.dedup();
        v
    }

    /// Every `(method, n, limit, tol)` cell in canonical order.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for method in self.sorted_methods() {
            for n_segments in self.sorted_counts() {
                for iter_limit in self.sorted_limits() {
                    for tolerance in self.sorted_tolerances() {
                        out.push(CellKey { method, n_segments, iter_limit, tolerance });
                    }
                }
            }
        }
        out
    }

    pub fn total_trials(&self) -> usize {
        self.cells().len() * self.trials_per_config
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub method: Method,
    pub n_segments: usize,
    pub iter_limit: usize,
    pub tolerance: f64,
}

impl CellKey {
    fn sort_key(&self) -> (Method, usize, usize, u64) {
        // Larger tolerances first.
        (self.method, self.n_segments, self.iter_limit, (-self.tolerance).to_bits() ^ (1 << 63))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into a 64-bit seed: `h₀ = splitmix64(master)`,
/// `hᵢ₊₁ = splitmix64(hᵢ ^ partᵢ)`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |h, &p| splitmix64(h ^ p))
}

/// Seed of the target used by every trial at `(n_segments, trial_index)`.
pub fn target_seed(master: u64, n_segments: usize, trial_index: usize) -> u64 {
    derive_seed(master, &[n_segments as u64, trial_index as u64])
}

fn sample_configuration<R: Rng>(rng: &mut R, n: usize, spec: &BenchmarkSpec) -> ManipulatorState {
    let (lo, hi) = spec.phi_range;
    let segments = (0..n)
        .map(|_| {
            let theta = if spec.theta_max > 0.0 { rng.random_range(0.0..=spec.theta_max) } else { 0.0 };
            let phi = if hi > lo { rng.random_range(lo..hi) } else { lo };
            SegmentState::nominal(theta / spec.nominal_length, phi, spec.nominal_length)
        })
        .collect();
    ManipulatorState::new(segments).expect("sampled configuration is valid")
}

/// Draws a joint-space configuration and returns it with its tip pose.
pub fn sample_target<R: Rng>(rng: &mut R, n: usize, spec: &BenchmarkSpec) -> (ManipulatorState, Pose) {
    let state = sample_configuration(rng, n, spec);
    let pose = forward_kinematics(&state);
    (state, pose)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Position in the canonical order of the suite.
    pub trial_id: u64,
    pub trial_index: usize,
    pub method: Method,
    pub n_segments: usize,
    pub iter_limit: usize,
    pub tolerance: f64,
    /// Seed of the target configuration.
    pub seed: u64,
    pub target_kappa: Vec<f64>,
    pub target_phi: Vec<f64>,
    pub target_tip: [f64; 3],
    pub converged: bool,
    pub iterations: usize,
    pub final_error: f64,
    pub deadlock_any: bool,
    pub fail_cause: Option<FailCause>,
    pub wall_time_us: u64,
}

impl TrialRecord {
    pub fn cell(&self) -> CellKey {
        CellKey {
            method: self.method,
            n_segments: self.n_segments,
            iter_limit: self.iter_limit,
            tolerance: self.tolerance,
        }
    }

    pub fn target_distance(&self) -> f64 {
        Vector3::from(self.target_tip).norm()
    }
}

/// Runs one trial. Solver errors are recorded as a failed trial, never
/// propagated.
pub fn run_trial(
    spec: &BenchmarkSpec,
    method: Method,
    n: usize,
    limit: usize,
    tol: f64,
    trial_index: usize,
) -> TrialRecord {
    let seed = target_seed(spec.master_seed, n, trial_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (config, target) = sample_target(&mut rng, n, spec);
    let opts = SolverOptions { method, tol, max_iter: limit, record_trajectory: false, ..spec.solver };

    let start = Instant::now();
    let outcome =
        make_initial_guess(n, &vec![spec.nominal_length; n], &opts).and_then(|init| solve(&init, &target, &opts));
    let wall_time_us = start.elapsed().as_micros() as u64;

    let (converged, iterations, final_error, deadlock_any, fail_cause) = match outcome {
        Ok(r) => (r.converged, r.iterations, r.final_error, r.deadlock_any(), r.fail_cause),
        // Only option validation can fail here; record it as an immediate failure.
        Err(_) => (false, 0, f64::NAN, false, Some(FailCause::MaxIter)),
    };

    TrialRecord {
        trial_id: 0,
        trial_index,
        method,
        n_segments: n,
        iter_limit: limit,
        tolerance: tol,
        seed,
        target_kappa: config.segments().iter().map(|s| s.kappa).collect(),
        target_phi: config.segments().iter().map(|s| s.phi).collect(),
        target_tip: target.translation.into(),
        converged,
        iterations,
        final_error,
        deadlock_any,
        fail_cause,
        wall_time_us,
    }
}

fn suite_jobs(spec: &BenchmarkSpec) -> Vec<(CellKey, usize)> {
    spec.cells().into_iter().flat_map(|cell| (0..spec.trials_per_config).map(move |i| (cell, i))).collect()
}

fn number(mut records: Vec<TrialRecord>) -> Vec<TrialRecord> {
    for (i, r) in records.iter_mut().enumerate() {
        r.trial_id = i as u64;
    }
    records
}

/// Runs every trial of the spec on the current rayon pool. Output is in
/// canonical order (cell, then trial index) whatever the scheduling.
pub fn run_suite(spec: &BenchmarkSpec) -> Result<Vec<TrialRecord>, BenchmarkError> {
    spec.validate()?;
    let records = suite_jobs(spec)
        .into_par_iter()
        .map(|(c, i)| run_trial(spec, c.method, c.n_segments, c.iter_limit, c.tolerance, i))
        .collect();
    Ok(number(records))
}

/// Single-threaded [`run_suite`].
pub fn run_suite_serial(spec: &BenchmarkSpec) -> Result<Vec<TrialRecord>, BenchmarkError> {
    spec.validate()?;
    let records = suite_jobs(spec)
        .into_iter()
        .map(|(c, i)| run_trial(spec, c.method, c.n_segments, c.iter_limit, c.tolerance, i))
        .collect();
    Ok(number(records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub n_segments: usize,
    pub iter_limit: usize,
    pub tolerance: f64,
    pub trial_count: usize,
    pub converged_count: usize,
    pub success_rate: f64,
    /// Mean iterations over converged trials; `None` when none converged.
    pub mean_iter_converged: Option<f64>,
    /// Mean iterations over trials that every method in the records solved.
    pub mean_iter_paired: Option<f64>,
    pub deadlock_rate: f64,
    /// Set for grid cells with no records.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub cells: Vec<CellSummary>,
}

impl BenchmarkSummary {
    pub fn get(&self, method: Method, n: usize, limit: usize, tol: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.n_segments == n && c.iter_limit == limit && c.tolerance == tol)
    }
}

type PairKey = (usize, usize, u64, usize);

fn pair_key(r: &TrialRecord) -> PairKey {
    (r.n_segments, r.iter_limit, r.tolerance.to_bits(), r.trial_index)
}

fn mean(values: impl Iterator<Item = usize>) -> Option<f64> {
    let (sum, count) = values.fold((0usize, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum as f64 / count as f64)
}

fn summarize_cell(cell: CellKey, records: &[&TrialRecord], paired_ok: &HashMap<PairKey, bool>) -> CellSummary {
    let trial_count = records.len();
    let converged_count = records.iter().filter(|r| r.converged).count();
    let deadlocks = records.iter().filter(|r| r.deadlock_any).count();
    let rate = |k: usize| if trial_count == 0 { 0.0 } else { k as f64 / trial_count as f64 };
    CellSummary {
        method: cell.method,
        n_segments: cell.n_segments,
        iter_limit: cell.iter_limit,
        tolerance: cell.tolerance,
        trial_count,
        converged_count,
        success_rate: rate(converged_count),
        mean_iter_converged: mean(records.iter().filter(|r| r.converged).map(|r| r.iterations)),
        mean_iter_paired: mean(
            records.iter().filter(|r| paired_ok.get(&pair_key(r)).copied().unwrap_or(false)).map(|r| r.iterations),
        ),
        deadlock_rate: rate(deadlocks),
        empty: trial_count == 0,
    }
}

/// Sort key: method, n, limit, then tolerance.
type CellOrder = (Method, usize, usize, u64);

/// Per-cell statistics over `records`, in canonical cell order.
///
/// The paired statistic averages iterations over the trials (same
/// `n`, limit, tolerance and trial index) that every method present in
/// `records` solved.
pub fn aggregate(records: &[TrialRecord]) -> BenchmarkSummary {
    let mut by_cell: BTreeMap<CellOrder, (CellKey, Vec<&TrialRecord>)> = BTreeMap::new();
    for r in records {
        let cell = r.cell();
        by_cell.entry(cell.sort_key()).or_insert_with(|| (cell, Vec::new())).1.push(r);
    }
    let paired_ok = paired_success(records);
    BenchmarkSummary { cells: by_cell.into_values().map(|(cell, rs)| summarize_cell(cell, &rs, &paired_ok)).collect() }
}

/// Like [`aggregate`] but reports every cell of the spec's grid, flagging
/// cells without records as empty.
pub fn aggregate_grid(spec: &BenchmarkSpec, records: &[TrialRecord]) -> BenchmarkSummary {
    let summary = aggregate(records);
    let paired_ok = HashMap::new();
    BenchmarkSummary {
        cells: spec
            .cells()
            .into_iter()
            .map(|c| {
                summary
                    .get(c.method, c.n_segments, c.iter_limit, c.tolerance)
                    .cloned()
                    .unwrap_or_else(|| summarize_cell(c, &[], &paired_ok))
            })
            .collect(),
    }
}

fn paired_success(records: &[TrialRecord]) -> HashMap<PairKey, bool> {
    let mut methods: Vec<Method> = records.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    let mut seen: HashMap<PairKey, (usize, bool)> = HashMap::new();
    for r in records {
        let e = seen.entry(pair_key(r)).or_insert((0, true));
        e.0 += 1;
        e.1 &= r.converged;
    }
    seen.into_iter().map(|(k, (count, all))| (k, all && count == methods.len())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkspacePoint {
    pub tip: Vector3<f64>,
    pub configuration: ManipulatorState,
}

/// Tip positions of `count` joint-space samples drawn as in [`sample_target`].
pub fn sample_workspace<R: Rng>(rng: &mut R, n: usize, count: usize, spec: &BenchmarkSpec) -> Vec<WorkspacePoint> {
    (0..count)
        .map(|_| {
            let (configuration, pose) = sample_target(rng, n, spec);
            WorkspacePoint { tip: pose.translation, configuration }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BenchmarkSpec {
        BenchmarkSpec {
            segment_counts: vec![2],
            trials_per_config: 10,
            iteration_limits: vec![100],
            tolerances: vec![1e-4],
            methods: vec![Method::Jacobian],
            ..BenchmarkSpec::default()
        }
    }

    #[test]
    fn straight_targets_when_theta_max_is_zero() {
        let spec = BenchmarkSpec { theta_max: 0.0, ..tiny() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (state, pose) = sample_target(&mut rng, 3, &spec);
        assert!(state.segments().iter().all(|s| s.kappa == 0.0));
        assert!((pose.translation - Vector3::new(0.0, 0.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn same_seed_same_target() {
        let spec = tiny();
        let a = sample_target(&mut ChaCha8Rng::seed_from_u64(9), 4, &spec);
        let b = sample_target(&mut ChaCha8Rng::seed_from_u64(9), 4, &spec);
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_suite_has_ten_records() {
        let records = run_suite(&tiny()).unwrap();
        assert_eq!(records.len(), 10);
        assert!(records.iter().enumerate().all(|(i, r)| r.trial_id == i as u64 && r.trial_index == i));
    }

    #[test]
    fn desk_scale_arithmetic() {
        let spec = BenchmarkSpec::desk_scale();
        assert_eq!(spec.cells().len(), 18);
        assert_eq!(spec.total_trials(), 18_000);
        assert_eq!(BenchmarkSpec::default().cells().len(), 3 * 6 * 5 * 3);
    }

    #[test]
    fn straight_target_is_trivial_for_every_method() {
        let spec = BenchmarkSpec { theta_max: 0.0, ..tiny() };
        for method in Method::ALL {
            let r = run_trial(&spec, method, 3, 100, 1e-6, 0);
            assert!(r.converged, "{method}");
            assert!(r.iterations <= 40, "{method}: {}", r.iterations);
        }
    }

    #[test]
    fn aggregate_counts() {
        let base = run_trial(&tiny(), Method::Jacobian, 2, 100, 1e-4, 0);
        let records: Vec<TrialRecord> = (0..10)
            .map(|i| TrialRecord { trial_index: i, converged: i < 7, iterations: 10 + i, ..base.clone() })
            .collect();
        let s = aggregate(&records);
        assert_eq!(s.cells.len(), 1);
        assert_eq!(s.cells[0].success_rate, 0.7);
        assert_eq!(s.cells[0].mean_iter_converged, Some(13.0));

        let failed: Vec<_> = records.iter().map(|r| TrialRecord { converged: false, ..r.clone() }).collect();
        let s = aggregate(&failed);
        assert_eq!(s.cells[0].success_rate, 0.0);
        assert_eq!(s.cells[0].mean_iter_converged, None);
        assert_eq!(s.cells[0].mean_iter_paired, None);

        let mut reversed = records.clone();
        reversed.reverse();
        assert_eq!(aggregate(&reversed), aggregate(&records));
    }

    #[test]
    fn grid_flags_empty_cells() {
        let spec = BenchmarkSpec { methods: vec![Method::Jacobian, Method::Vvl], ..tiny() };
        let records = run_suite(&BenchmarkSpec { methods: vec![Method::Jacobian], ..spec.clone() }).unwrap();
        let s = aggregate_grid(&spec, &records);
        assert_eq!(s.cells.len(), 2);
        let vvl = s.get(Method::Vvl, 2, 100, 1e-4).unwrap();
        assert!(vvl.empty);
        assert_eq!(vvl.trial_count, 0);
        assert_eq!(vvl.success_rate, 0.0);
    }

    #[test]
    fn spec_validation() {
        assert!(BenchmarkSpec::default().validate().is_ok());
        assert!(BenchmarkSpec { methods: vec![], ..tiny() }.validate().is_err());
        assert!(BenchmarkSpec { trials_per_config: 0, ..tiny() }.validate().is_err());
        assert!(BenchmarkSpec { theta_max: 7.0, ..tiny() }.validate().is_err());
        assert!(BenchmarkSpec { tolerances: vec![0.0], ..tiny() }.validate().is_err());
    }

    #[test]
    fn workspace_near_straight_tip_for_tiny_theta() {
        let spec = BenchmarkSpec { theta_max: 1e-9, ..tiny() };
        let pts = sample_workspace(&mut ChaCha8Rng::seed_from_u64(3), 1, 50, &spec);
        assert_eq!(pts.len(), 50);
        assert!(pts.iter().all(|p| (p.tip - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-8));
    }
}
