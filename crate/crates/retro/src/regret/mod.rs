//! Error and complexity analysis against the oracle.
//!
//! The regret at step `t` is the magnitude of the deviation of the adjusted
//! value function from the oracle's, `R_t = |V_t + dV_t - V*_t|`, checked
//! against the horizon bound `alpha(1/T) + log T`. The module also verifies
//! the normalization-term bound `g(t) <= T e^{-dV_m}` on randomized
//! desirability solutions, generates shift-conforming scenarios (per-step
//! KL below `alpha(1/T)`), benchmarks per-event adjustment cost against
//! full re-solves, and sweeps the planning horizon for the cost/regret
//! trade-off.

mod benchmark;

pub use benchmark::{complexity_benchmark, fit_loglog, BenchmarkConfig, ComplexityRecord};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adjust::{AdjustError, DesirabilitySolution, SessionConfig};
use crate::belief::{alpha_bound, ballistic_prior, kl_gaussian_1d, BeliefTrajectory};
use crate::ddp::{solve, DdpError, SolveOptions, SolveReport};
use crate::dynamics::{double_integrator_2d, LtiModel, StateVector, SystemModel, TargetSeries};
use crate::harness::methods::{
    plan_against_prior, run_oracle, run_retro, MethodOutcome, Scenario, ScheduledUpdate,
};

#[derive(Debug, Error)]
pub enum RegretError {
    #[error("runs have different horizons: {0} vs {1}")]
    MismatchedRuns(usize, usize),
    #[error(transparent)]
    Adjust(#[from] AdjustError),
    #[error(transparent)]
    Ddp(#[from] DdpError),
}

/// Per-step regret against the oracle with its bound.
#[derive(Debug, Clone)]
pub struct RegretReport {
    /// `R_t` for one-indexed steps `1..=T` (index `k` holds step `k+1`).
    pub per_step: Vec<f64>,
    /// `alpha(1/T) + log T`.
    pub bound: f64,
    pub total: f64,
    pub max: f64,
    /// Paper steps whose regret exceeds the bound.
    pub violations: Vec<usize>,
    /// Smallest accumulated value shift and where it occurs.
    pub delta_v_min: f64,
    pub delta_v_min_index: usize,
}

/// One DDP solve to convergence against the true target path; its value
/// trace is the oracle `V*`.
pub fn oracle_solve(
    model: &dyn SystemModel,
    x0: &StateVector,
    truth: &TargetSeries,
    opts: &SolveOptions,
) -> Result<SolveReport, DdpError> {
    solve(model, x0, truth, opts)
}

/// Regret series of a retro run against an oracle run on the same scenario.
pub fn regret_series(
    retro: &MethodOutcome,
    oracle: &MethodOutcome,
) -> Result<RegretReport, RegretError> {
    let horizon = retro.plan_value.len() - 1;
    if oracle.plan_value.len() != horizon + 1 || retro.value_shift.len() != horizon + 1 {
        return Err(RegretError::MismatchedRuns(
            horizon,
            oracle.plan_value.len().saturating_sub(1),
        ));
    }
    let bound = alpha_bound(horizon) + (horizon as f64).ln();
    let per_step: Vec<f64> = (1..=horizon)
        .map(|t| (retro.plan_value[t] + retro.value_shift[t] - oracle.plan_value[t]).abs())
        .collect();
    let total = per_step.iter().sum();
    let max = per_step.iter().cloned().fold(0.0, f64::max);
    let violations: Vec<usize> = per_step
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > bound)
        .map(|(k, _)| k + 1)
        .collect();
    let (mut delta_v_min, mut delta_v_min_index) = (f64::INFINITY, 0);
    for (t, v) in retro.value_shift.iter().enumerate().skip(1) {
        if *v < delta_v_min {
            delta_v_min = *v;
            delta_v_min_index = t;
        }
    }
    Ok(RegretReport {
        per_step,
        bound,
        total,
        max,
        violations,
        delta_v_min,
        delta_v_min_index,
    })
}

/// Normalization-term bound: `max_t g(t) <= T e^{-dV_m}` with `dV_m` the
/// smallest value shift. Returns whether it holds and the margin.
pub fn check_normalization_bound(solution: &DesirabilitySolution, horizon: usize) -> (bool, f64) {
    let dv_min = solution
        .delta_v
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let g_max = solution.g.iter().cloned().fold(0.0, f64::max);
    let margin = horizon as f64 * (-dv_min).exp() - g_max;
    (margin >= -1e-9 * (1.0 + g_max), margin)
}

/// Randomized sweep of the normalization-term bound over fresh desirability
/// solutions; returns the violation count and the smallest margin seen.
pub fn normalization_bound_sweep(instances: usize, max_horizon: usize, seed: u64) -> (usize, f64) {
    use crate::adjust::{build_m, solve_desirability, CostShiftVector};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    let mut produced = 0;
    while produced < instances {
        let horizon = rng.gen_range(2..=max_horizon);
        let values: Vec<f64> = (0..=horizon).map(|_| rng.gen_range(-0.2..1.0)).collect();
        let raw: Vec<f64> = (0..horizon).map(|_| rng.gen_range(0.02..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        let components = values.iter().map(|&v| (v, 0.0)).collect();
        let matrix = build_m(&CostShiftVector { values, components }, &weights, 1);
        let solution = match solve_desirability(&matrix) {
            Ok(s) => s,
            Err(_) => continue,
        };
        produced += 1;
        let (holds, margin) = check_normalization_bound(&solution, horizon);
        if !holds {
            violations += 1;
        }
        min_margin = min_margin.min(margin);
    }
    (violations, min_margin)
}

/// A shift-conforming scenario: stationary prior over the target, one
/// scheduled posterior replacement whose per-step KL equals the
/// shrinking-Gaussian schedule (mean shift `sigma/T`, stddev scale
/// `1 + 1/T` on one axis), which stays below `alpha(1/T)`.
pub struct ConformalScenario {
    pub model: LtiModel,
    pub x0: StateVector,
    pub prior: BeliefTrajectory,
    pub updates: Vec<Option<ScheduledUpdate>>,
    pub truth: TargetSeries,
    pub lambda: f64,
    /// The per-step KL of the scheduled shift.
    pub schedule_kl: f64,
}

/// Stationary belief with per-axis standard deviations.
fn stationary_axes(center: &[f64], stds: &[f64], horizon: usize) -> BeliefTrajectory {
    let d = center.len();
    let mut launch_mean = DVector::zeros(2 * d);
    let mut launch_cov = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        launch_mean[i] = center[i];
        launch_cov[(i, i)] = stds[i] * stds[i];
    }
    ballistic_prior(
        &launch_mean,
        &launch_cov,
        &DVector::zeros(d),
        0.02,
        0.0,
        horizon,
    )
}

pub fn conformal_scenario(horizon: usize, seed: u64) -> ConformalScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fixed four-second task regardless of step count, so horizon sweeps
    // compare discretizations of the same physical problem.
    let dt = 4.0 / horizon as f64;
    let mut model = double_integrator_2d(dt);
    // Moderate final weight: the value shift carries a trace term
    // ~ Wf sigma0^2 / T from the schedule's variance growth, which must stay
    // well inside the bound's log T budget.
    model.wf = DMatrix::identity(2, 2) * 10.0;
    let sigma0 = 0.1;
    let t = horizon as f64;

    let center = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let axis = rng.gen_range(0..2usize);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };

    let prior = stationary_axes(&center, &[sigma0, sigma0], horizon);

    let mut shifted_center = center;
    shifted_center[axis] += sign * sigma0 / t;
    let mut stds = [sigma0, sigma0];
    stds[axis] = sigma0 * (1.0 + 1.0 / t);
    let posterior = stationary_axes(&shifted_center, &stds, horizon);

    // Affine-invariant: equals the 1-D schedule value, below alpha(1/T).
    let schedule_kl = kl_gaussian_1d(1.0 / t, 1.0 + 1.0 / t, 0.0, 1.0).unwrap();
    debug_assert!(schedule_kl <= alpha_bound(horizon));

    // Mid-horizon re-aim: the largest tail value shift behaves like
    // log(remaining steps), so firing at T/2 leaves ~log 2 of margin under
    // the log T budget.
    let event_at = (horizon / 2).max(1).min(horizon - 1);
    let mut updates: Vec<Option<ScheduledUpdate>> = vec![None; horizon];
    updates[event_at] = Some(ScheduledUpdate::Replace(posterior.clone()));

    let truth = posterior.mean_path();
    let x0 = DVector::from_vec(vec![
        center[0] + rng.gen_range(-0.5..0.5),
        center[1] + rng.gen_range(-0.5..0.5),
        0.0,
        0.0,
    ]);

    ConformalScenario {
        model,
        x0,
        prior,
        updates,
        truth,
        lambda: 0.5 * schedule_kl,
        schedule_kl,
    }
}

/// Run retro and the oracle on a conforming scenario; the regret report is
/// the empirical side of the horizon bound.
pub fn evaluate_conformal(
    scenario: &ConformalScenario,
) -> Result<(RegretReport, MethodOutcome, MethodOutcome), RegretError> {
    let runner = Scenario {
        model: &scenario.model,
        x0: scenario.x0.clone(),
        prior: scenario.prior.clone(),
        updates: scenario.updates.clone(),
        truth: scenario.truth.clone(),
        lambda_thres: scenario.lambda,
        solve_opts: SolveOptions::default(),
        session: SessionConfig::default(),
        noise_draws: Vec::new(),
    };
    let (plan, plan_micros) = plan_against_prior(&runner)?;
    let retro = run_retro(&runner, &plan, plan_micros)?;
    let oracle = run_oracle(&runner)?;
    let report = regret_series(&retro, &oracle)?;
    Ok((report, retro, oracle))
}

/// Batch verification of the horizon bound over seeded conforming scenarios.
pub struct RegretBoundSummary {
    /// `(horizon, max regret seen, bound, scenarios violating)` per horizon.
    pub per_horizon: Vec<(usize, f64, f64, usize)>,
    /// `(horizon, seed, one-indexed step)` of every violation.
    pub violations: Vec<(usize, u64, usize)>,
    pub scenarios: usize,
}

pub fn regret_bound_batch(
    horizons: &[usize],
    seeds_per_horizon: u64,
    base_seed: u64,
) -> Result<RegretBoundSummary, RegretError> {
    let mut per_horizon = Vec::new();
    let mut violations = Vec::new();
    let mut scenarios = 0;
    for &horizon in horizons {
        let mut max_regret = 0.0f64;
        let mut violating = 0usize;
        let mut bound = 0.0;
        for k in 0..seeds_per_horizon {
            let seed = base_seed
                .wrapping_add(horizon as u64)
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(k);
            let scenario = conformal_scenario(horizon, seed);
            let (report, _, _) = evaluate_conformal(&scenario)?;
            scenarios += 1;
            bound = report.bound;
            max_regret = max_regret.max(report.max);
            if !report.violations.is_empty() {
                violating += 1;
                for &t in &report.violations {
                    violations.push((horizon, seed, t));
                }
            }
        }
        per_horizon.push((horizon, max_regret, bound, violating));
    }
    Ok(RegretBoundSummary {
        per_horizon,
        violations,
        scenarios,
    })
}

/// One row of the horizon sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub horizon: usize,
    /// `J_retro - J_oracle`, both measured against the true targets.
    pub cost_diff: f64,
    pub total_regret: f64,
    pub bound: f64,
    pub violations: usize,
    /// False when any solve failed to converge.
    pub valid: bool,
}

/// Cost/regret trade-off across planning horizons; one seed drives the whole
/// sweep so rows differ only in the horizon.
pub fn horizon_sweep(horizons: &[usize], seed: u64) -> Result<Vec<SweepRow>, RegretError> {
    let mut rows = Vec::with_capacity(horizons.len());
    for &horizon in horizons {
        let scenario = conformal_scenario(horizon, seed);
        let (report, retro, oracle) = evaluate_conformal(&scenario)?;
        rows.push(SweepRow {
            horizon,
            cost_diff: retro.true_cost - oracle.true_cost,
            total_regret: report.total,
            bound: report.bound,
            violations: report.violations.len(),
            valid: retro.converged && oracle.converged,
        });
    }
    Ok(rows)
}
