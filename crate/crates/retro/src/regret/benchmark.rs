//! Timing comparison of per-event adjustment against full re-solves, across
//! horizons and state dimensions.
//!
//! Timing assertions downstream are ordinal only; measurements are medians
//! over repeated runs on a monotonic clock with the first run discarded as
//! warm-up.

use nalgebra::{DMatrix, DVector};

use crate::adjust::SessionConfig;
use crate::belief::BeliefTrajectory;
use crate::ddp::SolveOptions;
use crate::dynamics::{double_integrator_2d, two_link_arm_augmented, LtiModel, SystemModel};
use crate::harness::methods::{run_all, Method, Scenario, ScheduledUpdate};

use super::RegretError;

/// One method's timings on one instance.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ComplexityRecord {
    /// `oracle_ddp`, `retro`, or `multirun_ddp`.
    pub method: String,
    pub horizon: usize,
    pub state_dim: usize,
    pub control_dim: usize,
    /// Median wall time per shift event.
    pub event_micros: Vec<f64>,
    /// Median initial-solve time plus all event times.
    pub total_micros: f64,
    /// Optimizer iterations per event (1 for retro's single solve).
    pub event_iterations: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    /// Horizon sweep on the fixed n = 4 model.
    pub horizons: Vec<usize>,
    /// Fixed horizon for the dimension sweep.
    pub fixed_horizon: usize,
    /// Timing repetitions per instance (median taken, warm-up discarded).
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            horizons: vec![50, 100, 200, 400],
            fixed_horizon: 200,
            reps: 20,
            seed: 0,
        }
    }
}

/// Seeded stable LTI model with a 2-D tracked output, for dimension sweeps.
pub(crate) fn stable_lti(n: usize, m: usize, seed: u64) -> LtiModel {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)) * (0.08 / n as f64);
    for i in 0..n {
        a[(i, i)] += 0.9;
    }
    let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-0.5..0.5));
    let mut c = DMatrix::zeros(2, n);
    c[(0, 0)] = 1.0;
    c[(1, 1)] = 1.0;
    LtiModel::new(
        format!("stable_lti_n{n}"),
        a,
        b,
        c,
        DMatrix::identity(2, 2),
        DMatrix::identity(2, 2) * 50.0,
        DMatrix::identity(2, 2) * 0.1,
    )
}

/// The dimension-sweep models: the n = 4 integrator, a seeded n = 8 LTI
/// system, and the n = 13 augmented arm.
pub fn dimension_models(seed: u64) -> Vec<Box<dyn SystemModel>> {
    vec![
        Box::new(double_integrator_2d(0.01)),
        Box::new(stable_lti(8, 2, seed)),
        Box::new(two_link_arm_augmented()),
    ]
}

fn stationary_2d(center: [f64; 2], std: f64, horizon: usize) -> BeliefTrajectory {
    let launch_mean = DVector::from_vec(vec![center[0], center[1], 0.0, 0.0]);
    let mut launch_cov = DMatrix::zeros(4, 4);
    launch_cov[(0, 0)] = std * std;
    launch_cov[(1, 1)] = std * std;
    crate::belief::ballistic_prior(
        &launch_mean,
        &launch_cov,
        &DVector::zeros(2),
        0.02,
        0.0,
        horizon,
    )
}

/// Shared benchmark scenario: a stationary target belief that feints away
/// three times and finally returns to the original aim. Every re-aim clears
/// the threshold, and because the realized path equals the prior forecast,
/// the oracle faces the same planning problem as the initial solve — a
/// paired design that keeps the timing comparison free of solver-difficulty
/// confounds.
fn benchmark_scenario<'m>(model: &'m dyn SystemModel, horizon: usize) -> Scenario<'m> {
    let center = [0.5, 0.4];
    let std = 0.3;
    let prior = stationary_2d(center, std, horizon);
    let shifts: [[f64; 2]; 3] = [[0.10, -0.06], [0.02, 0.08], [-0.06, 0.04]];
    let mut updates: Vec<Option<ScheduledUpdate>> = vec![None; horizon];
    let mut cursor = center;
    for (k, shift) in shifts.iter().enumerate() {
        let at = (horizon * (k + 1)) / 5;
        cursor = [cursor[0] + shift[0], cursor[1] + shift[1]];
        let posterior = stationary_2d(cursor, std, horizon);
        updates[at.min(horizon - 1)] = Some(ScheduledUpdate::Replace(posterior));
    }
    // The final re-aim restores the prior belief exactly.
    updates[((horizon * 4) / 5).min(horizon - 1)] = Some(ScheduledUpdate::Replace(prior.clone()));
    let truth = prior.mean_path();
    let x0 = DVector::zeros(model.state_dim());
    Scenario {
        model,
        x0,
        prior,
        updates,
        truth,
        lambda_thres: 0.01,
        solve_opts: SolveOptions::default(),
        session: SessionConfig::default(),
        noise_draws: Vec::new(),
    }
}

fn record(
    outcome: &crate::harness::methods::MethodOutcome,
    model: &dyn SystemModel,
    horizon: usize,
) -> ComplexityRecord {
    let method = match outcome.method {
        Method::Oracle => "oracle_ddp",
        Method::Retro => "retro",
        Method::MultirunDdp => "multirun_ddp",
        Method::NoAdjust => "no_adjust",
    };
    let event_micros: Vec<f64> = outcome.events.iter().map(|e| e.wall_micros).collect();
    let total_micros = outcome.init_micros + event_micros.iter().sum::<f64>();
    ComplexityRecord {
        method: method.to_string(),
        horizon,
        state_dim: model.state_dim(),
        control_dim: model.control_dim(),
        event_micros,
        total_micros,
        event_iterations: outcome.events.iter().map(|e| e.iterations).collect(),
    }
}

/// Run the full benchmark: horizon sweep at n = 4 and dimension sweep at the
/// fixed horizon. Three records (oracle, retro, multirun) per instance.
pub fn complexity_benchmark(
    config: &BenchmarkConfig,
) -> Result<Vec<ComplexityRecord>, RegretError> {
    let mut records = Vec::new();

    for &horizon in &config.horizons {
        let model = double_integrator_2d(0.01);
        let scenario = benchmark_scenario(&model, horizon);
        for outcome in run_all(&scenario, config.reps)? {
            if outcome.method != Method::NoAdjust {
                records.push(record(&outcome, &model, horizon));
            }
        }
    }

    for model in dimension_models(config.seed) {
        if model.state_dim() == 4 && config.horizons.contains(&config.fixed_horizon) {
            // Already measured in the horizon sweep.
        }
        let scenario = benchmark_scenario(model.as_ref(), config.fixed_horizon);
        for outcome in run_all(&scenario, config.reps)? {
            if outcome.method != Method::NoAdjust {
                records.push(record(&outcome, model.as_ref(), config.fixed_horizon));
            }
        }
    }

    Ok(records)
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_loglog(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    num / den
}
