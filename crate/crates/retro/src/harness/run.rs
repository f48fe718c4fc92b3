//! One full comparison run: configuration in, four method reports out.

use thiserror::Error;

use crate::adjust::{AdjustError, SessionConfig};
use crate::belief::{ballistic_prior, forecast_gmm, GmmSettings, McSettings, Observation};
use crate::ddp::SolveOptions;
use crate::dynamics::FdPolicy;
use crate::regret::{regret_series, RegretError};

use super::config::{ConfigError, Forecaster, ScenarioConfig};
use super::generate::generate_target;
use super::methods::{run_all, Method, Scenario, ScheduledUpdate};
use super::report::{RegretSummary, RunReport};

/// Shared per-step execution disturbances, drawn once per scenario so every
/// method faces the identical realization.
fn execution_noise(
    model: &Box<dyn crate::dynamics::SystemModel>,
    horizon: usize,
    seed: u64,
) -> Vec<nalgebra::DVector<f64>> {
    use rand::SeedableRng;
    use rand_distr::Distribution;
    let sigma = model.noise_sigma();
    if sigma == 0.0 {
        return Vec::new();
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xD15E_A5E5_0F_u64);
    let n = model.state_dim();
    (0..horizon)
        .map(|_| {
            nalgebra::DVector::from_fn(n, |_, _| {
                let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                sigma * z
            })
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] AdjustError),
    #[error(transparent)]
    Regret(#[from] RegretError),
    #[error("replay: {0}")]
    Replay(String),
}

/// Run the four methods on the configured scenario. `replay` substitutes the
/// generated observation stream; the ground truth is then the ballistic
/// least-squares fit through the replayed observations.
pub fn run_scenario(
    config: &ScenarioConfig,
    replay: Option<Vec<Observation>>,
) -> Result<Vec<RunReport>, HarnessError> {
    config.validate()?;
    let seed = config.scenario.seed;
    let horizon = config.scenario.horizon;
    let model = config.build_model();

    let (truth, observations) = match replay {
        None => generate_target(config, seed),
        Some(obs) => {
            let settings = GmmSettings::new(config.gravity(), config.scenario.dt);
            let fit = forecast_gmm(&obs, 1, horizon, &settings)
                .map_err(|e| HarnessError::Replay(e.to_string()))?;
            (fit.trajectory.mean_path(), obs)
        }
    };

    let prior = ballistic_prior(
        &config.launch_mean(),
        &config.launch_cov(),
        &config.gravity(),
        config.scenario.dt,
        config.launch.process_noise,
        horizon,
    );

    let mut updates: Vec<Option<ScheduledUpdate>> = vec![None; horizon];
    match config.scenario.forecaster {
        Forecaster::Ballistic => {
            for obs in &observations {
                updates[obs.t] = Some(ScheduledUpdate::Observe(obs.clone()));
            }
        }
        Forecaster::Gmm => {
            // Refit on everything seen so far at each arrival.
            let mut settings = GmmSettings::new(config.gravity(), config.scenario.dt);
            settings.seed = seed;
            settings.restarts = config.gmm.em_restarts;
            settings.max_iters = config.gmm.em_max_iters;
            let mut seen: Vec<Observation> = Vec::new();
            // A ballistic component has 2d launch parameters; refuse to
            // forecast from fewer than three points per component.
            let min_obs = (3 * config.gmm.components).max(3);
            for obs in &observations {
                seen.push(obs.clone());
                if seen.len() >= min_obs {
                    let fit = forecast_gmm(&seen, config.gmm.components, horizon, &settings)
                        .map_err(|e| HarnessError::Replay(e.to_string()))?;
                    updates[obs.t] = Some(ScheduledUpdate::Replace(fit.trajectory));
                }
            }
        }
    }

    let scenario = Scenario {
        model: model.as_ref(),
        x0: nalgebra::DVector::zeros(model.state_dim()),
        prior,
        updates,
        truth,
        lambda_thres: config.scenario.lambda_thres,
        solve_opts: SolveOptions {
            max_iters: config.solver.max_iters,
            tol: config.solver.tol,
            reg_init: config.solver.reg_init,
            full_ddp: config.solver.full_ddp,
            fd_policy: FdPolicy::Allow,
            init_controls: Vec::new(),
        },
        session: SessionConfig {
            lambda_thres: config.scenario.lambda_thres,
            mc: McSettings {
                samples: config.gmm.mc_samples,
                seed,
            },
            ..SessionConfig::default()
        },
        noise_draws: execution_noise(&model, horizon, seed),
    };

    let outcomes = run_all(&scenario, 1)?;
    let oracle = outcomes
        .iter()
        .find(|o| o.method == Method::Oracle)
        .expect("oracle always present");

    let mut reports = Vec::with_capacity(outcomes.len());
    for outcome in &outcomes {
        let regret = if outcome.method == Method::Retro {
            let series = regret_series(outcome, oracle)?;
            Some(RegretSummary {
                bound: series.bound,
                max: series.max,
                total: series.total,
                violations: series.violations,
            })
        } else {
            None
        };
        reports.push(RunReport::from_outcome(outcome, config, seed, regret));
    }
    Ok(reports)
}
