//! The four baseline methods, run against one shared scenario.
//!
//! - `oracle`: one DDP solve with the true target path known in advance.
//! - `retro`: initial DDP against the prior forecast, then online
//!   desirability-solve adjustments when the belief shift clears the
//!   threshold.
//! - `multirun_ddp`: same trigger, but each event discards the control
//!   sequence and re-solves DDP from scratch for the remaining horizon.
//! - `no_adjust`: executes the initial plan unchanged.
//!
//! All methods consume identical belief-update streams; retro and
//! multirun_ddp share the threshold logic, so they fire on the same steps.

use std::time::Instant;

use nalgebra::DVector;

use crate::adjust::{AdjustError, BeliefUpdate, RetroSession, SessionConfig};
use crate::belief::{kl_shift, BeliefTrajectory, Observation};
use crate::ddp::{solve, SolveOptions, SolveReport};
use crate::dynamics::{
    step, trajectory_cost, ControlVector, NominalTrajectory, StateVector, SystemModel,
    TargetSeries,
};

/// One belief update scheduled for a step.
#[derive(Debug, Clone)]
pub enum ScheduledUpdate {
    Observe(Observation),
    Replace(BeliefTrajectory),
}

/// Everything one comparison run needs; every method sees the same data.
pub struct Scenario<'m> {
    pub model: &'m dyn SystemModel,
    pub x0: StateVector,
    pub prior: BeliefTrajectory,
    /// Belief update arriving before executing step `t` (index `0..T`).
    pub updates: Vec<Option<ScheduledUpdate>>,
    /// The target path actually realized (used for oracle planning and for
    /// scoring every method).
    pub truth: TargetSeries,
    pub lambda_thres: f64,
    pub solve_opts: SolveOptions,
    pub session: SessionConfig,
    /// Shared execution disturbances, one draw per step; every method sees
    /// the identical realization. Empty means noise-free execution.
    pub noise_draws: Vec<DVector<f64>>,
}

impl Scenario<'_> {
    pub fn horizon(&self) -> usize {
        self.truth.len() - 1
    }

    fn noise_at(&self, t: usize) -> Option<&DVector<f64>> {
        self.noise_draws.get(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Oracle,
    Retro,
    MultirunDdp,
    NoAdjust,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Retro => "retro",
            Method::MultirunDdp => "multirun_ddp",
            Method::NoAdjust => "no_adjust",
        }
    }
}

/// One shift event as seen by a method.
#[derive(Debug, Clone)]
pub struct EventRecord {
    pub t: usize,
    pub kl: f64,
    pub wall_micros: f64,
    /// Optimizer iterations spent on the event (always 1 for retro's single
    /// linear solve).
    pub iterations: usize,
    /// Condition estimate of the desirability solve (retro only).
    pub condition: Option<f64>,
    pub delta_u_norm: f64,
    pub applied: bool,
}

/// What one method did on one scenario.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    pub executed: NominalTrajectory,
    /// Distance of the tracked output from the true target at the horizon.
    pub final_error: f64,
    /// Cost of the executed trajectory measured against the true targets.
    pub true_cost: f64,
    pub events: Vec<EventRecord>,
    pub init_micros: f64,
    pub init_iterations: usize,
    /// Cost-to-go trace of the method's own plan (`V` for retro/no-adjust,
    /// `V*` for the oracle).
    pub plan_value: Vec<f64>,
    /// Accumulated value shifts (zero except for retro).
    pub value_shift: Vec<f64>,
    pub converged: bool,
}

fn score(
    model: &dyn SystemModel,
    executed: &NominalTrajectory,
    truth: &TargetSeries,
) -> (f64, f64) {
    let horizon = executed.horizon();
    let final_error = (model.track_output(&executed.states[horizon]) - &truth[horizon]).norm();
    let cost = trajectory_cost(model, &executed.states, &executed.controls, truth);
    (final_error, cost)
}

/// Initial plan against the prior forecast; shared by retro, multirun, and
/// no-adjust so their starting sequences are identical.
pub fn plan_against_prior(scenario: &Scenario<'_>) -> Result<(SolveReport, f64), AdjustError> {
    let targets = scenario.prior.mean_path();
    let began = Instant::now();
    let report = solve(scenario.model, &scenario.x0, &targets, &scenario.solve_opts)?;
    Ok((report, began.elapsed().as_secs_f64() * 1e6))
}

/// One DDP solve with the truth known beforehand.
pub fn run_oracle(scenario: &Scenario<'_>) -> Result<MethodOutcome, AdjustError> {
    let began = Instant::now();
    let report = solve(
        scenario.model,
        &scenario.x0,
        &scenario.truth,
        &scenario.solve_opts,
    )?;
    let init_micros = began.elapsed().as_secs_f64() * 1e6;
    let executed = if scenario.noise_draws.is_empty() {
        report.trajectory.clone()
    } else {
        execute_open_loop(scenario, &report.trajectory.controls)?
    };
    let (final_error, true_cost) = score(scenario.model, &executed, &scenario.truth);
    Ok(MethodOutcome {
        method: Method::Oracle,
        final_error,
        true_cost,
        events: Vec::new(),
        init_micros,
        init_iterations: report.iterations,
        plan_value: report.value_trace.v.clone(),
        value_shift: vec![0.0; scenario.horizon() + 1],
        executed,
        converged: report.converged,
    })
}

/// Execute a fixed control sequence under the scenario's shared noise.
fn execute_open_loop(
    scenario: &Scenario<'_>,
    controls: &[ControlVector],
) -> Result<NominalTrajectory, AdjustError> {
    let model = scenario.model;
    let targets = scenario.prior.mean_path();
    let horizon = controls.len();
    let mut states = vec![scenario.x0.clone()];
    for (t, u) in controls.iter().enumerate() {
        let next = step(model, &states[t], u, t, scenario.noise_at(t))?;
        states.push(next);
    }
    let mut stage_costs: Vec<f64> = (0..horizon)
        .map(|t| crate::dynamics::stage_cost(model, &states[t], &controls[t], &targets[t]))
        .collect();
    stage_costs.push(crate::dynamics::final_cost(
        model,
        &states[horizon],
        &targets[horizon],
    ));
    Ok(NominalTrajectory {
        total_cost: stage_costs.iter().sum(),
        states,
        controls: controls.to_vec(),
        stage_costs,
    })
}

/// Execute the shared initial plan open loop.
pub fn run_no_adjust(
    scenario: &Scenario<'_>,
    plan: &SolveReport,
    init_micros: f64,
) -> Result<MethodOutcome, AdjustError> {
    let executed = execute_open_loop(scenario, &plan.trajectory.controls)?;
    let (final_error, true_cost) = score(scenario.model, &executed, &scenario.truth);
    Ok(MethodOutcome {
        method: Method::NoAdjust,
        final_error,
        true_cost,
        events: Vec::new(),
        init_micros,
        init_iterations: plan.iterations,
        plan_value: plan.value_trace.v.clone(),
        value_shift: vec![0.0; scenario.horizon() + 1],
        executed,
        converged: plan.converged,
    })
}

/// Online desirability adjustment (the session), fed the scheduled updates.
pub fn run_retro(
    scenario: &Scenario<'_>,
    plan: &SolveReport,
    init_micros: f64,
) -> Result<MethodOutcome, AdjustError> {
    let mut config = scenario.session.clone();
    config.lambda_thres = scenario.lambda_thres;
    let mut session = RetroSession::new(
        scenario.model,
        plan.trajectory.clone(),
        scenario.prior.mean_path(),
        scenario.prior.clone(),
        config,
    );
    while !session.finished() {
        let t = session.time();
        let update = match &scenario.updates[t] {
            Some(ScheduledUpdate::Observe(obs)) => BeliefUpdate::Observe(obs),
            Some(ScheduledUpdate::Replace(traj)) => BeliefUpdate::Replace(traj.clone()),
            None => BeliefUpdate::None,
        };
        let noise = scenario.noise_at(t).cloned();
        session.step(update, noise.as_ref())?;
    }
    let events = session
        .events()
        .iter()
        .map(|e| EventRecord {
            t: e.shift.t,
            kl: e.shift.kl,
            wall_micros: e.wall_micros,
            iterations: 1,
            condition: if e.applied { Some(e.condition) } else { None },
            delta_u_norm: e.delta_u_norm,
            applied: e.applied,
        })
        .collect();
    let value_shift = session.value_shift().to_vec();
    let executed = session.trajectory().clone();
    let (final_error, true_cost) = score(scenario.model, &executed, &scenario.truth);
    // Invariant: each applied event is exactly one linear solve.
    debug_assert_eq!(
        session.z_solve_count(),
        session.events().iter().filter(|e| e.applied).count()
    );
    Ok(MethodOutcome {
        method: Method::Retro,
        final_error,
        true_cost,
        events,
        init_micros,
        init_iterations: plan.iterations,
        plan_value: plan.value_trace.v.clone(),
        value_shift,
        executed,
        converged: plan.converged,
    })
}

/// Same trigger as retro, but every event re-solves DDP from scratch for the
/// remaining horizon and discards the previous sequence.
pub fn run_multirun(
    scenario: &Scenario<'_>,
    plan: &SolveReport,
    init_micros: f64,
) -> Result<MethodOutcome, AdjustError> {
    let model = scenario.model;
    let horizon = scenario.horizon();
    let mut controls: Vec<ControlVector> = plan.trajectory.controls.clone();
    let mut prior = scenario.prior.clone();
    let mut posterior = prior.clone();
    let mut state = scenario.x0.clone();
    let mut states = vec![state.clone()];
    let mut events = Vec::new();
    let mut converged = plan.converged;

    for t in 0..horizon {
        match &scenario.updates[t] {
            Some(ScheduledUpdate::Observe(obs)) => {
                posterior = posterior.observe_and_update(obs)?;
            }
            Some(ScheduledUpdate::Replace(traj)) => {
                posterior = traj.clone();
            }
            None => {}
        }
        let kl = kl_shift(&posterior, &prior, t, &scenario.session.mc)?;
        if kl > scenario.lambda_thres {
            // Fresh cold-start solve over the remaining horizon against the
            // updated forecast.
            let began = Instant::now();
            let remaining_targets: TargetSeries = posterior.mean_path()[t..].to_vec();
            let report = solve(model, &state, &remaining_targets, &scenario.solve_opts)?;
            let wall_micros = began.elapsed().as_secs_f64() * 1e6;
            for (i, u) in report.trajectory.controls.iter().enumerate() {
                controls[t + i] = u.clone();
            }
            converged = converged && report.converged;
            events.push(EventRecord {
                t,
                kl,
                wall_micros,
                iterations: report.iterations.max(1),
                condition: None,
                delta_u_norm: 0.0,
                applied: true,
            });
            prior = posterior.clone();
        }
        state = step(model, &state, &controls[t], t, scenario.noise_at(t))?;
        states.push(state.clone());
    }

    let plan_targets = scenario.prior.mean_path();
    let mut stage_costs: Vec<f64> = (0..horizon)
        .map(|t| crate::dynamics::stage_cost(model, &states[t], &controls[t], &plan_targets[t]))
        .collect();
    stage_costs.push(crate::dynamics::final_cost(
        model,
        &states[horizon],
        &plan_targets[horizon],
    ));
    let executed = NominalTrajectory {
        total_cost: stage_costs.iter().sum(),
        states,
        controls,
        stage_costs,
    };
    let (final_error, true_cost) = score(model, &executed, &scenario.truth);
    Ok(MethodOutcome {
        method: Method::MultirunDdp,
        final_error,
        true_cost,
        events,
        init_micros,
        init_iterations: plan.iterations,
        plan_value: plan.value_trace.v.clone(),
        value_shift: vec![0.0; horizon + 1],
        executed,
        converged,
    })
}

/// Run all four methods on one scenario. `timing_reps` > 1 re-runs the
/// timed computations and replaces wall times with medians (first run
/// discarded as warm-up when possible); outcomes always come from the first
/// run.
pub fn run_all(
    scenario: &Scenario<'_>,
    timing_reps: usize,
) -> Result<Vec<MethodOutcome>, AdjustError> {
    // When the realized path equals the prior forecast bit for bit, the
    // oracle's problem is the initial plan's problem; solve once and
    // attribute the same measurement to both (paired timing).
    let oracle_is_plan = scenario.prior.mean_path() == scenario.truth;

    let (plan, plan_micros) = plan_against_prior(scenario)?;
    let mut oracle = if oracle_is_plan {
        oracle_from_plan(scenario, &plan, plan_micros)
    } else {
        run_oracle(scenario)?
    };
    let mut retro = run_retro(scenario, &plan, plan_micros)?;
    let mut multirun = run_multirun(scenario, &plan, plan_micros)?;
    let no_adjust = run_no_adjust(scenario, &plan, plan_micros)?;

    if timing_reps > 1 {
        let mut oracle_init = vec![oracle.init_micros];
        let mut plan_init = vec![plan_micros];
        let mut retro_events: Vec<Vec<f64>> =
            retro.events.iter().map(|e| vec![e.wall_micros]).collect();
        let mut multi_events: Vec<Vec<f64>> = multirun
            .events
            .iter()
            .map(|e| vec![e.wall_micros])
            .collect();
        for _ in 1..timing_reps {
            let (p, pm) = plan_against_prior(scenario)?;
            plan_init.push(pm);
            if !oracle_is_plan {
                oracle_init.push(run_oracle(scenario)?.init_micros);
            }
            let r = run_retro(scenario, &p, pm)?;
            for (acc, e) in retro_events.iter_mut().zip(&r.events) {
                acc.push(e.wall_micros);
            }
            let m = run_multirun(scenario, &p, pm)?;
            for (acc, e) in multi_events.iter_mut().zip(&m.events) {
                acc.push(e.wall_micros);
            }
        }
        let med = |xs: &mut Vec<f64>| {
            if xs.len() > 2 {
                xs.remove(0); // warm-up
            }
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // Lower median: robust against one preempted sample.
            xs[(xs.len() - 1) / 2]
        };
        let plan_med = med(&mut plan_init);
        oracle.init_micros = if oracle_is_plan {
            plan_med
        } else {
            med(&mut oracle_init)
        };
        retro.init_micros = plan_med;
        multirun.init_micros = plan_med;
        for (e, mut xs) in retro.events.iter_mut().zip(retro_events) {
            e.wall_micros = med(&mut xs);
        }
        for (e, mut xs) in multirun.events.iter_mut().zip(multi_events) {
            e.wall_micros = med(&mut xs);
        }
    }

    Ok(vec![oracle, retro, multirun, no_adjust])
}

fn oracle_from_plan(
    scenario: &Scenario<'_>,
    plan: &SolveReport,
    plan_micros: f64,
) -> MethodOutcome {
    let (final_error, true_cost) = score(scenario.model, &plan.trajectory, &scenario.truth);
    MethodOutcome {
        method: Method::Oracle,
        final_error,
        true_cost,
        events: Vec::new(),
        init_micros: plan_micros,
        init_iterations: plan.iterations,
        plan_value: plan.value_trace.v.clone(),
        value_shift: vec![0.0; scenario.horizon() + 1],
        executed: plan.trajectory.clone(),
        converged: plan.converged,
    }
}
