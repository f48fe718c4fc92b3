//! The online loop: observe, update the posterior, measure the shift, and
//! fine-tune the remaining controls when the shift clears the threshold.
//!
//! Per step: take the incoming belief update, compute the KL divergence of
//! the posterior against the prior at the current step, and if it exceeds
//! the threshold solve the desirability system over the remaining horizon,
//! apply the feedforward corrections, and rebase the prior onto the
//! posterior. Then execute the current control. A failed adjustment
//! executes the unadjusted control and flags the event.

use std::time::Instant;

use nalgebra::DVector;

use crate::belief::{kl_shift, BeliefTrajectory, McSettings, Observation, ShiftEvent};
use crate::dynamics::{
    final_cost, stage_cost, step, ControlVector, FdPolicy, NominalTrajectory, StateVector,
    SystemModel, TargetSeries,
};

use super::{
    build_m, control_adjustment, delta_running_cost, solve_desirability, value_gradient,
    AdjustError, GradientMode,
};

#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// Shift threshold in nats.
    pub lambda_thres: f64,
    pub mc: McSettings,
    pub gradient_mode: GradientMode,
    pub fd_policy: FdPolicy,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            lambda_thres: 0.05,
            mc: McSettings::default(),
            gradient_mode: GradientMode::Analytic,
            fd_policy: FdPolicy::Allow,
        }
    }
}

/// Belief input for one step.
pub enum BeliefUpdate<'a> {
    /// Nothing observed this step.
    None,
    /// Condition the posterior on a measurement.
    Observe(&'a Observation),
    /// Replace the posterior outright (scheduled shifts, replays).
    Replace(BeliefTrajectory),
}

/// One detected shift with its adjustment diagnostics.
#[derive(Debug, Clone)]
pub struct AdjustmentEvent {
    pub shift: ShiftEvent,
    pub condition: f64,
    pub delta_u_norm: f64,
    pub wall_micros: f64,
    /// False when the solve failed and the stale control was executed.
    pub applied: bool,
}

/// What one step did.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub t: usize,
    pub kl: f64,
    pub executed: ControlVector,
    pub event_index: Option<usize>,
}

/// Online fine-tuning session over a planned control sequence.
pub struct RetroSession<'m> {
    model: &'m dyn SystemModel,
    config: SessionConfig,
    horizon: usize,
    /// Planning targets from the initial solve (prior mean path); used to
    /// keep the predicted trajectory's cost trace meaningful.
    plan_targets: TargetSeries,
    /// Current control sequence (starts as the planned one).
    controls: Vec<ControlVector>,
    /// Executed prefix + predicted suffix under `controls`.
    predicted: NominalTrajectory,
    prior: BeliefTrajectory,
    posterior: BeliefTrajectory,
    t: usize,
    /// Accumulated value shifts per step, `0..=T`.
    value_shift: Vec<f64>,
    events: Vec<AdjustmentEvent>,
    z_solves: usize,
}

impl<'m> RetroSession<'m> {
    /// `planned` is the DDP output against the prior mean path.
    pub fn new(
        model: &'m dyn SystemModel,
        planned: NominalTrajectory,
        plan_targets: TargetSeries,
        prior: BeliefTrajectory,
        config: SessionConfig,
    ) -> Self {
        let horizon = planned.horizon();
        assert_eq!(
            prior.horizon(),
            horizon,
            "belief horizon must match the plan"
        );
        assert_eq!(plan_targets.len(), horizon + 1);
        Self {
            model,
            config,
            horizon,
            plan_targets,
            controls: planned.controls.clone(),
            predicted: planned,
            posterior: prior.clone(),
            prior,
            t: 0,
            value_shift: vec![0.0; horizon + 1],
            events: Vec::new(),
            z_solves: 0,
        }
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn finished(&self) -> bool {
        self.t >= self.horizon
    }

    pub fn events(&self) -> &[AdjustmentEvent] {
        &self.events
    }

    pub fn controls(&self) -> &[ControlVector] {
        &self.controls
    }

    pub fn value_shift(&self) -> &[f64] {
        &self.value_shift
    }

    /// Number of desirability solves performed so far.
    pub fn z_solve_count(&self) -> usize {
        self.z_solves
    }

    pub fn posterior(&self) -> &BeliefTrajectory {
        &self.posterior
    }

    /// Executed prefix and current predicted suffix.
    pub fn trajectory(&self) -> &NominalTrajectory {
        &self.predicted
    }

    /// Current (executed) state.
    pub fn state(&self) -> &StateVector {
        &self.predicted.states[self.t]
    }

    /// Advance one step: ingest the belief update, adjust if the shift
    /// clears the threshold, execute the current control.
    pub fn step(
        &mut self,
        update: BeliefUpdate<'_>,
        noise: Option<&DVector<f64>>,
    ) -> Result<StepOutcome, AdjustError> {
        assert!(!self.finished(), "session already ran the whole horizon");
        let t = self.t;

        match update {
            BeliefUpdate::None => {}
            BeliefUpdate::Observe(obs) => {
                self.posterior = self.posterior.observe_and_update(obs)?;
            }
            BeliefUpdate::Replace(traj) => {
                assert_eq!(traj.horizon(), self.horizon);
                self.posterior = traj;
            }
        }

        let kl = kl_shift(&self.posterior, &self.prior, t, &self.config.mc)?;
        let mut event_index = None;
        if kl > self.config.lambda_thres {
            let index = self.adjust(t, kl);
            event_index = Some(index);
        }

        let u = self.controls[t].clone();
        let next = step(self.model, &self.predicted.states[t], &u, t, noise)?;
        let drifted = noise.is_some() || next != self.predicted.states[t + 1];
        self.predicted.states[t + 1] = next;
        self.predicted.controls[t] = u.clone();
        self.t += 1;
        // Re-derive the predicted suffix only when the realized state or the
        // controls moved off the current prediction.
        if event_index.is_some() || drifted {
            self.repredict();
        }

        Ok(StepOutcome {
            t,
            kl,
            executed: u,
            event_index,
        })
    }

    /// Run the remaining horizon with no further observations.
    pub fn run_to_end(&mut self) -> Result<(), AdjustError> {
        while !self.finished() {
            self.step(BeliefUpdate::None, None)?;
        }
        Ok(())
    }

    /// One adjustment: solve the desirability system over the remaining
    /// steps, fine-tune the remaining controls, rebase the prior.
    fn adjust(&mut self, t: usize, kl: f64) -> usize {
        let start = t + 1;
        let began = Instant::now();
        let shift = ShiftEvent {
            t,
            kl,
            prior: self.prior.belief_at(t).clone(),
            posterior: self.posterior.belief_at(t).clone(),
        };

        let outcome = self.try_adjust(start);
        let wall_micros = began.elapsed().as_secs_f64() * 1e6;
        let event = match outcome {
            Ok((condition, delta_u_norm)) => {
                self.prior = self.posterior.clone();
                AdjustmentEvent {
                    shift,
                    condition,
                    delta_u_norm,
                    wall_micros,
                    applied: true,
                }
            }
            Err(_) => AdjustmentEvent {
                shift,
                condition: f64::NAN,
                delta_u_norm: 0.0,
                wall_micros,
                applied: false,
            },
        };
        self.events.push(event);
        self.events.len() - 1
    }

    fn try_adjust(&mut self, start: usize) -> Result<(f64, f64), AdjustError> {
        let shift = delta_running_cost(&self.predicted, &self.prior, &self.posterior, self.model)?;
        let weights = sliced_weights(&self.prior, &self.posterior, start);
        let matrix = build_m(&shift, &weights, start);
        let solution = solve_desirability(&matrix)?;
        self.z_solves += 1;
        let grads = value_gradient(
            &solution,
            &matrix,
            &self.predicted,
            &self.prior,
            &self.posterior,
            self.model,
            self.config.gradient_mode,
        );
        let adj = control_adjustment(
            &grads,
            start,
            &self.predicted,
            self.model,
            self.config.fd_policy,
        )?;

        let mut norm_sq = 0.0;
        for s in start - 1..self.horizon {
            norm_sq += adj.delta_u[s].norm_squared();
            self.controls[s] = adj.controls[s].clone();
        }
        for (i, dv) in solution.delta_v.iter().enumerate() {
            self.value_shift[start + i] += dv;
        }
        Ok((solution.condition, norm_sq.sqrt()))
    }

    /// Recompute the predicted suffix from the current realized state under
    /// the current controls, and refresh the cost trace.
    fn repredict(&mut self) {
        let t = self.t;
        for s in t..self.horizon {
            self.predicted.states[s + 1] =
                self.model
                    .transition(&self.predicted.states[s], &self.controls[s], s);
            self.predicted.controls[s] = self.controls[s].clone();
        }
        for s in 0..self.horizon {
            self.predicted.stage_costs[s] = stage_cost(
                self.model,
                &self.predicted.states[s],
                &self.predicted.controls[s],
                &self.plan_targets[s],
            );
        }
        self.predicted.stage_costs[self.horizon] = final_cost(
            self.model,
            &self.predicted.states[self.horizon],
            &self.plan_targets[self.horizon],
        );
        self.predicted.total_cost = self.predicted.stage_costs.iter().sum();
    }
}

/// Step weights for the pair over `start..=T`, renormalized to the range.
fn sliced_weights(
    prior: &BeliefTrajectory,
    posterior: &BeliefTrajectory,
    start: usize,
) -> Vec<f64> {
    let full = crate::belief::reweight(prior, posterior);
    let slice = &full[start..];
    let sum: f64 = slice.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        return vec![1.0 / slice.len() as f64; slice.len()];
    }
    slice.iter().map(|w| w / sum).collect()
}
