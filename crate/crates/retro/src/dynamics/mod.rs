//! System-model interface, tracking costs, and trajectory rollout.
//!
//! A [`SystemModel`] is a discrete-time transition `x_{t+1} = f(x_t, u_t) + w_t`
//! together with a quadratic tracking cost parameterized by a target point
//! `o` in output space:
//!
//! ```text
//! L(x, u; o)  = 1/2 u' R u + 1/2 (C(x) - o)' W  (C(x) - o)
//! Lf(x; o)    =              1/2 (C(x) - o)' Wf (C(x) - o)
//! ```
//!
//! `C` maps state space to the `d`-dimensional target space (a selector for
//! the linear models, forward kinematics for the arm). Keeping the target
//! coupling explicit in the cost is what lets the adjustment layer lift
//! target-space value gradients back to state space.

mod cost;
mod models;

pub use cost::{
    final_cost, final_cost_derivatives, stage_cost, stage_cost_derivatives, CostDerivatives,
};
pub use models::{
    builtin_models, double_integrator_2d, lti_n4m2, scalar_lti, two_link_arm,
    two_link_arm_augmented, ArmAugmented, ArmParams, LtiModel, TwoLinkArm,
};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// State `x_t` in `R^n`. Units are model-specific (positions in m, joint
/// angles in rad, velocities in m/s or rad/s).
pub type StateVector = DVector<f64>;

/// Control `u_t` in `R^m` (forces in N or torques in N*m).
pub type ControlVector = DVector<f64>;

/// Target points `o_0..o_T` in output space, one per time step.
pub type TargetSeries = Vec<DVector<f64>>;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("dimension mismatch: expected {expected}, got {got} for {what}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite state at step {t} (model blow-up)")]
    NonFiniteState { t: usize },
    #[error("model provides no analytic Jacobians and the finite-difference fallback is disabled")]
    NoJacobian,
}

/// Second derivatives of the transition, contracted against a vector during
/// the full-DDP Q-expansion. `f_xx[i]` is the Hessian of the i-th state
/// component with respect to `x`, and so on.
#[derive(Debug, Clone)]
pub struct DynamicsHessians {
    pub f_xx: Vec<DMatrix<f64>>,
    pub f_ux: Vec<DMatrix<f64>>,
    pub f_uu: Vec<DMatrix<f64>>,
}

/// A discrete-time control system with a quadratic target-tracking cost.
///
/// Implementations supply the transition and, where available, analytic
/// Jacobians. [`linearize`] falls back to central differences when a model
/// returns `None` from [`SystemModel::jacobians`] and the caller allows it.
pub trait SystemModel {
    /// State dimension `n`.
    fn state_dim(&self) -> usize;
    /// Control dimension `m`.
    fn control_dim(&self) -> usize;
    /// Target-space dimension `d`.
    fn target_dim(&self) -> usize;

    /// Noise-free transition `f(x, u)` at step `t`.
    fn transition(&self, x: &StateVector, u: &ControlVector, t: usize) -> StateVector;

    /// Analytic `(f_x, f_u)` at `(x, u, t)`, if the model provides them.
    fn jacobians(
        &self,
        _x: &StateVector,
        _u: &ControlVector,
        _t: usize,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }

    /// Second-derivative tensors for full-DDP mode, if the model provides them.
    fn dynamics_hessians(
        &self,
        _x: &StateVector,
        _u: &ControlVector,
        _t: usize,
    ) -> Option<DynamicsHessians> {
        None
    }

    /// Tracking output `C(x)` in `R^d`.
    fn track_output(&self, x: &StateVector) -> DVector<f64>;

    /// Jacobian of the tracking output, `d x n`.
    fn track_jacobian(&self, x: &StateVector) -> DMatrix<f64>;

    /// Hessians of each tracking-output component (`d` matrices, `n x n`).
    /// `None` means the output map is linear.
    fn track_hessians(&self, _x: &StateVector) -> Option<Vec<DMatrix<f64>>> {
        None
    }

    /// Tracking weight `W` (symmetric PSD, `d x d`).
    fn tracking_weight(&self) -> &DMatrix<f64>;
    /// Final tracking weight `Wf` (symmetric PSD, `d x d`).
    fn final_weight(&self) -> &DMatrix<f64>;
    /// Control weight `R` (symmetric PD, `m x m`).
    fn control_weight(&self) -> &DMatrix<f64>;

    /// Process-noise scale sigma; execution rollouts draw `w ~ N(0, sigma^2 I)`.
    fn noise_sigma(&self) -> f64 {
        0.0
    }

    /// Optional box limits applied to controls inside [`step`].
    fn control_limits(&self) -> Option<(&DVector<f64>, &DVector<f64>)> {
        None
    }

    fn name(&self) -> &str;
}

/// How [`linearize`] reacts when a model has no analytic Jacobians.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdPolicy {
    /// Fall back to central finite differences (step 1e-6).
    Allow,
    /// Error out instead of differencing.
    Forbid,
}

/// States, controls, and the cost trace of one rollout.
///
/// `states.len() == controls.len() + 1` and `total_cost` re-evaluates from
/// the stored states and controls via [`trajectory_cost`].
#[derive(Debug, Clone)]
pub struct NominalTrajectory {
    pub states: Vec<StateVector>,
    pub controls: Vec<ControlVector>,
    pub stage_costs: Vec<f64>,
    pub total_cost: f64,
}

impl NominalTrajectory {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }
}

/// One transition `f(x, u) + w`. `noise` is the realized disturbance `w`;
/// planning passes `None` (mean dynamics), execution rollouts pass a draw.
pub fn step(
    model: &dyn SystemModel,
    x: &StateVector,
    u: &ControlVector,
    t: usize,
    noise: Option<&DVector<f64>>,
) -> Result<StateVector, DynamicsError> {
    check_dims(model, x, u)?;
    let u_eff = match model.control_limits() {
        Some((lo, hi)) => DVector::from_fn(u.len(), |i, _| u[i].clamp(lo[i], hi[i])),
        None => u.clone(),
    };
    let mut next = model.transition(x, &u_eff, t);
    if let Some(w) = noise {
        if w.len() != model.state_dim() {
            return Err(DynamicsError::DimensionMismatch {
                what: "noise",
                expected: model.state_dim(),
                got: w.len(),
            });
        }
        next += w;
    }
    if next.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFiniteState { t });
    }
    Ok(next)
}

/// Jacobians `(A_t, B_t) = (df/dx, df/du)` at `(x, u, t)`.
pub fn linearize(
    model: &dyn SystemModel,
    x: &StateVector,
    u: &ControlVector,
    t: usize,
    fd: FdPolicy,
) -> Result<(DMatrix<f64>, DMatrix<f64>), DynamicsError> {
    check_dims(model, x, u)?;
    if let Some(jac) = model.jacobians(x, u, t) {
        return Ok(jac);
    }
    if fd == FdPolicy::Forbid {
        return Err(DynamicsError::NoJacobian);
    }
    let n = model.state_dim();
    let m = model.control_dim();
    let h = 1e-6;
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let col = (model.transition(&xp, u, t) - model.transition(&xm, u, t)) / (2.0 * h);
        a.set_column(j, &col);
    }
    let mut b = DMatrix::zeros(n, m);
    for j in 0..m {
        let mut up = u.clone();
        let mut um = u.clone();
        up[j] += h;
        um[j] -= h;
        let col = (model.transition(x, &up, t) - model.transition(x, &um, t)) / (2.0 * h);
        b.set_column(j, &col);
    }
    Ok((a, b))
}

/// Noise-free forward rollout with per-step cost accumulation.
pub fn rollout(
    model: &dyn SystemModel,
    x0: &StateVector,
    controls: &[ControlVector],
    targets: &TargetSeries,
) -> Result<NominalTrajectory, DynamicsError> {
    let horizon = controls.len();
    assert_eq!(
        targets.len(),
        horizon + 1,
        "target series must have horizon+1 points"
    );
    let mut states = Vec::with_capacity(horizon + 1);
    let mut stage_costs = Vec::with_capacity(horizon + 1);
    states.push(x0.clone());
    for (t, u) in controls.iter().enumerate() {
        stage_costs.push(stage_cost(model, &states[t], u, &targets[t]));
        let next = step(model, &states[t], u, t, None)?;
        states.push(next);
    }
    stage_costs.push(final_cost(model, &states[horizon], &targets[horizon]));
    let total_cost = stage_costs.iter().sum();
    Ok(NominalTrajectory {
        states,
        controls: controls.to_vec(),
        stage_costs,
        total_cost,
    })
}

/// Re-evaluate the cost functional over given states/controls.
pub fn trajectory_cost(
    model: &dyn SystemModel,
    states: &[StateVector],
    controls: &[ControlVector],
    targets: &TargetSeries,
) -> f64 {
    let horizon = controls.len();
    let mut total = 0.0;
    for t in 0..horizon {
        total += stage_cost(model, &states[t], &controls[t], &targets[t]);
    }
    total + final_cost(model, &states[horizon], &targets[horizon])
}

fn check_dims(
    model: &dyn SystemModel,
    x: &StateVector,
    u: &ControlVector,
) -> Result<(), DynamicsError> {
    if x.len() != model.state_dim() {
        return Err(DynamicsError::DimensionMismatch {
            what: "state",
            expected: model.state_dim(),
            got: x.len(),
        });
    }
    if u.len() != model.control_dim() {
        return Err(DynamicsError::DimensionMismatch {
            what: "control",
            expected: model.control_dim(),
            got: u.len(),
        });
    }
    Ok(())
}
