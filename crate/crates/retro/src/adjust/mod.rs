//! Control fine-tuning from belief shifts, without re-running the optimizer.
//!
//! When the target belief moves, the change in the optimal value function
//! satisfies a recursion that turns linear in the exponentiated shift
//! `z(o_t) = exp(-dV(t))`: collecting the per-step cost shifts `dL` and the
//! scalar step weights `p(o_t)` into
//!
//! ```text
//! M = diag(e^{-dL(1:T)}) P,     P[t][j] = p(o_j) for j >= t, 0 below,
//! ```
//!
//! the shifts solve `z = Mz` with the terminal boundary `z(T) = e^{-dL(T)}`.
//! One linear solve of the partitioned system
//!
//! ```text
//! (diag(e^{dL(N)}) - P_N) z_N = p(o_T) z_T * 1
//! ```
//!
//! yields every non-terminal `z`, the normalization terms
//! `g(t) = sum_{j>=t} p(o_j) z_j`, the value shifts
//! `dV(t) = dL(t) + log(1/g(t))`, and finally feedforward corrections
//! `du_t = -R^-1 B_t' dV_x(t+1)` for the whole remaining horizon.

mod session;

pub use session::{AdjustmentEvent, BeliefUpdate, RetroSession, SessionConfig, StepOutcome};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::belief::{BeliefError, BeliefTrajectory, MixtureBelief};
use crate::dynamics::{
    linearize, ControlVector, DynamicsError, FdPolicy, NominalTrajectory, SystemModel,
};

/// `dL` magnitudes beyond this are clamped before exponentiation.
const DELTA_L_CLAMP: f64 = 50.0;
/// Condition estimates beyond this trigger the diagonal ridge.
const CONDITION_LIMIT: f64 = 1e12;
const RIDGE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum AdjustError {
    #[error("horizons differ: trajectory {traj} vs beliefs {belief}")]
    HorizonMismatch { traj: usize, belief: usize },
    #[error("desirability solve produced a non-positive entry (index {index})")]
    NonPositiveDesirability { index: usize },
    #[error("desirability system is singular")]
    SingularSystem,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Solver(#[from] crate::ddp::DdpError),
}

/// Per-step change of the expected stage cost when the target belief moves
/// from `prior` to `posterior`, with the two expectations kept for audit.
#[derive(Debug, Clone)]
pub struct CostShiftVector {
    /// `dL(t)` for `t = 0..=T`; the terminal entry uses the final weight.
    pub values: Vec<f64>,
    /// `(posterior expectation, prior expectation)` per step.
    pub components: Vec<(f64, f64)>,
}

impl CostShiftVector {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }
}

/// The matrix of the linear desirability system over one-indexed steps
/// `start..=T` (`start >= 1`).
#[derive(Debug, Clone)]
pub struct DesirabilityMatrix {
    /// `M = diag(e^{-dL}) P`, square of size `T - start + 1`.
    pub m: DMatrix<f64>,
    /// Clamped `dL` entries aligned with the covered steps.
    pub delta_l: Vec<f64>,
    /// Normalized step weights aligned with the covered steps.
    pub weights: Vec<f64>,
    /// First one-indexed step covered; the last row is the terminal step.
    pub start: usize,
    /// Whether any `dL` hit the clamp.
    pub clamped: bool,
    /// `min_t (e^{dL(t)} - p(o_t))` over non-terminal rows; a positive margin
    /// certifies the partitioned system is invertible.
    pub invertibility_margin: f64,
}

impl DesirabilityMatrix {
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }
}

/// Solution of the desirability system.
#[derive(Debug, Clone)]
pub struct DesirabilitySolution {
    /// `z` per covered step, all positive.
    pub z: Vec<f64>,
    /// Normalization terms `g(t) = sum_{j>=t} p(o_j) z_j`.
    pub g: Vec<f64>,
    /// Value shifts; terminal entry is the boundary `dV(T) = dL(T)`.
    pub delta_v: Vec<f64>,
    /// Condition estimate of the solved block (diagonal ratio of the LU
    /// factor).
    pub condition: f64,
    /// Max residual of `z_t = e^{-dL(t)} g(t)` over non-terminal rows.
    pub residual: f64,
    /// Whether the ridge was applied.
    pub ridged: bool,
    /// `T e^{-dV_m} - max_t g(t)`, nonnegative when the normalization-term
    /// bound holds (`dV_m` = smallest value shift).
    pub bound_margin: f64,
}

/// Feedforward corrections over the full horizon; entries outside the
/// adjusted range are zero.
#[derive(Debug, Clone)]
pub struct AdjustmentResult {
    pub delta_u: Vec<ControlVector>,
    /// State-space value gradients `dV_x`, one per control step (the lift of
    /// the target-space gradient at the successor step).
    pub lifted: Vec<DVector<f64>>,
    /// `u* = u_bar + du`.
    pub controls: Vec<ControlVector>,
}

/// Expected stage cost under a mixture belief over the target:
/// `E[1/2 (Cx - o)' W (Cx - o)] = sum_k pi_k [1/2 (Cx - mu_k)' W (Cx - mu_k)
/// + 1/2 tr(W S_k)]`.
fn expected_tracking_cost(
    output: &DVector<f64>,
    weight: &DMatrix<f64>,
    belief: &MixtureBelief,
) -> f64 {
    belief
        .components
        .iter()
        .map(|(pi, c)| {
            let res = output - &c.mean;
            pi * (0.5 * res.dot(&(weight * &res)) + 0.5 * (weight * &c.cov).trace())
        })
        .sum()
}

/// Closed-form `dL(t) = E_posterior[L] - E_prior[L]` along the trajectory;
/// control terms cancel, the terminal entry uses the final weight.
pub fn delta_running_cost(
    traj: &NominalTrajectory,
    prior: &BeliefTrajectory,
    posterior: &BeliefTrajectory,
    model: &dyn SystemModel,
) -> Result<CostShiftVector, AdjustError> {
    let horizon = traj.horizon();
    if prior.horizon() != horizon || posterior.horizon() != horizon {
        return Err(AdjustError::HorizonMismatch {
            traj: horizon,
            belief: prior.horizon(),
        });
    }
    if prior.target_dim() != model.target_dim() {
        return Err(AdjustError::Belief(BeliefError::DimensionMismatch(
            prior.target_dim(),
            model.target_dim(),
        )));
    }
    let mut values = Vec::with_capacity(horizon + 1);
    let mut components = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let weight = if t == horizon {
            model.final_weight()
        } else {
            model.tracking_weight()
        };
        let output = model.track_output(&traj.states[t]);
        let post = expected_tracking_cost(&output, weight, posterior.belief_at(t));
        let pri = expected_tracking_cost(&output, weight, prior.belief_at(t));
        values.push(post - pri);
        components.push((post, pri));
    }
    Ok(CostShiftVector { values, components })
}

/// Assemble `M` over one-indexed steps `start..=T` from the cost shifts and the
/// (normalized) step weights for that range.
pub fn build_m(shift: &CostShiftVector, weights: &[f64], start: usize) -> DesirabilityMatrix {
    let horizon = shift.horizon();
    assert!(start >= 1 && start <= horizon, "start must lie in 1..=T");
    let dim = horizon - start + 1;
    assert_eq!(weights.len(), dim, "weights must cover start..=T");

    let wsum: f64 = weights.iter().sum();
    debug_assert!((wsum - 1.0).abs() < 1e-6, "weights should be normalized");
    let weights: Vec<f64> = weights.iter().map(|w| w / wsum).collect();

    let mut clamped = false;
    let delta_l: Vec<f64> = (start..=horizon)
        .map(|t| {
            let v = shift.values[t];
            if v.abs() > DELTA_L_CLAMP {
                clamped = true;
                v.clamp(-DELTA_L_CLAMP, DELTA_L_CLAMP)
            } else {
                v
            }
        })
        .collect();

    let mut m = DMatrix::zeros(dim, dim);
    for row in 0..dim {
        let scale = (-delta_l[row]).exp();
        for col in row..dim {
            m[(row, col)] = scale * weights[col];
        }
    }
    let invertibility_margin = (0..dim.saturating_sub(1))
        .map(|t| delta_l[t].exp() - weights[t])
        .fold(f64::INFINITY, f64::min);

    DesirabilityMatrix {
        m,
        delta_l,
        weights,
        start,
        clamped,
        invertibility_margin,
    }
}

/// Solve the partitioned system once against the terminal boundary, then
/// compute normalization terms and value shifts.
///
/// The block `diag(e^{dL(N)}) - P_N` is upper triangular with constant
/// columns, so the solve reduces to one backward recursion over the tail
/// sums: `z_t = (sum_{j>t} p_j z_j) / (e^{dL(t)} - p_t)`. A dense solve of
/// the full system is kept as the independent test oracle.
pub fn solve_desirability(
    matrix: &DesirabilityMatrix,
) -> Result<DesirabilitySolution, AdjustError> {
    let dim = matrix.dim();
    let last = dim - 1;
    let z_terminal = (-matrix.delta_l[last]).exp();

    let mut z = vec![0.0; dim];
    z[last] = z_terminal;
    let mut condition = 1.0;
    let mut ridged = false;

    if dim > 1 {
        condition = denominator_condition(matrix, 0.0);
        let ridge = if condition > CONDITION_LIMIT {
            ridged = true;
            condition = denominator_condition(matrix, RIDGE);
            RIDGE
        } else {
            0.0
        };
        back_substitute(matrix, z_terminal, ridge, &mut z)?;
    }

    // g(t) = sum_{j >= t} p_j z_j by backward accumulation.
    let mut g = vec![0.0; dim];
    let mut acc = 0.0;
    for t in (0..dim).rev() {
        acc += matrix.weights[t] * z[t];
        g[t] = acc;
    }

    let mut delta_v = vec![0.0; dim];
    for t in 0..dim {
        delta_v[t] = if t == last {
            matrix.delta_l[last] // terminal boundary: z(T) = e^{-dL(T)}
        } else {
            matrix.delta_l[t] - g[t].ln()
        };
    }

    let residual = (0..last)
        .map(|t| (z[t] - (-matrix.delta_l[t]).exp() * g[t]).abs())
        .fold(0.0, f64::max);

    let dv_min = delta_v.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = g.iter().cloned().fold(0.0, f64::max);
    let bound_margin = dim as f64 * (-dv_min).exp() - g_max;
    debug_assert!(
        bound_margin >= -1e-9 * (1.0 + g_max),
        "normalization-term bound violated: margin {bound_margin}"
    );

    Ok(DesirabilitySolution {
        z,
        g,
        delta_v,
        condition,
        residual,
        ridged,
        bound_margin,
    })
}

/// Backward recursion for the non-terminal entries; `z[last]` must already
/// hold the boundary value.
fn back_substitute(
    matrix: &DesirabilityMatrix,
    z_terminal: f64,
    ridge: f64,
    z: &mut [f64],
) -> Result<(), AdjustError> {
    let last = matrix.dim() - 1;
    let mut tail = matrix.weights[last] * z_terminal;
    for t in (0..last).rev() {
        let denom = matrix.delta_l[t].exp() - matrix.weights[t] + ridge;
        let value = tail / denom;
        if !(value > 0.0) || !value.is_finite() {
            return Err(AdjustError::NonPositiveDesirability { index: t });
        }
        z[t] = value;
        tail += matrix.weights[t] * value;
    }
    Ok(())
}

/// Condition estimate of the triangular block: spread of its diagonal
/// `e^{dL(t)} - p_t` over the non-terminal rows.
fn denominator_condition(matrix: &DesirabilityMatrix, ridge: f64) -> f64 {
    let last = matrix.dim() - 1;
    let mut max = 0.0f64;
    let mut min = f64::INFINITY;
    for t in 0..last {
        let a = (matrix.delta_l[t].exp() - matrix.weights[t] + ridge).abs();
        max = max.max(a);
        min = min.min(a);
    }
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// Chain rule through the closed-form `dL` and the solved system.
    Analytic,
    /// Central differences on the posterior means, re-solving the system per
    /// perturbation through the cached factorization.
    FiniteDifference,
}

/// Gradient of each step's value shift with respect to its target-point
/// argument `o_t`, one `d`-vector per covered step.
///
/// Moving the argument translates the posterior and prior branches of
/// `dL(t)` together, so the quadratic terms cancel and
/// `dL(t; delta) = dL(t) + delta' W (mean' - mean)` exactly; with no shift
/// the gradient vanishes identically. Through the solved system,
/// `d dV(t)/d dL(t) = 1 / (1 - p_t e^{-dL(t)})` for non-terminal steps
/// (the terminal boundary passes `dL` through unchanged).
pub fn value_gradient(
    solution: &DesirabilitySolution,
    matrix: &DesirabilityMatrix,
    traj: &NominalTrajectory,
    prior: &BeliefTrajectory,
    posterior: &BeliefTrajectory,
    model: &dyn SystemModel,
    mode: GradientMode,
) -> Vec<DVector<f64>> {
    let dim = matrix.dim();
    let horizon = traj.horizon();
    let last = dim - 1;

    // W (mean' - mean) per covered step; terminal uses the final weight.
    let shift_grad = |i: usize| -> DVector<f64> {
        let t = matrix.start + i;
        let weight = if t == horizon {
            model.final_weight()
        } else {
            model.tracking_weight()
        };
        weight * (posterior.belief_at(t).mean() - prior.belief_at(t).mean())
    };

    match mode {
        GradientMode::Analytic => (0..dim)
            .map(|i| {
                let scale = if i == last {
                    1.0
                } else {
                    1.0 / (1.0 - matrix.weights[i] * (-matrix.delta_l[i]).exp())
                };
                shift_grad(i) * scale
            })
            .collect(),
        GradientMode::FiniteDifference => {
            let d = model.target_dim();
            (0..dim)
                .map(|i| {
                    let t = matrix.start + i;
                    let w_shift = shift_grad(i);
                    let mean = posterior.belief_at(t).mean();
                    let mut grad = DVector::zeros(d);
                    for axis in 0..d {
                        let h = 1e-4 * (1.0 + mean[axis].abs());
                        let dv = |sign: f64| {
                            let dl_new = matrix.delta_l[i] + sign * h * w_shift[axis];
                            perturbed_delta_v(matrix, solution, i, dl_new)
                        };
                        grad[axis] = (dv(1.0) - dv(-1.0)) / (2.0 * h);
                    }
                    grad
                })
                .collect()
        }
    }
}

/// `dV(i)` after replacing `dL(i)` with `dl_new`, re-solved through the
/// cached base solution: among indices `>= i` only `z_i` responds to its own
/// `dL`, so the perturbed row re-solves in constant time from the tail sum.
fn perturbed_delta_v(
    matrix: &DesirabilityMatrix,
    solution: &DesirabilitySolution,
    i: usize,
    dl_new: f64,
) -> f64 {
    let last = matrix.dim() - 1;
    if i == last {
        // Boundary: dV(T) = dL(T).
        return dl_new;
    }
    let tail = solution.g[i] - matrix.weights[i] * solution.z[i];
    let z_new = tail / (dl_new.exp() - matrix.weights[i]);
    let g_new = matrix.weights[i] * z_new + tail;
    dl_new - g_new.ln()
}

/// Lift target-space gradients to state space through the tracking output's
/// Jacobian and convert them to feedforward corrections:
/// `dV_x = -C_x' (d dV / d o)`, `du_t = -R^-1 B_t' dV_x(t+1)`.
///
/// `grads[i]` belongs to one-indexed step `start + i`; it adjusts the control that
/// *enters* that step, `u_{start+i-1}`.
pub fn control_adjustment(
    grads: &[DVector<f64>],
    start: usize,
    traj: &NominalTrajectory,
    model: &dyn SystemModel,
    fd: FdPolicy,
) -> Result<AdjustmentResult, AdjustError> {
    let horizon = traj.horizon();
    assert!(
        start >= 1 && start + grads.len() - 1 == horizon,
        "grads must cover start..=T"
    );
    let m = model.control_dim();
    let n = model.state_dim();
    let r_chol = model
        .control_weight()
        .clone()
        .cholesky()
        .expect("control weight is positive definite");

    let mut delta_u = vec![DVector::zeros(m); horizon];
    let mut lifted = vec![DVector::zeros(n); horizon];
    for (i, grad) in grads.iter().enumerate() {
        let t_step = start + i; // value-shift step
        let t_ctrl = t_step - 1; // control entering it
        let cx = model.track_jacobian(&traj.states[t_step]);
        let dv_dx = -(cx.transpose() * grad);
        let (_, b) = linearize(
            model,
            &traj.states[t_ctrl],
            &traj.controls[t_ctrl],
            t_ctrl,
            fd,
        )?;
        delta_u[t_ctrl] = -r_chol.solve(&(b.transpose() * &dv_dx));
        lifted[t_ctrl] = dv_dx;
    }
    let controls = traj
        .controls
        .iter()
        .zip(&delta_u)
        .map(|(u, du)| u + du)
        .collect();
    Ok(AdjustmentResult {
        delta_u,
        lifted,
        controls,
    })
}
