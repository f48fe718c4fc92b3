//! DDP/iLQR trajectory optimizer.
//!
//! Backward pass: expand the state-action value `Q(x_t, u_t) = L(x_t, u_t) +
//! V(x_{t+1})` to second order around the nominal pair, regularize `Q_uu`
//! (Levenberg-Marquardt), and read off feedforward/feedback gains
//! `K_r = -(Q_uu + reg I)^-1 Q_u`, `K_g = -(Q_uu + reg I)^-1 Q_ux`.
//! Forward pass: replay the dynamics under `u_t + eps K_r + K_g (x - x_t)`
//! with a backtracking line search on `eps`. Repeat until the cost settles.
//!
//! By default the second-order dynamics tensors are dropped (Gauss-Newton /
//! iLQR); `full_ddp` turns them back on for models that supply them.

mod riccati;

pub use riccati::{riccati_lqr, RiccatiError};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dynamics::{
    final_cost_derivatives, linearize, rollout, stage_cost_derivatives, ControlVector,
    DynamicsError, FdPolicy, NominalTrajectory, StateVector, SystemModel, TargetSeries,
};

const REG_MIN: f64 = 1e-10;
const REG_MAX: f64 = 1e8;
const LINE_SEARCH_STEPS: u32 = 11; // eps in {1, 1/2, ..., 2^-10}
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum DdpError {
    #[error("Q_uu not positive definite at step {t} even after regularization")]
    NotPositiveDefinite { t: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Second-order expansion of `Q(x_t + dx, u_t + du)` around the nominal pair.
#[derive(Debug, Clone)]
pub struct QExpansion {
    pub qx: DVector<f64>,
    pub qu: DVector<f64>,
    pub qxx: DMatrix<f64>,
    pub quu: DMatrix<f64>,
    pub qux: DMatrix<f64>,
}

/// Per-step gains plus the expected-improvement bookkeeping the line search
/// uses: `linear[t] = K_r' Q_u`, `quadratic[t] = 1/2 K_r' Q_uu K_r`.
#[derive(Debug, Clone)]
pub struct GainSchedule {
    pub feedforward: Vec<DVector<f64>>,
    pub feedback: Vec<DMatrix<f64>>,
    pub linear: Vec<f64>,
    pub quadratic: Vec<f64>,
}

impl GainSchedule {
    /// Predicted cost change of a forward pass at step scale `eps`
    /// (negative means improvement).
    pub fn predicted_change(&self, eps: f64) -> f64 {
        let d1: f64 = self.linear.iter().sum();
        let d2: f64 = self.quadratic.iter().sum();
        eps * d1 + eps * eps * d2
    }
}

/// Value function along the nominal trajectory: scalar cost-to-go plus the
/// gradient/Hessian from the backward recursion.
#[derive(Debug, Clone)]
pub struct ValueTrace {
    pub v: Vec<f64>,
    pub vx: Vec<DVector<f64>>,
    pub vxx: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub trajectory: NominalTrajectory,
    pub gains: GainSchedule,
    pub value_trace: ValueTrace,
    pub iterations: usize,
    pub converged: bool,
    pub cost_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub reg_init: f64,
    pub full_ddp: bool,
    pub fd_policy: FdPolicy,
    /// Initial control sequence; zeros when empty.
    pub init_controls: Vec<ControlVector>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-8,
            reg_init: 1e-10,
            full_ddp: false,
            fd_policy: FdPolicy::Allow,
            init_controls: Vec::new(),
        }
    }
}

/// Q-expansion at one step given the next-step value expansion.
pub fn q_expansion(
    model: &dyn SystemModel,
    x: &StateVector,
    u: &ControlVector,
    t: usize,
    target: &DVector<f64>,
    v_next: (&DVector<f64>, &DMatrix<f64>),
    full_ddp: bool,
    fd: FdPolicy,
) -> Result<QExpansion, DdpError> {
    let (vx, vxx) = v_next;
    let (fx, fu) = linearize(model, x, u, t, fd)?;
    let l = stage_cost_derivatives(model, x, u, target);

    let qx = &l.lx + fx.transpose() * vx;
    let qu = &l.lu + fu.transpose() * vx;
    let vxx_fx = vxx * &fx;
    let mut qxx = &l.lxx + fx.transpose() * &vxx_fx;
    let mut quu = &l.luu + fu.transpose() * vxx * &fu;
    let mut qux = &l.lux + fu.transpose() * &vxx_fx;

    if full_ddp {
        if let Some(h) = model.dynamics_hessians(x, u, t) {
            for k in 0..model.state_dim() {
                qxx += &h.f_xx[k] * vx[k];
                qux += &h.f_ux[k] * vx[k];
                quu += &h.f_uu[k] * vx[k];
            }
        }
    }

    qxx = (&qxx + qxx.transpose()) * 0.5;
    quu = (&quu + quu.transpose()) * 0.5;
    Ok(QExpansion {
        qx,
        qu,
        qxx,
        quu,
        qux,
    })
}

/// Backward sweep from the final-cost expansion; fails with the offending
/// step index when the regularized `Q_uu` is not positive definite.
pub fn backward_pass(
    traj: &NominalTrajectory,
    targets: &TargetSeries,
    model: &dyn SystemModel,
    reg: f64,
    full_ddp: bool,
    fd: FdPolicy,
) -> Result<(GainSchedule, ValueTrace), DdpError> {
    let horizon = traj.horizon();
    assert_eq!(targets.len(), horizon + 1);
    let n = model.state_dim();
    let m = model.control_dim();

    let mut vx = vec![DVector::zeros(n); horizon + 1];
    let mut vxx = vec![DMatrix::zeros(n, n); horizon + 1];
    let (gf, hf) = final_cost_derivatives(model, &traj.states[horizon], &targets[horizon]);
    vx[horizon] = gf;
    vxx[horizon] = hf;

    let mut feedforward = vec![DVector::zeros(m); horizon];
    let mut feedback = vec![DMatrix::zeros(m, n); horizon];
    let mut linear = vec![0.0; horizon];
    let mut quadratic = vec![0.0; horizon];

    for t in (0..horizon).rev() {
        let q = q_expansion(
            model,
            &traj.states[t],
            &traj.controls[t],
            t,
            &targets[t],
            (&vx[t + 1], &vxx[t + 1]),
            full_ddp,
            fd,
        )?;
        let mut quu_reg = q.quu.clone();
        for i in 0..m {
            quu_reg[(i, i)] += reg;
        }
        let chol = quu_reg
            .clone()
            .cholesky()
            .ok_or(DdpError::NotPositiveDefinite { t })?;
        let k_r = -chol.solve(&q.qu);
        let k_g = -chol.solve(&q.qux);

        linear[t] = k_r.dot(&q.qu);
        quadratic[t] = 0.5 * k_r.dot(&(&quu_reg * &k_r));

        let quu_kr = &quu_reg * &k_r;
        vx[t] =
            &q.qx + k_g.transpose() * &quu_kr + k_g.transpose() * &q.qu + q.qux.transpose() * &k_r;
        let mut v2 = &q.qxx
            + k_g.transpose() * &quu_reg * &k_g
            + k_g.transpose() * &q.qux
            + q.qux.transpose() * &k_g;
        v2 = (&v2 + v2.transpose()) * 0.5;
        vxx[t] = v2;

        feedforward[t] = k_r;
        feedback[t] = k_g;
    }

    // Scalar trace: cost-to-go of the nominal trajectory itself.
    let mut v = vec![0.0; horizon + 1];
    v[horizon] = traj.stage_costs[horizon];
    for t in (0..horizon).rev() {
        v[t] = traj.stage_costs[t] + v[t + 1];
    }

    Ok((
        GainSchedule {
            feedforward,
            feedback,
            linear,
            quadratic,
        },
        ValueTrace { v, vx, vxx },
    ))
}

/// Closed-loop replay `u_t + eps K_r + K_g (x - x_t)`; divergence is an error
/// the line search treats as a failed candidate.
pub fn forward_pass(
    traj: &NominalTrajectory,
    targets: &TargetSeries,
    gains: &GainSchedule,
    model: &dyn SystemModel,
    eps: f64,
) -> Result<NominalTrajectory, DynamicsError> {
    assert!(
        eps > 0.0 && eps <= 1.0,
        "line-search scale must be in (0, 1]"
    );
    let horizon = traj.horizon();
    let mut controls = Vec::with_capacity(horizon);
    let mut x = traj.states[0].clone();
    let mut states = vec![x.clone()];
    for t in 0..horizon {
        let du = &gains.feedback[t] * (&x - &traj.states[t]);
        let u = &traj.controls[t] + &gains.feedforward[t] * eps + du;
        let next = crate::dynamics::step(model, &x, &u, t, None)?;
        controls.push(u);
        states.push(next.clone());
        x = next;
    }
    let mut stage_costs = Vec::with_capacity(horizon + 1);
    for t in 0..horizon {
        stage_costs.push(crate::dynamics::stage_cost(
            model,
            &states[t],
            &controls[t],
            &targets[t],
        ));
    }
    stage_costs.push(crate::dynamics::final_cost(
        model,
        &states[horizon],
        &targets[horizon],
    ));
    let total_cost = stage_costs.iter().sum();
    Ok(NominalTrajectory {
        states,
        controls,
        stage_costs,
        total_cost,
    })
}

/// Full solve: iterate backward/forward passes until `|dJ| < tol (1 + |J|)`
/// or the predicted improvement drops below `tol`. Hitting `max_iters` (or
/// exhausting regularization) returns the best trajectory so far with
/// `converged = false`.
pub fn solve(
    model: &dyn SystemModel,
    x0: &StateVector,
    targets: &TargetSeries,
    opts: &SolveOptions,
) -> Result<SolveReport, DdpError> {
    let horizon = targets.len() - 1;
    let controls = if opts.init_controls.is_empty() {
        vec![DVector::zeros(model.control_dim()); horizon]
    } else {
        assert_eq!(opts.init_controls.len(), horizon);
        opts.init_controls.clone()
    };
    let mut traj = rollout(model, x0, &controls, targets)?;
    let mut cost_history = vec![traj.total_cost];
    let mut reg = opts.reg_init.clamp(REG_MIN, REG_MAX);
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < opts.max_iters {
        let (gains, _trace) = match escalate_backward(&traj, targets, model, &mut reg, opts)? {
            Some(gt) => gt,
            None => break, // regularization exhausted
        };

        let expected_full = -gains.predicted_change(1.0);
        if expected_full < opts.tol {
            converged = true;
            break;
        }

        let mut accepted = false;
        for k in 0..LINE_SEARCH_STEPS {
            let eps = 0.5f64.powi(k as i32);
            let candidate = match forward_pass(&traj, targets, &gains, model, eps) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let actual = traj.total_cost - candidate.total_cost;
            let expected = -gains.predicted_change(eps);
            if actual.is_finite() && actual >= ARMIJO * expected {
                let dj = actual;
                traj = candidate;
                cost_history.push(traj.total_cost);
                iterations += 1;
                reg = (reg * 0.5).max(REG_MIN);
                accepted = true;
                if dj.abs() < opts.tol * (1.0 + traj.total_cost.abs()) {
                    converged = true;
                    break 'outer;
                }
                break;
            }
        }
        if !accepted {
            reg *= 10.0;
            if reg > REG_MAX {
                break;
            }
        }
    }

    // Gains and value trace consistent with the final trajectory.
    let (gains, value_trace) = match escalate_backward(&traj, targets, model, &mut reg, opts)? {
        Some(gt) => gt,
        None => {
            return Err(DdpError::NotPositiveDefinite { t: 0 });
        }
    };

    Ok(SolveReport {
        trajectory: traj,
        gains,
        value_trace,
        iterations,
        converged,
        cost_history,
    })
}

fn escalate_backward(
    traj: &NominalTrajectory,
    targets: &TargetSeries,
    model: &dyn SystemModel,
    reg: &mut f64,
    opts: &SolveOptions,
) -> Result<Option<(GainSchedule, ValueTrace)>, DdpError> {
    loop {
        match backward_pass(traj, targets, model, *reg, opts.full_ddp, opts.fd_policy) {
            Ok(gt) => return Ok(Some(gt)),
            Err(DdpError::NotPositiveDefinite { .. }) => {
                *reg *= 10.0;
                if *reg > REG_MAX {
                    return Ok(None);
                }
            }
            Err(e) => return Err(e),
        }
    }
}
