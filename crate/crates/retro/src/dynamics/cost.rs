//! Quadratic target-tracking cost and its derivatives.

use nalgebra::{DMatrix, DVector};

use super::{ControlVector, StateVector, SystemModel};

/// First and second derivatives of the stage cost at `(x, u; o)`.
#[derive(Debug, Clone)]
pub struct CostDerivatives {
    pub lx: DVector<f64>,
    pub lu: DVector<f64>,
    pub lxx: DMatrix<f64>,
    pub luu: DMatrix<f64>,
    pub lux: DMatrix<f64>,
}

/// `L(x, u; o) = 1/2 u'Ru + 1/2 (C(x)-o)' W (C(x)-o)`.
pub fn stage_cost(
    model: &dyn SystemModel,
    x: &StateVector,
    u: &ControlVector,
    target: &DVector<f64>,
) -> f64 {
    let r = model.control_weight();
    let res = model.track_output(x) - target;
    0.5 * (u.dot(&(r * u)) + res.dot(&(model.tracking_weight() * &res)))
}

/// `Lf(x; o) = 1/2 (C(x)-o)' Wf (C(x)-o)`.
pub fn final_cost(model: &dyn SystemModel, x: &StateVector, target: &DVector<f64>) -> f64 {
    let res = model.track_output(x) - target;
    0.5 * res.dot(&(model.final_weight() * &res))
}

/// Exact derivatives of the stage cost. The Hessian in `x` includes the
/// output-map curvature term when the model provides `track_hessians`.
pub fn stage_cost_derivatives(
    model: &dyn SystemModel,
    x: &StateVector,
    u: &ControlVector,
    target: &DVector<f64>,
) -> CostDerivatives {
    let w = model.tracking_weight();
    let r = model.control_weight();
    let cx = model.track_jacobian(x);
    let res = model.track_output(x) - target;
    let w_res = w * &res;

    let lx = cx.transpose() * &w_res;
    let lu = r * u;
    let mut lxx = cx.transpose() * w * &cx;
    if let Some(hessians) = model.track_hessians(x) {
        for (k, h) in hessians.iter().enumerate() {
            lxx += h * w_res[k];
        }
    }
    CostDerivatives {
        lx,
        lu,
        lxx,
        luu: r.clone(),
        lux: DMatrix::zeros(model.control_dim(), model.state_dim()),
    }
}

/// Exact gradient and Hessian of the final cost.
pub fn final_cost_derivatives(
    model: &dyn SystemModel,
    x: &StateVector,
    target: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let wf = model.final_weight();
    let cx = model.track_jacobian(x);
    let res = model.track_output(x) - target;
    let w_res = wf * &res;
    let grad = cx.transpose() * &w_res;
    let mut hess = cx.transpose() * wf * &cx;
    if let Some(hessians) = model.track_hessians(x) {
        for (k, h) in hessians.iter().enumerate() {
            hess += h * w_res[k];
        }
    }
    (grad, hess)
}
