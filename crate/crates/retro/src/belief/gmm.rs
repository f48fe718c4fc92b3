//! Mixture-of-parabolas forecaster.
//!
//! Each component is a ballistic curve `y(tau) = p0 + v0 tau + 1/2 g tau^2`
//! with isotropic Gaussian residuals; EM assigns observations to components
//! and refits the launch parameters by weighted least squares. The fitted
//! components project to per-step position mixtures over the horizon.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    BeliefError, BeliefTrajectory, GaussianBelief, MixtureBelief, Observation, VARIANCE_FLOOR,
};

#[derive(Debug, Clone)]
pub struct GmmSettings {
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
    pub gravity: DVector<f64>,
    pub dt: f64,
}

impl GmmSettings {
    pub fn new(gravity: DVector<f64>, dt: f64) -> Self {
        Self {
            seed: 0,
            max_iters: 200,
            tol: 1e-10,
            restarts: 3,
            gravity,
            dt,
        }
    }
}

/// Fitted mixture plus EM diagnostics.
#[derive(Debug, Clone)]
pub struct GmmFit {
    pub trajectory: BeliefTrajectory,
    /// `responsibilities[i][k]`: posterior weight of component `k` for
    /// observation `i`.
    pub responsibilities: Vec<Vec<f64>>,
    /// Log-likelihood after each EM iteration of the winning restart.
    pub log_likelihood: Vec<f64>,
    /// True when some component's residual variance hit the floor.
    pub degenerate: bool,
}

struct Component {
    weight: f64,
    theta: DVector<f64>, // [p0; v0]
    sigma2: f64,
    info: DMatrix<f64>, // sum_i r_ik X_i' X_i of the last M-step
}

/// EM fit of `k` ballistic components over `observations`, projected to
/// per-step position beliefs along `0..=horizon`. Deterministic per seed.
pub fn forecast_gmm(
    observations: &[Observation],
    k: usize,
    horizon: usize,
    settings: &GmmSettings,
) -> Result<GmmFit, BeliefError> {
    assert!(k >= 1, "need at least one component");
    if observations.len() < k {
        return Err(BeliefError::DimensionMismatch(observations.len(), k));
    }
    let d = observations[0].y.len();
    if observations.iter().any(|o| o.y.len() != d) {
        return Err(BeliefError::DimensionMismatch(d, 0));
    }

    // Detrended targets and design rows: y~_i = y_i - 1/2 g tau_i^2,
    // X_i = [I, tau_i I].
    let taus: Vec<f64> = observations
        .iter()
        .map(|o| o.t as f64 * settings.dt)
        .collect();
    let detrended: Vec<DVector<f64>> = observations
        .iter()
        .zip(&taus)
        .map(|(o, tau)| &o.y - &settings.gravity * (0.5 * tau * tau))
        .collect();
    let designs: Vec<DMatrix<f64>> = taus.iter().map(|&tau| design_row(d, tau)).collect();

    let mut best: Option<(f64, Vec<Component>, Vec<Vec<f64>>, Vec<f64>)> = None;
    for restart in 0..settings.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(restart as u64));
        let (comps, resp, ll_trace) = em_run(&detrended, &designs, k, d, settings, &mut rng);
        let ll = *ll_trace.last().unwrap();
        if best.as_ref().map_or(true, |(b, ..)| ll > *b) {
            best = Some((ll, comps, resp, ll_trace));
        }
        if k == 1 {
            break; // single component: EM is deterministic, one run suffices
        }
    }
    let (_, comps, responsibilities, log_likelihood) = best.unwrap();

    let degenerate = comps.iter().any(|c| c.sigma2 <= VARIANCE_FLOOR * 1.01);
    let beliefs = project_to_horizon(&comps, d, horizon, settings);
    Ok(GmmFit {
        trajectory: BeliefTrajectory::from_marginals(beliefs),
        responsibilities,
        log_likelihood,
        degenerate,
    })
}

fn design_row(d: usize, tau: f64) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(d, 2 * d);
    for i in 0..d {
        x[(i, i)] = 1.0;
        x[(i, d + i)] = tau;
    }
    x
}

fn em_run(
    ys: &[DVector<f64>],
    xs: &[DMatrix<f64>],
    k: usize,
    d: usize,
    settings: &GmmSettings,
    rng: &mut ChaCha8Rng,
) -> (Vec<Component>, Vec<Vec<f64>>, Vec<f64>) {
    let n = ys.len();
    // Random soft assignment, then start with an M-step.
    let mut resp: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let mut comps = m_step(ys, xs, &resp, k, d);
    let mut ll_trace = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    for _ in 0..settings.max_iters {
        let (new_resp, ll) = e_step(ys, xs, &comps, d);
        resp = new_resp;
        comps = m_step(ys, xs, &resp, k, d);
        ll_trace.push(ll);
        if (ll - prev_ll).abs() < settings.tol * (1.0 + ll.abs()) {
            break;
        }
        prev_ll = ll;
    }
    (comps, resp, ll_trace)
}

fn e_step(
    ys: &[DVector<f64>],
    xs: &[DMatrix<f64>],
    comps: &[Component],
    d: usize,
) -> (Vec<Vec<f64>>, f64) {
    let mut resp = Vec::with_capacity(ys.len());
    let mut ll = 0.0;
    for (y, x) in ys.iter().zip(xs) {
        let logs: Vec<f64> = comps
            .iter()
            .map(|c| {
                let r = y - x * &c.theta;
                c.weight.max(1e-300).ln()
                    - 0.5 * (d as f64) * (2.0 * std::f64::consts::PI * c.sigma2).ln()
                    - 0.5 * r.norm_squared() / c.sigma2
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        ll += max + sum.ln();
        resp.push(logs.iter().map(|l| (l - max).exp() / sum).collect());
    }
    (resp, ll)
}

fn m_step(
    ys: &[DVector<f64>],
    xs: &[DMatrix<f64>],
    resp: &[Vec<f64>],
    k: usize,
    d: usize,
) -> Vec<Component> {
    let n = ys.len() as f64;
    (0..k)
        .map(|j| {
            let mut info = DMatrix::zeros(2 * d, 2 * d);
            let mut rhs = DVector::zeros(2 * d);
            let mut mass = 0.0;
            for ((y, x), r) in ys.iter().zip(xs).zip(resp) {
                let w = r[j];
                info += x.transpose() * x * w;
                rhs += x.transpose() * y * w;
                mass += w;
            }
            let mut info_reg = info.clone();
            for i in 0..2 * d {
                info_reg[(i, i)] += 1e-9;
            }
            let theta = info_reg
                .clone()
                .lu()
                .solve(&rhs)
                .unwrap_or_else(|| DVector::zeros(2 * d));
            let mut sse = 0.0;
            for ((y, x), r) in ys.iter().zip(xs).zip(resp) {
                sse += r[j] * (y - x * &theta).norm_squared();
            }
            let sigma2 = (sse / (d as f64 * mass.max(1e-300))).max(VARIANCE_FLOOR);
            Component {
                weight: mass / n,
                theta,
                sigma2,
                info,
            }
        })
        .collect()
}

fn project_to_horizon(
    comps: &[Component],
    d: usize,
    horizon: usize,
    settings: &GmmSettings,
) -> Vec<MixtureBelief> {
    // Launch-parameter covariance per component: sigma^2 (sum r X'X)^-1.
    let theta_covs: Vec<DMatrix<f64>> = comps
        .iter()
        .map(|c| {
            let mut info_reg = c.info.clone();
            for i in 0..2 * d {
                info_reg[(i, i)] += 1e-9;
            }
            info_reg
                .lu()
                .solve(&DMatrix::identity(2 * d, 2 * d))
                .expect("regularized information matrix is invertible")
                * c.sigma2
        })
        .collect();
    (0..=horizon)
        .map(|t| {
            let tau = t as f64 * settings.dt;
            let x = design_row(d, tau);
            let trend = &settings.gravity * (0.5 * tau * tau);
            let components = comps
                .iter()
                .zip(&theta_covs)
                .map(|(c, cov)| {
                    (
                        c.weight,
                        GaussianBelief::new(&x * &c.theta + &trend, &x * cov * x.transpose()),
                    )
                })
                .collect();
            MixtureBelief { components }
        })
        .collect()
}
