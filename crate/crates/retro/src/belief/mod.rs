//! Target beliefs: per-step distributions over where the target will be,
//! updated from streaming observations, plus the KL machinery that measures
//! how far an update moved the forecast.
//!
//! The default forecaster is a linear-Gaussian ballistic filter over the
//! launch state `[position; velocity]`: the prior trajectory propagates the
//! launch distribution through fixed projectile kinematics, and each
//! observation conditions the current step's state belief, after which the
//! future is re-propagated. A mixture-of-parabolas EM forecaster
//! ([`forecast_gmm`]) is available behind a configuration switch.

mod gmm;
mod kl;

pub use gmm::{forecast_gmm, GmmSettings};
pub use kl::{
    alpha_bound, kl_gaussian, kl_gaussian_1d, kl_mixture_mc, kl_shift, KlEstimate, McSettings,
};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

/// Covariances get this ridge on construction; keeps KL, densities, and EM
/// away from degeneracy.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("non-positive variance in KL computation")]
    NonPositiveVariance,
    #[error("belief dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("observation time {t} outside horizon {horizon}")]
    OutsideHorizon { t: usize, horizon: usize },
    #[error("singular innovation covariance at step {t}")]
    SingularInnovation { t: usize },
    #[error("this belief trajectory has no filter model attached")]
    NoFilter,
}

/// Gaussian over target positions; covariance symmetric positive definite
/// (floored at `VARIANCE_FLOOR * I`).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        assert_eq!(mean.len(), cov.nrows());
        let mut cov = (&cov + cov.transpose()) * 0.5;
        for i in 0..cov.nrows() {
            cov[(i, i)] += VARIANCE_FLOOR;
        }
        Self { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let d = self.dim() as f64;
        let chol = self
            .cov
            .clone()
            .cholesky()
            .expect("belief covariance is SPD");
        let diff = x - &self.mean;
        let sol = chol.solve(&diff);
        let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det + diff.dot(&sol))
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let chol = self
            .cov
            .clone()
            .cholesky()
            .expect("belief covariance is SPD");
        let z = DVector::from_fn(self.dim(), |_, _| {
            rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
        });
        &self.mean + chol.l() * z
    }
}

/// Weighted Gaussian mixture; a plain Gaussian is the one-component case.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureBelief {
    /// `(weight, component)` pairs; weights sum to one.
    pub components: Vec<(f64, GaussianBelief)>,
}

impl MixtureBelief {
    pub fn gaussian(b: GaussianBelief) -> Self {
        Self {
            components: vec![(1.0, b)],
        }
    }

    pub fn dim(&self) -> usize {
        self.components[0].1.dim()
    }

    pub fn as_single(&self) -> Option<&GaussianBelief> {
        if self.components.len() == 1 {
            Some(&self.components[0].1)
        } else {
            None
        }
    }

    /// Mixture mean.
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim());
        for (w, c) in &self.components {
            m += &c.mean * *w;
        }
        m
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|(w, c)| w.max(1e-300).ln() + c.log_density(x))
            .collect();
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let pick: f64 = rng.gen();
        let mut acc = 0.0;
        for (w, c) in &self.components {
            acc += w;
            if pick <= acc {
                return c.sample(rng);
            }
        }
        self.components.last().unwrap().1.sample(rng)
    }

    /// The belief shifted rigidly by `delta` (every component mean moved).
    pub fn translated(&self, delta: &DVector<f64>) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|(w, c)| (*w, GaussianBelief::new(&c.mean + delta, c.cov.clone())))
                .collect(),
        }
    }
}

/// A timestamped position measurement with its noise scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: usize,
    pub y: DVector<f64>,
    pub noise: f64,
}

/// Record of one detected distribution shift: the step where the KL test
/// fired and the step-`t` marginals before and after the update.
#[derive(Debug, Clone)]
pub struct ShiftEvent {
    pub t: usize,
    pub kl: f64,
    pub prior: MixtureBelief,
    pub posterior: MixtureBelief,
}

/// Fixed linear-Gaussian projectile kinematics over `[position; velocity]`.
#[derive(Debug, Clone)]
pub struct BallisticModel {
    pub dim: usize,
    pub dt: f64,
    /// Acceleration vector, e.g. `(0, -9.8)`.
    pub gravity: DVector<f64>,
    /// Scale of the white-acceleration process noise.
    pub process_noise: f64,
}

impl BallisticModel {
    /// Step matrix over the stacked state: `[[I, dt I], [0, I]]`.
    pub fn step_matrix(&self) -> DMatrix<f64> {
        let d = self.dim;
        let mut f = DMatrix::identity(2 * d, 2 * d);
        for i in 0..d {
            f[(i, d + i)] = self.dt;
        }
        f
    }

    /// Affine drift from gravity: exact discrete kinematics
    /// `[1/2 g dt^2; g dt]`.
    pub fn drift(&self) -> DVector<f64> {
        let d = self.dim;
        let mut a = DVector::zeros(2 * d);
        for i in 0..d {
            a[i] = 0.5 * self.gravity[i] * self.dt * self.dt;
            a[d + i] = self.gravity[i] * self.dt;
        }
        a
    }

    /// Per-step process-noise covariance (white-acceleration model).
    pub fn process_cov(&self) -> DMatrix<f64> {
        let d = self.dim;
        let q = self.process_noise * self.process_noise;
        let dt = self.dt;
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            m[(i, i)] = q * dt.powi(4) / 4.0;
            m[(i, d + i)] = q * dt.powi(3) / 2.0;
            m[(d + i, i)] = q * dt.powi(3) / 2.0;
            m[(d + i, d + i)] = q * dt * dt;
        }
        m
    }
}

/// Per-step target beliefs along the horizon plus the scalar step weights
/// that enter the desirability matrix.
///
/// The ballistic path keeps the underlying state-space (position+velocity)
/// Gaussians so observations can condition all future steps; GMM-built
/// trajectories carry mixture marginals only.
#[derive(Debug, Clone)]
pub struct BeliefTrajectory {
    beliefs: Vec<MixtureBelief>,
    weights: Vec<f64>,
    filter: Option<BallisticFilter>,
}

#[derive(Debug, Clone)]
struct BallisticFilter {
    model: BallisticModel,
    /// State-space belief per step, indices `0..=T`.
    states: Vec<GaussianBelief>,
}

impl BeliefTrajectory {
    /// Build directly from per-step marginals (GMM path and tests).
    pub fn from_marginals(beliefs: Vec<MixtureBelief>) -> Self {
        let weights = self_weights(&beliefs);
        Self {
            beliefs,
            weights,
            filter: None,
        }
    }

    pub fn horizon(&self) -> usize {
        self.beliefs.len() - 1
    }

    pub fn target_dim(&self) -> usize {
        self.beliefs[0].dim()
    }

    /// Position-space belief at step `t`.
    pub fn belief_at(&self, t: usize) -> &MixtureBelief {
        &self.beliefs[t]
    }

    /// Normalized scalar weights `p(o_t)`, indices `0..=T`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mean path, one point per step (targets for a DDP solve).
    pub fn mean_path(&self) -> Vec<DVector<f64>> {
        self.beliefs.iter().map(|b| b.mean()).collect()
    }

    /// Kalman-condition the trajectory on one observation: update the step-`t`
    /// state belief, re-propagate the future, keep the past.
    pub fn observe_and_update(&self, obs: &Observation) -> Result<BeliefTrajectory, BeliefError> {
        let filter = self.filter.as_ref().ok_or(BeliefError::NoFilter)?;
        let horizon = self.horizon();
        if obs.t > horizon {
            return Err(BeliefError::OutsideHorizon { t: obs.t, horizon });
        }
        let d = filter.model.dim;
        if obs.y.len() != d {
            return Err(BeliefError::DimensionMismatch(obs.y.len(), d));
        }

        let state = &filter.states[obs.t];
        // Innovation over the position block: S = P_pos + noise^2 I.
        let p_pos = state.cov.view((0, 0), (d, d)).into_owned();
        let mut s = p_pos.clone();
        for i in 0..d {
            s[(i, i)] += obs.noise * obs.noise;
        }
        let s_chol = s
            .clone()
            .cholesky()
            .ok_or(BeliefError::SingularInnovation { t: obs.t })?;
        // Gain K = P H' S^-1 with H = [I 0]: columns of P against S.
        let p_cross = state.cov.view((0, 0), (2 * d, d)).into_owned();
        let gain = s_chol.solve(&p_cross.transpose()).transpose();
        let innovation = &obs.y - state.mean.rows(0, d);
        let new_mean = &state.mean + &gain * innovation;
        let mut h = DMatrix::zeros(d, 2 * d);
        for i in 0..d {
            h[(i, i)] = 1.0;
        }
        let new_cov = (DMatrix::identity(2 * d, 2 * d) - &gain * h) * &state.cov;
        let updated = GaussianBelief::new(new_mean, new_cov);

        let mut states = filter.states.clone();
        states[obs.t] = updated;
        propagate_from(&filter.model, &mut states, obs.t);
        Ok(Self::from_filter(filter.model.clone(), states))
    }

    fn from_filter(model: BallisticModel, states: Vec<GaussianBelief>) -> Self {
        let d = model.dim;
        let beliefs: Vec<MixtureBelief> = states
            .iter()
            .map(|s| {
                MixtureBelief::gaussian(GaussianBelief::new(
                    s.mean.rows(0, d).into_owned(),
                    s.cov.view((0, 0), (d, d)).into_owned(),
                ))
            })
            .collect();
        let weights = self_weights(&beliefs);
        Self {
            beliefs,
            weights,
            filter: Some(BallisticFilter { model, states }),
        }
    }
}

fn propagate_from(model: &BallisticModel, states: &mut Vec<GaussianBelief>, from: usize) {
    let f = model.step_matrix();
    let a = model.drift();
    let q = model.process_cov();
    for t in from..states.len() - 1 {
        let mean = &f * &states[t].mean + &a;
        let cov = &f * &states[t].cov * f.transpose() + &q;
        states[t + 1] = GaussianBelief::new(mean, cov);
    }
}

/// Prior belief trajectory from a launch distribution: propagate
/// `N(launch_mean, launch_cov)` through the projectile kinematics.
///
/// `launch_mean`/`launch_cov` live in the stacked `[position; velocity]`
/// space (dimension `2d`).
pub fn ballistic_prior(
    launch_mean: &DVector<f64>,
    launch_cov: &DMatrix<f64>,
    gravity: &DVector<f64>,
    dt: f64,
    process_noise: f64,
    horizon: usize,
) -> BeliefTrajectory {
    assert!(dt > 0.0, "dt must be positive");
    let d = gravity.len();
    assert_eq!(launch_mean.len(), 2 * d);
    let model = BallisticModel {
        dim: d,
        dt,
        gravity: gravity.clone(),
        process_noise,
    };
    let mut states = vec![GaussianBelief::new(launch_mean.clone(), launch_cov.clone())];
    states.resize(horizon + 1, states[0].clone());
    propagate_from(&model, &mut states, 0);
    BeliefTrajectory::from_filter(model, states)
}

/// Scalar step weights for a (prior, posterior) pair: the prior's predictive
/// density at the posterior mean of each step, normalized to sum one.
/// Sub-unit weights keep the desirability system invertible.
pub fn reweight(prior: &BeliefTrajectory, posterior: &BeliefTrajectory) -> Vec<f64> {
    assert_eq!(prior.horizon(), posterior.horizon());
    let raw: Vec<f64> = (0..=prior.horizon())
        .map(|t| {
            prior
                .belief_at(t)
                .log_density(&posterior.belief_at(t).mean())
                .exp()
        })
        .collect();
    normalize_weights(raw)
}

fn self_weights(beliefs: &[MixtureBelief]) -> Vec<f64> {
    let raw: Vec<f64> = beliefs
        .iter()
        .map(|b| b.log_density(&b.mean()).exp())
        .collect();
    normalize_weights(raw)
}

fn normalize_weights(mut raw: Vec<f64>) -> Vec<f64> {
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        let uniform = 1.0 / raw.len() as f64;
        return vec![uniform; raw.len()];
    }
    for w in &mut raw {
        *w /= sum;
    }
    raw
}

#[cfg(test)]
mod tests;
