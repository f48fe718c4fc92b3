//! KL divergence between target beliefs and the horizon bound it is
//! checked against.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BeliefError, BeliefTrajectory, GaussianBelief, MixtureBelief};

/// Closed-form KL between 1-D Gaussians:
/// `log(s2/s1) + (s1^2 + (m1-m2)^2) / (2 s2^2) - 1/2`.
pub fn kl_gaussian_1d(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> Result<f64, BeliefError> {
    if sigma1 <= 0.0 || sigma2 <= 0.0 {
        return Err(BeliefError::NonPositiveVariance);
    }
    Ok((sigma2 / sigma1).ln()
        + (sigma1 * sigma1 + (mu1 - mu2) * (mu1 - mu2)) / (2.0 * sigma2 * sigma2)
        - 0.5)
}

/// Multivariate Gaussian KL(p || q).
pub fn kl_gaussian(p: &GaussianBelief, q: &GaussianBelief) -> Result<f64, BeliefError> {
    if p.dim() != q.dim() {
        return Err(BeliefError::DimensionMismatch(p.dim(), q.dim()));
    }
    let d = p.dim() as f64;
    let chol_q = q
        .cov
        .clone()
        .cholesky()
        .ok_or(BeliefError::NonPositiveVariance)?;
    let chol_p = p
        .cov
        .clone()
        .cholesky()
        .ok_or(BeliefError::NonPositiveVariance)?;
    let log_det_q: f64 = chol_q.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let log_det_p: f64 = chol_p.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let trace = chol_q.solve(&p.cov).trace();
    let diff = &q.mean - &p.mean;
    let maha = diff.dot(&chol_q.solve(&diff));
    Ok(0.5 * (log_det_q - log_det_p - d + trace + maha))
}

/// Monte-Carlo KL estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct KlEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Seeded Monte-Carlo estimate of KL(p || q) for mixtures (no closed form):
/// average of `log p(x) - log q(x)` over draws from `p`.
pub fn kl_mixture_mc(
    p: &MixtureBelief,
    q: &MixtureBelief,
    samples: usize,
    seed: u64,
) -> KlEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let x: DVector<f64> = p.sample(&mut rng);
        let v = p.log_density(&x) - q.log_density(&x);
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    KlEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
    }
}

/// Monte-Carlo settings for the mixture KL path.
#[derive(Debug, Clone, Copy)]
pub struct McSettings {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
        }
    }
}

/// Distribution shift at step `t`: closed form when both step marginals are
/// single Gaussians, seeded Monte-Carlo otherwise. Clamped at zero (the
/// closed form can return tiny negatives from rounding, the MC estimate from
/// sampling noise).
pub fn kl_shift(
    posterior: &BeliefTrajectory,
    prior: &BeliefTrajectory,
    t: usize,
    mc: &McSettings,
) -> Result<f64, BeliefError> {
    if posterior.target_dim() != prior.target_dim() {
        return Err(BeliefError::DimensionMismatch(
            posterior.target_dim(),
            prior.target_dim(),
        ));
    }
    let post = posterior.belief_at(t);
    let pri = prior.belief_at(t);
    let value = match (post.as_single(), pri.as_single()) {
        (Some(p), Some(q)) => kl_gaussian(p, q)?,
        _ => kl_mixture_mc(post, pri, mc.samples, mc.seed ^ t as u64).value,
    };
    Ok(value.max(0.0))
}

/// The per-step shift budget `alpha(1/T) = 1/T + 1/T^2`. Decreasing in the
/// horizon; a belief schedule is conforming when every step's KL stays
/// below it.
pub fn alpha_bound(horizon: usize) -> f64 {
    assert!(horizon >= 1);
    let t = horizon as f64;
    1.0 / t + 1.0 / (t * t)
}
