use super::*;
use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Numerical-quadrature oracle for 1-D Gaussian KL: Simpson on
/// `p(x) log(p(x)/q(x))` over a wide bracket around p's mass.
fn kl_quadrature_1d(mu1: f64, s1: f64, mu2: f64, s2: f64) -> f64 {
    let logpdf = |x: f64, mu: f64, s: f64| {
        -0.5 * ((x - mu) / s).powi(2) - (s * (2.0 * std::f64::consts::PI).sqrt()).ln()
    };
    let f = |x: f64| {
        let lp = logpdf(x, mu1, s1);
        lp.exp() * (lp - logpdf(x, mu2, s2))
    };
    let lo = mu1 - 15.0 * s1;
    let hi = mu1 + 15.0 * s1;
    let n = 20_000usize; // even
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let x = lo + i as f64 * h;
        acc += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn kl_identical_gaussians_is_zero() {
    assert_eq!(kl_gaussian_1d(0.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
    let b = GaussianBelief::new(DVector::from_vec(vec![1.0, -2.0]), DMatrix::identity(2, 2));
    assert!(kl_gaussian(&b, &b).unwrap().abs() < 1e-12);
}

#[test]
fn kl_closed_form_matches_quadrature() {
    // (mu1, s1) = (1, 2) against the standard normal: 1.306853 nats.
    let closed = kl_gaussian_1d(1.0, 2.0, 0.0, 1.0).unwrap();
    assert_relative_eq!(closed, 1.306853, epsilon = 5e-7);
    assert!((closed - kl_quadrature_1d(1.0, 2.0, 0.0, 1.0)).abs() < 1e-6);

    // Shrinking-Gaussian schedule at T = 10: 0.014690 nats, below 0.11.
    let t10 = kl_gaussian_1d(0.1, 1.1, 0.0, 1.0).unwrap();
    assert_relative_eq!(t10, 0.014690, epsilon = 5e-7);
    assert!((t10 - kl_quadrature_1d(0.1, 1.1, 0.0, 1.0)).abs() < 1e-6);
    assert!(t10 <= alpha_bound(10));
    assert_relative_eq!(alpha_bound(10), 0.11, epsilon = 1e-15);
}

#[test]
fn kl_rejects_nonpositive_variance() {
    assert!(matches!(
        kl_gaussian_1d(0.0, 0.0, 0.0, 1.0),
        Err(BeliefError::NonPositiveVariance)
    ));
    assert!(matches!(
        kl_gaussian_1d(0.0, 1.0, 0.0, -2.0),
        Err(BeliefError::NonPositiveVariance)
    ));
}

#[test]
fn kl_multivariate_decomposes_over_axes() {
    let p = GaussianBelief::new(
        DVector::from_vec(vec![1.0, -0.5]),
        DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.25])),
    );
    let q = GaussianBelief::new(DVector::zeros(2), DMatrix::identity(2, 2));
    let want =
        kl_gaussian_1d(1.0, 2.0, 0.0, 1.0).unwrap() + kl_gaussian_1d(-0.5, 0.5, 0.0, 1.0).unwrap();
    assert_relative_eq!(kl_gaussian(&p, &q).unwrap(), want, epsilon = 1e-9);
}

#[test]
fn alpha_bound_values_and_monotonicity() {
    assert_relative_eq!(alpha_bound(1), 2.0, epsilon = 1e-15);
    assert_relative_eq!(alpha_bound(10), 0.11, epsilon = 1e-15);
    let mut prev = alpha_bound(1);
    for t in 2..2000 {
        let cur = alpha_bound(t);
        assert!(cur < prev);
        prev = cur;
    }
    assert!(alpha_bound(1_000_000) < 1.1e-6);
}

#[test]
fn shrinking_gaussian_schedule_conforms_for_all_horizons() {
    // mu = 1/T, sigma = 1 + 1/T against N(0,1): KL <= 1/T + 1/T^2 for every
    // horizon up to 10^4.
    for t in 1..=10_000usize {
        let tf = t as f64;
        let kl = kl_gaussian_1d(1.0 / tf, 1.0 + 1.0 / tf, 0.0, 1.0).unwrap();
        assert!(
            kl <= alpha_bound(t),
            "horizon {t}: kl {kl} exceeds bound {}",
            alpha_bound(t)
        );
    }
}

fn stationary_prior(horizon: usize) -> BeliefTrajectory {
    let launch_mean = DVector::from_vec(vec![1.0, 2.0, 0.0, 0.0]);
    let launch_cov = DMatrix::from_diagonal(&DVector::from_vec(vec![0.25, 0.25, 0.0, 0.0]));
    ballistic_prior(
        &launch_mean,
        &launch_cov,
        &DVector::zeros(2),
        0.05,
        0.0,
        horizon,
    )
}

#[test]
fn ballistic_prior_degenerate_launch_stays_put() {
    let launch_mean = DVector::from_vec(vec![0.3, -0.7, 0.0, 0.0]);
    let traj = ballistic_prior(
        &launch_mean,
        &DMatrix::zeros(4, 4),
        &DVector::zeros(2),
        0.1,
        0.0,
        20,
    );
    for t in 0..=20 {
        let b = traj.belief_at(t).as_single().unwrap();
        assert_relative_eq!(b.mean[0], 0.3, epsilon = 1e-12);
        assert_relative_eq!(b.mean[1], -0.7, epsilon = 1e-12);
        // Floored, near-degenerate covariance.
        assert!(b.cov.trace() < 1e-9);
    }
}

#[test]
fn ballistic_prior_mean_follows_parabola() {
    let (p0, v0, g, dt) = ((0.5, 2.0), (1.5, 3.0), 9.8, 0.02);
    let launch_mean = DVector::from_vec(vec![p0.0, p0.1, v0.0, v0.1]);
    let traj = ballistic_prior(
        &launch_mean,
        &DMatrix::identity(4, 4),
        &DVector::from_vec(vec![0.0, -g]),
        dt,
        0.0,
        60,
    );
    for k in 0..=60 {
        let tau = k as f64 * dt;
        let b = traj.belief_at(k).as_single().unwrap();
        assert_relative_eq!(b.mean[0], p0.0 + v0.0 * tau, epsilon = 1e-10);
        assert_relative_eq!(
            b.mean[1],
            p0.1 + v0.1 * tau - 0.5 * g * tau * tau,
            epsilon = 1e-10
        );
    }
}

#[test]
fn ballistic_prior_covariance_matches_propagation_oracle() {
    // Independent route: sigma_k = F^k S0 F^k' + sum_j F^j Q F^j'.
    let launch_cov = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]));
    let launch_mean = DVector::zeros(4);
    let gravity = DVector::from_vec(vec![0.0, -9.8]);
    let (dt, q_scale, horizon) = (0.05, 0.3, 40);
    let traj = ballistic_prior(&launch_mean, &launch_cov, &gravity, dt, q_scale, horizon);

    let model = BallisticModel {
        dim: 2,
        dt,
        gravity,
        process_noise: q_scale,
    };
    let f = model.step_matrix();
    let q = model.process_cov();
    let mut fk = DMatrix::identity(4, 4);
    let mut accum = DMatrix::zeros(4, 4);
    let mut prev_trace = -1.0;
    for k in 0..=horizon {
        let expected = &fk * &launch_cov * fk.transpose() + &accum;
        let got = traj.belief_at(k).as_single().unwrap();
        let pos_block = expected.view((0, 0), (2, 2));
        assert!(
            (&got.cov - pos_block).norm() <= 1e-9 * (1.0 + pos_block.norm()),
            "step {k}"
        );
        // Monotone growth under process noise.
        assert!(got.cov.trace() > prev_trace);
        prev_trace = got.cov.trace();
        accum = &f * accum * f.transpose() + &q;
        fk = &f * fk;
    }
}

#[test]
fn observation_at_prior_mean_with_huge_noise_is_inert() {
    let prior = stationary_prior(30);
    let obs = Observation {
        t: 10,
        y: prior.belief_at(10).mean(),
        noise: 1e6,
    };
    let posterior = prior.observe_and_update(&obs).unwrap();
    let kl = kl_shift(&posterior, &prior, 30, &kl::McSettings::default()).unwrap();
    assert!(kl < 1e-6, "posterior moved by {kl} nats");
}

#[test]
fn zero_noise_observation_pins_posterior_mean() {
    let prior = stationary_prior(30);
    let y = DVector::from_vec(vec![1.4, 1.7]);
    let obs = Observation {
        t: 12,
        y: y.clone(),
        noise: 0.0,
    };
    let posterior = prior.observe_and_update(&obs).unwrap();
    let b = posterior.belief_at(12).as_single().unwrap();
    assert_relative_eq!(b.mean[0], y[0], epsilon = 1e-9);
    assert_relative_eq!(b.mean[1], y[1], epsilon = 1e-9);
}

#[test]
fn repeated_observations_contract_terminal_variance() {
    let mut traj = stationary_prior(40);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut prev = traj.belief_at(40).as_single().unwrap().cov.trace();
    for t in [5usize, 10, 15, 20, 25] {
        let y = traj.belief_at(t).mean() + DVector::from_fn(2, |_, _| rng.gen_range(-0.1..0.1));
        traj = traj
            .observe_and_update(&Observation { t, y, noise: 0.2 })
            .unwrap();
        let cur = traj.belief_at(40).as_single().unwrap().cov.trace();
        assert!(
            cur < prev,
            "terminal variance did not shrink: {prev} -> {cur}"
        );
        prev = cur;
    }
}

#[test]
fn posterior_covariance_never_exceeds_prior() {
    let prior = stationary_prior(25);
    let obs = Observation {
        t: 8,
        y: DVector::from_vec(vec![1.2, 2.3]),
        noise: 0.3,
    };
    let posterior = prior.observe_and_update(&obs).unwrap();
    for t in 8..=25 {
        let gap = &prior.belief_at(t).as_single().unwrap().cov
            - &posterior.belief_at(t).as_single().unwrap().cov;
        let eigs = gap.symmetric_eigenvalues();
        assert!(
            eigs.iter().all(|&e| e >= -1e-9),
            "Loewner order violated at {t}: {eigs:?}"
        );
    }
}

#[test]
fn sequential_filter_matches_batch_information_oracle() {
    // With zero process noise, conditioning the launch state on all
    // observations at once (information form) must agree with the
    // sequential per-observation filter.
    let launch_mean = DVector::from_vec(vec![0.2, 1.5, 1.0, 2.5]);
    let launch_cov = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, 0.3, 0.5, 0.5]));
    let gravity = DVector::from_vec(vec![0.0, -9.8]);
    let (dt, horizon) = (0.04, 50usize);
    let prior = ballistic_prior(&launch_mean, &launch_cov, &gravity, dt, 0.0, horizon);

    let model = BallisticModel {
        dim: 2,
        dt,
        gravity: gravity.clone(),
        process_noise: 0.0,
    };
    let f = model.step_matrix();
    let drift = model.drift();

    let observations = vec![
        Observation {
            t: 6,
            y: DVector::from_vec(vec![0.5, 1.9]),
            noise: 0.15,
        },
        Observation {
            t: 14,
            y: DVector::from_vec(vec![0.8, 2.1]),
            noise: 0.1,
        },
        Observation {
            t: 22,
            y: DVector::from_vec(vec![1.1, 1.6]),
            noise: 0.2,
        },
    ];

    let mut sequential = prior.clone();
    for obs in &observations {
        sequential = sequential.observe_and_update(obs).unwrap();
    }

    // Batch oracle over the launch state.
    let mut lambda = launch_cov
        .clone()
        .lu()
        .solve(&DMatrix::identity(4, 4))
        .unwrap();
    let mut eta = &lambda * &launch_mean;
    for obs in &observations {
        // s_t = F^t s_0 + c_t; y = H s_t + v.
        let mut fk = DMatrix::identity(4, 4);
        let mut c = DVector::zeros(4);
        for _ in 0..obs.t {
            c = &f * c + &drift;
            fk = &f * fk;
        }
        let g = fk.rows(0, 2).into_owned(); // H F^t
        let offset = c.rows(0, 2).into_owned();
        let r_inv = 1.0 / (obs.noise * obs.noise);
        lambda += g.transpose() * &g * r_inv;
        eta += g.transpose() * (&obs.y - offset) * r_inv;
    }
    let post_cov0 = lambda.lu().solve(&DMatrix::identity(4, 4)).unwrap();
    let post_mean0 = &post_cov0 * eta;

    // Compare position marginals at a few future steps.
    for t in [25usize, 35, 50] {
        let mut fk = DMatrix::identity(4, 4);
        let mut c = DVector::zeros(4);
        for _ in 0..t {
            c = &f * c + &drift;
            fk = &f * fk;
        }
        let mean_t = &fk * &post_mean0 + c;
        let cov_t = &fk * &post_cov0 * fk.transpose();
        let got = sequential.belief_at(t).as_single().unwrap();
        assert!(
            (&got.mean - mean_t.rows(0, 2)).norm() < 1e-8,
            "mean mismatch at {t}"
        );
        assert!(
            (&got.cov - cov_t.view((0, 0), (2, 2))).norm() < 1e-8,
            "cov mismatch at {t}"
        );
    }
}

#[test]
fn observation_outside_horizon_is_rejected() {
    let prior = stationary_prior(10);
    let res = prior.observe_and_update(&Observation {
        t: 11,
        y: DVector::zeros(2),
        noise: 0.1,
    });
    assert!(matches!(res, Err(BeliefError::OutsideHorizon { .. })));
}

#[test]
fn belief_updates_are_deterministic() {
    let run = || {
        let mut traj = stationary_prior(20);
        for t in [3usize, 9, 15] {
            traj = traj
                .observe_and_update(&Observation {
                    t,
                    y: DVector::from_vec(vec![1.1 + t as f64 * 0.01, 2.2]),
                    noise: 0.1,
                })
                .unwrap();
        }
        traj
    };
    let a = run();
    let b = run();
    for t in 0..=20 {
        let (ba, bb) = (
            a.belief_at(t).as_single().unwrap(),
            b.belief_at(t).as_single().unwrap(),
        );
        for (x, y) in ba.mean.iter().zip(bb.mean.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
    for (x, y) in a.weights().iter().zip(b.weights()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn weights_are_normalized() {
    let traj = stationary_prior(17);
    let sum: f64 = traj.weights().iter().sum();
    assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    assert!(traj.weights().iter().all(|&w| w >= 0.0));
    let posterior = traj
        .observe_and_update(&Observation {
            t: 4,
            y: DVector::from_vec(vec![0.9, 2.1]),
            noise: 0.2,
        })
        .unwrap();
    let w = reweight(&traj, &posterior);
    assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
}

fn parabola_obs(
    p0: (f64, f64),
    v0: (f64, f64),
    g: f64,
    dt: f64,
    ts: &[usize],
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Observation> {
    ts.iter()
        .map(|&t| {
            let tau = t as f64 * dt;
            let mut jitter = || {
                if noise > 0.0 {
                    rng.gen_range(-noise..noise)
                } else {
                    0.0
                }
            };
            let y = DVector::from_vec(vec![
                p0.0 + v0.0 * tau + jitter(),
                p0.1 + v0.1 * tau - 0.5 * g * tau * tau + jitter(),
            ]);
            Observation { t, y, noise }
        })
        .collect()
}

#[test]
fn gmm_single_component_matches_ballistic_least_squares() {
    // Noiseless parabola: the K=1 fit reduces to exact least squares, so the
    // projected means must match a zero-noise Kalman conditioning of a wide
    // ballistic prior.
    let g = 9.8;
    let dt = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ts: Vec<usize> = (0..10).collect();
    let obs = parabola_obs((0.4, 1.2), (1.0, 3.0), g, dt, &ts, 0.0, &mut rng);

    let settings = GmmSettings::new(DVector::from_vec(vec![0.0, -g]), dt);
    let fit = forecast_gmm(&obs, 1, 40, &settings).unwrap();
    assert!(
        fit.degenerate,
        "noiseless fit should hit the variance floor"
    );

    let mut kalman = ballistic_prior(
        &DVector::zeros(4),
        &(DMatrix::identity(4, 4) * 100.0),
        &DVector::from_vec(vec![0.0, -g]),
        dt,
        0.0,
        40,
    );
    for o in &obs {
        kalman = kalman
            .observe_and_update(&Observation {
                noise: 1e-6,
                ..o.clone()
            })
            .unwrap();
    }
    for t in 0..=40 {
        let diff = (fit.trajectory.belief_at(t).mean() - kalman.belief_at(t).mean()).norm();
        assert!(diff < 1e-6, "step {t}: mean gap {diff}");
    }
}

#[test]
fn gmm_recovers_two_separated_parabolas() {
    let g = 9.8;
    let dt = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ts: Vec<usize> = (0..15).collect();
    let mut obs = parabola_obs((0.0, 0.0), (1.0, 2.0), g, dt, &ts, 0.01, &mut rng);
    let labels_a = obs.len();
    obs.extend(parabola_obs(
        (4.0, 1.0),
        (-1.0, 2.5),
        g,
        dt,
        &ts,
        0.01,
        &mut rng,
    ));

    let settings = GmmSettings::new(DVector::from_vec(vec![0.0, -g]), dt);
    let fit = forecast_gmm(&obs, 2, 30, &settings).unwrap();

    // Purity: the dominant component of each observation must align with its
    // generator, up to label permutation.
    let assign: Vec<usize> = fit
        .responsibilities
        .iter()
        .map(|r| if r[0] >= r[1] { 0 } else { 1 })
        .collect();
    let truth: Vec<usize> = (0..obs.len()).map(|i| usize::from(i >= labels_a)).collect();
    let agree = assign.iter().zip(&truth).filter(|(a, b)| a == b).count();
    let purity = (agree.max(obs.len() - agree)) as f64 / obs.len() as f64;
    assert!(purity > 0.99, "purity {purity}");
    // Near-certain responsibilities.
    let confident = fit
        .responsibilities
        .iter()
        .filter(|r| r.iter().cloned().fold(0.0f64, f64::max) > 0.99)
        .count();
    assert!(confident as f64 / obs.len() as f64 > 0.99);
}

#[test]
fn gmm_log_likelihood_is_nondecreasing() {
    let g = 9.8;
    let dt = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ts: Vec<usize> = (0..12).collect();
    let mut obs = parabola_obs((0.0, 0.0), (1.2, 2.2), g, dt, &ts, 0.05, &mut rng);
    obs.extend(parabola_obs(
        (2.0, 0.5),
        (-0.8, 3.0),
        g,
        dt,
        &ts,
        0.05,
        &mut rng,
    ));
    let settings = GmmSettings::new(DVector::from_vec(vec![0.0, -g]), dt);
    let fit = forecast_gmm(&obs, 2, 20, &settings).unwrap();
    for w in fit.log_likelihood.windows(2) {
        assert!(
            w[1] >= w[0] - 1e-9,
            "log-likelihood dropped: {} -> {}",
            w[0],
            w[1]
        );
    }
}

#[test]
fn gmm_requires_enough_observations() {
    let settings = GmmSettings::new(DVector::zeros(2), 0.1);
    let obs = vec![Observation {
        t: 0,
        y: DVector::zeros(2),
        noise: 0.1,
    }];
    assert!(forecast_gmm(&obs, 2, 10, &settings).is_err());
}

/// Independent Monte-Carlo oracle for mixture KL: own density code, own
/// sampler, own RNG stream.
mod mc_oracle {
    use super::*;

    fn logpdf(b: &GaussianBelief, x: &DVector<f64>) -> f64 {
        let d = b.dim() as f64;
        let chol = b.cov.clone().cholesky().unwrap();
        let diff = x - &b.mean;
        let sol = chol.solve(&diff);
        let ld: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + ld + diff.dot(&sol))
    }

    fn mix_logpdf(m: &MixtureBelief, x: &DVector<f64>) -> f64 {
        let terms: Vec<f64> = m
            .components
            .iter()
            .map(|(w, c)| w.ln() + logpdf(c, x))
            .collect();
        let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
    }

    pub fn estimate(p: &MixtureBelief, q: &MixtureBelief, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            // Pick a component, then Box-Muller through the Cholesky factor.
            let pick: f64 = rng.gen();
            let mut acc = 0.0;
            let mut comp = &p.components[0].1;
            for (w, c) in &p.components {
                acc += w;
                if pick <= acc {
                    comp = c;
                    break;
                }
            }
            let d = comp.dim();
            let z = DVector::from_fn(d, |_, _| {
                let (u1, u2): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen());
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            });
            let x = &comp.mean + comp.cov.clone().cholesky().unwrap().l() * z;
            let v = mix_logpdf(p, &x) - mix_logpdf(q, &x);
            sum += v;
            sq += v * v;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = (sq / nf - mean * mean).max(0.0);
        (mean, (var / nf).sqrt())
    }
}

#[test]
fn mixture_kl_within_three_standard_errors_of_oracle() {
    let p = MixtureBelief {
        components: vec![
            (
                0.4,
                GaussianBelief::new(DVector::zeros(2), DMatrix::identity(2, 2)),
            ),
            (
                0.6,
                GaussianBelief::new(
                    DVector::from_vec(vec![2.0, 1.0]),
                    DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.5])),
                ),
            ),
        ],
    };
    let q = MixtureBelief::gaussian(GaussianBelief::new(
        DVector::from_vec(vec![1.0, 0.5]),
        DMatrix::identity(2, 2) * 2.0,
    ));
    let impl_est = kl_mixture_mc(&p, &q, 100_000, 7);
    let (oracle, oracle_se) = mc_oracle::estimate(&p, &q, 1_000_000, 1234);
    let combined = (impl_est.std_error.powi(2) + oracle_se * oracle_se).sqrt();
    assert!(
        (impl_est.value - oracle).abs() <= 3.0 * combined,
        "impl {} vs oracle {} (3se = {})",
        impl_est.value,
        oracle,
        3.0 * combined
    );
    // KL of a mixture against itself: zero within sampling noise and clamped
    // by kl_shift.
    let self_est = kl_mixture_mc(&p, &p, 10_000, 3);
    assert!(self_est.value.abs() < 1e-9);
}

#[test]
fn kl_shift_gaussian_path_equals_closed_form() {
    let prior = stationary_prior(20);
    let posterior = prior
        .observe_and_update(&Observation {
            t: 6,
            y: DVector::from_vec(vec![1.6, 2.4]),
            noise: 0.2,
        })
        .unwrap();
    let t = 12;
    let got = kl_shift(&posterior, &prior, t, &kl::McSettings::default()).unwrap();
    let want = kl_gaussian(
        posterior.belief_at(t).as_single().unwrap(),
        prior.belief_at(t).as_single().unwrap(),
    )
    .unwrap();
    assert_relative_eq!(got, want.max(0.0), epsilon = 1e-14);
    // Identical trajectories: zero shift within closed-form rounding.
    assert!(kl_shift(&prior, &prior, t, &kl::McSettings::default()).unwrap() < 1e-12);
}
