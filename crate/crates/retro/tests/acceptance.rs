//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines;
//! the timing-sensitive criteria use paired medians and ordinal assertions
//! only.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use retro::adjust::{build_m, solve_desirability, CostShiftVector};
use retro::belief::{alpha_bound, kl_gaussian_1d};
use retro::ddp::{riccati_lqr, solve, SolveOptions};
use retro::dynamics::LtiModel;
use retro::harness::{run_scenario, ScenarioConfig};
use retro::regret::{
    complexity_benchmark, conformal_scenario, evaluate_conformal, fit_loglog, horizon_sweep,
    normalization_bound_sweep, regret_bound_batch, BenchmarkConfig,
};

fn verdict(criterion: usize, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    g.transpose() * g + DMatrix::identity(n, n) * floor
}

fn random_lqr(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LtiModel {
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let row_norm = a
        .row_iter()
        .map(|r| r.iter().map(|v: &f64| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    a *= 0.95 / row_norm.max(1.0);
    for i in 0..n {
        a[(i, i)] += 0.5;
    }
    let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    let q = random_spd(rng, n, 0.1);
    let r = random_spd(rng, m, 0.5);
    let qf = random_spd(rng, n, 0.1);
    LtiModel::new("acceptance_lqr", a, b, DMatrix::identity(n, n), q, qf, r)
}

/// Criterion 1: DDP matches the Riccati oracle on 25 random LQR instances
/// within 1e-6 relative, each solve under a second.
#[test]
fn criterion_1_ddp_riccati_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let dims = [2usize, 4, 6];
    let controls = [1usize, 2, 3];
    let horizons = [20usize, 50, 100];
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    'outer: for &n in &dims {
        for &m in &controls {
            for &horizon in &horizons {
                if cases == 25 {
                    break 'outer;
                }
                cases += 1;
                let model = random_lqr(&mut rng, n, m);
                let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                let targets = vec![DVector::zeros(n); horizon + 1];
                let began = Instant::now();
                let report = solve(&model, &x0, &targets, &SolveOptions::default()).unwrap();
                let elapsed = began.elapsed().as_secs_f64();
                assert!(elapsed < 1.0, "solve took {elapsed:.3} s");
                assert!(report.converged);

                let (k_riccati, _) =
                    riccati_lqr(&model.a, &model.b, &model.w, &model.r, &model.wf, horizon)
                        .unwrap();
                // Optimal controls by rolling the Riccati feedback.
                let mut x = x0.clone();
                for t in 0..horizon {
                    let u = -(&k_riccati[t] * &x);
                    let du = (&report.trajectory.controls[t] - &u).norm() / (1.0 + u.norm());
                    let dk = (&report.gains.feedback[t] + &k_riccati[t]).norm()
                        / (1.0 + k_riccati[t].norm());
                    worst = worst.max(du).max(dk);
                    x = &model.a * x + &model.b * u;
                }
            }
        }
    }
    verdict(
        1,
        cases == 25 && worst <= 1e-6,
        &format!("{cases} LQR instances, worst relative deviation {worst:.2e} <= 1e-6"),
    );
}

fn random_shift(rng: &mut ChaCha8Rng, horizon: usize) -> (CostShiftVector, Vec<f64>) {
    let values: Vec<f64> = (0..=horizon).map(|_| rng.gen_range(-0.2..0.8)).collect();
    let components = values.iter().map(|&v| (v, 0.0)).collect();
    let raw: Vec<f64> = (0..horizon).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    (
        CostShiftVector { values, components },
        raw.into_iter().map(|v| v / sum).collect(),
    )
}

/// Criterion 2: the partitioned desirability solution matches a dense direct
/// solve within 1e-10 on 200 random small systems, and the row residual
/// stays below 1e-8 up to T = 1024.
#[test]
fn criterion_2_zsolve_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let mut worst_gap: f64 = 0.0;
    for _ in 0..200 {
        let horizon = rng.gen_range(2..=8);
        let (shift, weights) = random_shift(&mut rng, horizon);
        let matrix = build_m(&shift, &weights, 1);
        let solution = solve_desirability(&matrix).unwrap();

        // Dense oracle: identity rows of z = Mz plus the boundary row.
        let dim = matrix.dim();
        let mut a = DMatrix::identity(dim, dim) - &matrix.m;
        for c in 0..dim {
            a[(dim - 1, c)] = 0.0;
        }
        a[(dim - 1, dim - 1)] = 1.0;
        let mut b = DVector::zeros(dim);
        b[dim - 1] = (-matrix.delta_l[dim - 1]).exp();
        let dense = a.lu().solve(&b).unwrap();
        for (zs, zd) in solution.z.iter().zip(dense.iter()) {
            worst_gap = worst_gap.max((zs - zd).abs() / (1.0 + zd.abs()));
        }
    }

    let mut worst_residual: f64 = 0.0;
    for &horizon in &[64usize, 256, 1024] {
        let (shift, weights) = random_shift(&mut rng, horizon);
        let matrix = build_m(&shift, &weights, 1);
        let solution = solve_desirability(&matrix).unwrap();
        worst_residual = worst_residual.max(solution.residual);
    }
    verdict(
        2,
        worst_gap <= 1e-10 && worst_residual < 1e-8,
        &format!(
            "dense-solve gap {worst_gap:.2e} <= 1e-10 on 200 instances; residual {worst_residual:.2e} < 1e-8 up to T=1024"
        ),
    );
}

/// Criterion 3: closed-form Gaussian KL matches quadrature to 1e-6 over the
/// parameter grid, and the shrinking-Gaussian schedule never exceeds
/// `1/T + 1/T^2`.
#[test]
fn criterion_3_gaussian_kl_correctness() {
    // Simpson quadrature oracle on p log(p/q).
    let quadrature = |mu1: f64, s1: f64| {
        let logpdf = |x: f64, mu: f64, s: f64| {
            -0.5 * ((x - mu) / s).powi(2) - (s * (2.0 * std::f64::consts::PI).sqrt()).ln()
        };
        let f = |x: f64| {
            let lp = logpdf(x, mu1, s1);
            lp.exp() * (lp - logpdf(x, 0.0, 1.0))
        };
        let lo = mu1 - 15.0 * s1;
        let hi = mu1 + 15.0 * s1;
        let n = 40_000usize;
        let h = (hi - lo) / n as f64;
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            acc += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };

    let mut worst: f64 = 0.0;
    let mut mu = -3.0;
    while mu <= 3.0 {
        let mut sigma = 0.1;
        while sigma <= 5.0 {
            let closed = kl_gaussian_1d(mu, sigma, 0.0, 1.0).unwrap();
            worst = worst.max((closed - quadrature(mu, sigma)).abs());
            sigma += 0.35;
        }
        mu += 0.5;
    }

    let mut conforming = true;
    for t in 1..=10_000usize {
        let tf = t as f64;
        let kl = kl_gaussian_1d(1.0 / tf, 1.0 + 1.0 / tf, 0.0, 1.0).unwrap();
        if kl > alpha_bound(t) {
            conforming = false;
            break;
        }
    }
    verdict(
        3,
        worst < 1e-6 && conforming,
        &format!(
            "quadrature gap {worst:.2e} < 1e-6 on the grid; schedule conforms for T in [1, 1e4]"
        ),
    );
}

/// Criterion 4: the normalization-term bound holds on 1000 randomized
/// desirability solutions with zero violations.
#[test]
fn criterion_4_normalization_bound_sweep() {
    let (violations, min_margin) = normalization_bound_sweep(1000, 64, 4004);
    verdict(
        4,
        violations == 0,
        &format!("1000 solutions (T <= 64), {violations} violations, min margin {min_margin:.4}"),
    );
}

/// Criterion 5: the regret bound holds empirically on 100 seeded conforming
/// scenarios per horizon in {10, 50, 100, 500}, within five minutes.
#[test]
fn criterion_5_regret_bound_empirical() {
    let began = Instant::now();
    let summary = regret_bound_batch(&[10, 50, 100, 500], 100, 5005).unwrap();
    let elapsed = began.elapsed().as_secs_f64();
    let detail = summary
        .per_horizon
        .iter()
        .map(|(t, max, bound, viol)| {
            format!("T={t}: max {max:.3} <= {bound:.3} ({viol} violating)")
        })
        .collect::<Vec<_>>()
        .join("; ");
    verdict(
        5,
        summary.violations.is_empty() && summary.scenarios == 400 && elapsed < 300.0,
        &format!("{detail}; {:.1} s", elapsed),
    );
}

/// Criterion 6: with no distribution shift the online session reproduces the
/// planned controls bit for bit and the regret is identically zero.
#[test]
fn criterion_6_zero_shift_neutrality() {
    let scenario = {
        let mut s = conformal_scenario(40, 6006);
        s.updates = vec![None; 40];
        s.truth = s.prior.mean_path();
        s
    };
    let (report, retro, oracle) = evaluate_conformal(&scenario).unwrap();
    let bit_exact = retro
        .executed
        .controls
        .iter()
        .zip(&oracle.executed.controls)
        .all(|(a, b)| {
            a.iter()
                .zip(b.iter())
                .all(|(x, y)| x.to_bits() == y.to_bits())
        });
    let zero_regret = report.per_step.iter().all(|&r| r == 0.0);
    verdict(
        6,
        bit_exact && zero_regret && retro.events.is_empty(),
        &format!(
            "controls bit-identical to the plan, {} events, total regret {}",
            retro.events.len(),
            report.total
        ),
    );
}

/// Criterion 7: per-event adjustment beats the full re-solve on every
/// matched event at T = 200 for n = 4 and the 13-state arm; totals order
/// oracle <= retro <= multirun; the dimension-scaling slope for retro stays
/// below multirun's.
#[test]
fn criterion_7_timing_trends() {
    let config = BenchmarkConfig {
        horizons: vec![200],
        fixed_horizon: 200,
        reps: 20,
        seed: 7007,
    };
    let records = complexity_benchmark(&config).unwrap();

    let mut all_events_faster = true;
    let mut events_checked = 0;
    let mut totals_ordered = true;
    for chunk in records.chunks(3) {
        let oracle = chunk.iter().find(|r| r.method == "oracle_ddp").unwrap();
        let retro = chunk.iter().find(|r| r.method == "retro").unwrap();
        let multi = chunk.iter().find(|r| r.method == "multirun_ddp").unwrap();
        assert!(retro.event_iterations.iter().all(|&i| i == 1));
        if retro.state_dim == 4 || retro.state_dim == 13 {
            for (r, m) in retro.event_micros.iter().zip(&multi.event_micros) {
                events_checked += 1;
                if r >= m {
                    all_events_faster = false;
                }
            }
        }
        if !(oracle.total_micros <= retro.total_micros && retro.total_micros <= multi.total_micros)
        {
            totals_ordered = false;
        }
    }

    let slope_of = |method: &str| {
        let pts: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| r.method == method && !r.event_micros.is_empty())
            .map(|r| {
                let mut xs = r.event_micros.clone();
                xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                (r.state_dim as f64, xs[xs.len() / 2])
            })
            .collect();
        fit_loglog(&pts)
    };
    let retro_slope = slope_of("retro");
    let multi_slope = slope_of("multirun_ddp");

    verdict(
        7,
        all_events_faster && events_checked > 0 && totals_ordered && retro_slope < multi_slope,
        &format!(
            "{events_checked} matched events all faster; totals ordered; slope {retro_slope:.2} < {multi_slope:.2}"
        ),
    );
}

/// Criterion 8: horizon-sweep trends — cost difference non-increasing past
/// the second point and bounded away from zero, total regret increasing at
/// the tail, and a jointly-low middle region.
#[test]
fn criterion_8_horizon_sweep_trends() {
    let horizons = [10usize, 20, 50, 100, 200, 500, 1000];
    let rows = horizon_sweep(&horizons, 8008).unwrap();
    assert!(rows.iter().all(|r| r.valid));

    let cost: Vec<f64> = rows.iter().map(|r| r.cost_diff).collect();
    let regret: Vec<f64> = rows.iter().map(|r| r.total_regret).collect();

    let mut non_increasing = true;
    for w in cost[1..].windows(2) {
        if w[1] > w[0] {
            non_increasing = false;
        }
    }
    let bounded_away = *cost.last().unwrap() >= 1e-6;
    let tail_increasing = {
        let k = regret.len();
        regret[k - 3] < regret[k - 2] && regret[k - 2] < regret[k - 1]
    };

    // Joint-low region under min-max normalization.
    let norm = |xs: &[f64]| {
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        xs.iter()
            .map(|x| (x - lo) / (hi - lo))
            .collect::<Vec<f64>>()
    };
    let nc = norm(&cost);
    let nr = norm(&regret);
    let joint_low = nc.iter().zip(&nr).any(|(a, b)| *a < 0.3 && *b < 0.3);

    verdict(
        8,
        non_increasing && bounded_away && tail_increasing && joint_low,
        &format!(
            "cost_diff {:?} non-increasing past point 2, tail {:.1e} >= 1e-6; regret tail increasing; joint-low region {}",
            cost.iter().map(|c| format!("{c:.1e}")).collect::<Vec<_>>(),
            cost.last().unwrap(),
            joint_low
        ),
    );
}

/// Criterion 9: interception quality over 100 paired seeds — adjustment
/// never loses to the oracle and beats the stale plan on at least 95.
#[test]
fn criterion_9_interception_quality() {
    // Gentle lob with a late-starting observation schedule: the longer
    // baseline keeps early velocity estimates honest, and the slow target
    // keeps the oracle's tracking-lag floor below anything the other
    // methods can reach by luck.
    let mut config = ScenarioConfig::default();
    config.scenario.horizon = 200;
    config.observations.every = 0;
    config.observations.times = vec![60, 90, 120, 150, 180];
    config.observations.noise = 0.015;
    config.model.control_weight = 0.004;
    config.model.final_weight = 300.0;
    config.launch.gravity = vec![0.0, -1.0];
    config.launch.velocity = vec![-0.25, 1.0];
    config.launch.position_std = 0.12;
    config.launch.velocity_std = 0.18;

    let mut retro_beats_stale = 0;
    let mut oracle_beats_retro = 0;
    for seed in 0..100u64 {
        config.scenario.seed = seed;
        let reports = run_scenario(&config, None).unwrap();
        let error_of = |m: &str| {
            reports
                .iter()
                .find(|r| r.method == m)
                .map(|r| r.final_error)
                .unwrap()
        };
        if error_of("retro") <= error_of("no_adjust") {
            retro_beats_stale += 1;
        }
        if error_of("oracle") <= error_of("retro") {
            oracle_beats_retro += 1;
        }
    }
    verdict(
        9,
        retro_beats_stale >= 95 && oracle_beats_retro == 100,
        &format!(
            "retro <= no_adjust on {retro_beats_stale}/100 seeds; oracle <= retro on {oracle_beats_retro}/100"
        ),
    );
}
