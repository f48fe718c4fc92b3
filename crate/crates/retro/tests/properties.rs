//! Property tests for the cross-module invariants.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use retro::adjust::{build_m, solve_desirability, CostShiftVector};
use retro::belief::{alpha_bound, kl_gaussian, kl_gaussian_1d, GaussianBelief};
use retro::dynamics::{rollout, scalar_lti, trajectory_cost};
use retro::regret::check_normalization_bound;

fn shift_and_weights(horizon: usize) -> impl Strategy<Value = (CostShiftVector, Vec<f64>)> {
    (
        prop::collection::vec(-0.3f64..0.9, horizon + 1),
        prop::collection::vec(0.05f64..1.0, horizon),
    )
        .prop_map(|(values, raw)| {
            let sum: f64 = raw.iter().sum();
            let components = values.iter().map(|&v| (v, 0.0)).collect();
            (
                CostShiftVector { values, components },
                raw.into_iter().map(|v| v / sum).collect(),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 200,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    /// KL of 1-D Gaussians is nonnegative and vanishes only at equality.
    #[test]
    fn gaussian_kl_nonnegative(mu1 in -5.0f64..5.0, s1 in 0.05f64..4.0, mu2 in -5.0f64..5.0, s2 in 0.05f64..4.0) {
        let kl = kl_gaussian_1d(mu1, s1, mu2, s2).unwrap();
        prop_assert!(kl >= -1e-12);
        if (mu1 - mu2).abs() > 1e-6 || (s1 - s2).abs() > 1e-6 {
            prop_assert!(kl > 0.0);
        }
    }

    /// Multivariate KL of a belief against itself is zero to rounding.
    #[test]
    fn gaussian_kl_self_is_zero(m1 in -3.0f64..3.0, m2 in -3.0f64..3.0, v1 in 0.01f64..2.0, v2 in 0.01f64..2.0) {
        let b = GaussianBelief::new(
            DVector::from_vec(vec![m1, m2]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![v1, v2])),
        );
        prop_assert!(kl_gaussian(&b, &b).unwrap().abs() < 1e-12);
    }

    /// The shift budget decreases with the horizon.
    #[test]
    fn alpha_bound_monotone(t in 1usize..5000) {
        prop_assert!(alpha_bound(t + 1) < alpha_bound(t));
    }

    /// The desirability matrix keeps the upper-triangular constant-column
    /// pattern. A feasible system's solution satisfies every invariant at
    /// once — positivity, the row equations, the exp(-dV) identity, the
    /// normalization-term bound — and an infeasible one (a diagonal
    /// e^{dL(t)} at or below its weight) is reported, never silently forced.
    #[test]
    fn desirability_solution_invariants((shift, weights) in (2usize..24).prop_flat_map(shift_and_weights)) {
        let horizon = shift.values.len() - 1;
        let matrix = build_m(&shift, &weights, 1);
        for r in 0..matrix.dim() {
            for c in 0..r {
                prop_assert_eq!(matrix.m[(r, c)], 0.0);
            }
        }
        match solve_desirability(&matrix) {
            Ok(solution) => {
                let last = matrix.dim() - 1;
                for t in 0..=last {
                    prop_assert!(solution.z[t] > 0.0);
                    prop_assert!((solution.z[t] - (-solution.delta_v[t]).exp()).abs() <= 1e-10 * (1.0 + solution.z[t]));
                }
                prop_assert!(solution.residual < 1e-8);
                let (holds, _) = check_normalization_bound(&solution, horizon);
                prop_assert!(holds);
            }
            Err(_) => {
                // The failure must come with its certificate.
                prop_assert!(matrix.invertibility_margin <= 0.0);
            }
        }
    }

    /// Rollout cost is recomputable from its own states and controls.
    #[test]
    fn rollout_cost_self_consistent(x0 in -2.0f64..2.0, us in prop::collection::vec(-1.0f64..1.0, 1..20)) {
        let model = scalar_lti();
        let controls: Vec<DVector<f64>> = us.iter().map(|&u| DVector::from_vec(vec![u])).collect();
        let targets = vec![DVector::zeros(1); controls.len() + 1];
        let traj = rollout(&model, &DVector::from_vec(vec![x0]), &controls, &targets).unwrap();
        let recomputed = trajectory_cost(&model, &traj.states, &traj.controls, &targets);
        prop_assert_eq!(traj.total_cost.to_bits(), recomputed.to_bits());
    }
}
