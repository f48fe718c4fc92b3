//! Finite-horizon discrete Riccati recursion for linear-quadratic problems.
//!
//! Reference route for checking the DDP solver on LQR instances: dynamics
//! `x' = Ax + Bu`, cost `1/2 sum (x'Qx + u'Ru) + 1/2 x_T' Qf x_T`, optimal
//! feedback `u_t = -K_t x_t`.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RiccatiError {
    #[error("R + B'PB singular at step {t}")]
    Singular { t: usize },
}

/// Backward Riccati recursion over `T` steps.
///
/// Returns the gain sequence `K_0..K_{T-1}` and value matrices `P_0..P_T`
/// with `P_T = Qf`.
pub fn riccati_lqr(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    qf: &DMatrix<f64>,
    horizon: usize,
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>), RiccatiError> {
    let mut values = vec![DMatrix::zeros(0, 0); horizon + 1];
    let mut gains = vec![DMatrix::zeros(0, 0); horizon];
    values[horizon] = qf.clone();
    for t in (0..horizon).rev() {
        let p_next = &values[t + 1];
        let bt_p = b.transpose() * p_next;
        let s = r + &bt_p * b;
        let k = s
            .clone()
            .lu()
            .solve(&(&bt_p * a))
            .ok_or(RiccatiError::Singular { t })?;
        let a_cl = a - b * &k;
        let mut p = q + a_cl.transpose() * p_next * &a_cl + k.transpose() * r * &k;
        // Keep the recursion symmetric against rounding drift.
        p = (&p + p.transpose()) * 0.5;
        gains[t] = k;
        values[t] = p;
    }
    Ok((gains, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_hand_step() {
        // A=B=Q=R=1, P_T=1: K = (1+1)^-1 * 1 = 0.5, P = 1 + (1-0.5)^2 + 0.25 = 1.5
        let (gains, values) = riccati_lqr(
            &scalar(1.0),
            &scalar(1.0),
            &scalar(1.0),
            &scalar(1.0),
            &scalar(1.0),
            1,
        )
        .unwrap();
        assert_relative_eq!(gains[0][(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(values[0][(0, 0)], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn uncontrollable_gives_zero_gain() {
        let (gains, _) = riccati_lqr(
            &scalar(0.9),
            &scalar(0.0),
            &scalar(1.0),
            &scalar(1.0),
            &scalar(1.0),
            5,
        )
        .unwrap();
        for k in gains {
            assert_eq!(k[(0, 0)], 0.0);
        }
    }

    #[test]
    fn zero_cost_gives_zero_everything() {
        let (gains, values) = riccati_lqr(
            &scalar(1.1),
            &scalar(0.7),
            &scalar(0.0),
            &scalar(1.0),
            &scalar(0.0),
            8,
        )
        .unwrap();
        for k in gains {
            assert_eq!(k[(0, 0)], 0.0);
        }
        for p in values {
            assert_eq!(p[(0, 0)], 0.0);
        }
    }
}
