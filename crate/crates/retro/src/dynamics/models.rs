//! Built-in desk-scale models.
//!
//! The catalog covers the pipeline at increasing difficulty: a scalar LTI
//! system for hand-checkable cases, a fixed 4-state LTI system, a planar
//! double integrator standing in for an end-effector, and a planar 2-link
//! arm (semi-implicit Euler, forward-kinematics tracking output). The
//! 13-state augmented arm exists for dimension-scaling benchmarks: the arm
//! plus a stable 9-state actuator-filter chain driven by the same torques.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use super::{ControlVector, DynamicsHessians, StateVector, SystemModel};

/// Generic linear model `x' = Ax + Bu` with linear output `C x`.
#[derive(Debug, Clone)]
pub struct LtiModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub wf: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub sigma: f64,
    name: String,
}

impl LtiModel {
    pub fn new(
        name: impl Into<String>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        w: DMatrix<f64>,
        wf: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Self {
        let n = a.nrows();
        assert_eq!(a.ncols(), n);
        assert_eq!(b.nrows(), n);
        assert_eq!(c.ncols(), n);
        assert_eq!(w.nrows(), c.nrows());
        assert_eq!(r.nrows(), b.ncols());
        Self {
            a,
            b,
            c,
            w,
            wf,
            r,
            sigma: 0.0,
            name: name.into(),
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }
}

impl SystemModel for LtiModel {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn control_dim(&self) -> usize {
        self.b.ncols()
    }
    fn target_dim(&self) -> usize {
        self.c.nrows()
    }
    fn transition(&self, x: &StateVector, u: &ControlVector, _t: usize) -> StateVector {
        &self.a * x + &self.b * u
    }
    fn jacobians(
        &self,
        _x: &StateVector,
        _u: &ControlVector,
        _t: usize,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        Some((self.a.clone(), self.b.clone()))
    }
    fn dynamics_hessians(
        &self,
        _x: &StateVector,
        _u: &ControlVector,
        _t: usize,
    ) -> Option<DynamicsHessians> {
        let n = self.state_dim();
        let m = self.control_dim();
        Some(DynamicsHessians {
            f_xx: vec![DMatrix::zeros(n, n); n],
            f_ux: vec![DMatrix::zeros(m, n); n],
            f_uu: vec![DMatrix::zeros(m, m); n],
        })
    }
    fn track_output(&self, x: &StateVector) -> DVector<f64> {
        &self.c * x
    }
    fn track_jacobian(&self, _x: &StateVector) -> DMatrix<f64> {
        self.c.clone()
    }
    fn tracking_weight(&self) -> &DMatrix<f64> {
        &self.w
    }
    fn final_weight(&self) -> &DMatrix<f64> {
        &self.wf
    }
    fn control_weight(&self) -> &DMatrix<f64> {
        &self.r
    }
    fn noise_sigma(&self) -> f64 {
        self.sigma
    }
    fn name(&self) -> &str {
        &self.name
    }
}

/// `x' = x + u` with unit weights; n = m = d = 1.
pub fn scalar_lti() -> LtiModel {
    LtiModel::new(
        "scalar_lti",
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
    )
}

/// Fixed stable 4-state, 2-input LTI system with full-state output.
pub fn lti_n4m2() -> LtiModel {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.90,  0.10,  0.00, 0.00,
       -0.05,  0.95,  0.10, 0.00,
        0.00,  0.00,  0.85, 0.20,
        0.05,  0.00, -0.10, 0.90,
    ]);
    #[rustfmt::skip]
    let b = DMatrix::from_row_slice(4, 2, &[
        0.10, 0.00,
        0.00, 0.00,
        0.05, 0.10,
        0.00, 0.20,
    ]);
    LtiModel::new(
        "lti_n4m2",
        a,
        b,
        DMatrix::identity(4, 4),
        DMatrix::identity(4, 4),
        DMatrix::identity(4, 4),
        DMatrix::identity(2, 2),
    )
}

/// Planar double integrator, state `[px, py, vx, vy]`, control = acceleration.
/// Output selects the position block. Exact zero-order-hold discretization:
/// the `dt^2/2` position coupling in `B` is what lets an instantaneous
/// control correction act on the tracked output.
pub fn double_integrator_2d(dt: f64) -> LtiModel {
    let mut a = DMatrix::identity(4, 4);
    a[(0, 2)] = dt;
    a[(1, 3)] = dt;
    let mut b = DMatrix::zeros(4, 2);
    b[(0, 0)] = 0.5 * dt * dt;
    b[(1, 1)] = 0.5 * dt * dt;
    b[(2, 0)] = dt;
    b[(3, 1)] = dt;
    let mut c = DMatrix::zeros(2, 4);
    c[(0, 0)] = 1.0;
    c[(1, 1)] = 1.0;
    let mut model = LtiModel::new(
        "double_integrator_2d",
        a,
        b,
        c,
        DMatrix::identity(2, 2),
        DMatrix::identity(2, 2) * 100.0,
        DMatrix::identity(2, 2) * 0.1,
    );
    model.name = "double_integrator_2d".into();
    model
}

/// Physical parameters of the planar 2-link arm (uniform rods).
#[derive(Debug, Clone, Copy)]
pub struct ArmParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub gravity: f64,
    pub damping: f64,
    pub dt: f64,
}

impl Default for ArmParams {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 1.0,
            l1: 0.5,
            l2: 0.5,
            gravity: 9.8,
            damping: 0.0,
            dt: 0.01,
        }
    }
}

impl ArmParams {
    fn coeffs(&self) -> (f64, f64, f64) {
        let r1 = 0.5 * self.l1;
        let r2 = 0.5 * self.l2;
        let i1 = self.m1 * self.l1 * self.l1 / 12.0;
        let i2 = self.m2 * self.l2 * self.l2 / 12.0;
        let a1 = i1 + i2 + self.m1 * r1 * r1 + self.m2 * (self.l1 * self.l1 + r2 * r2);
        let a2 = self.m2 * self.l1 * r2;
        let a3 = i2 + self.m2 * r2 * r2;
        (a1, a2, a3)
    }
}

/// Joint accelerations of the arm, generic over the scalar so the same code
/// path serves real evaluation and complex-step differentiation.
fn arm_accel<T: ComplexField<RealField = f64> + Copy>(
    p: &ArmParams,
    q: [T; 2],
    dq: [T; 2],
    tau: [T; 2],
) -> [T; 2] {
    let (a1, a2, a3) = p.coeffs();
    let a1 = T::from_real(a1);
    let a2 = T::from_real(a2);
    let a3 = T::from_real(a3);
    let g = T::from_real(p.gravity);
    let damping = T::from_real(p.damping);
    let r1 = T::from_real(0.5 * p.l1);
    let r2 = T::from_real(0.5 * p.l2);
    let m1 = T::from_real(p.m1);
    let m2 = T::from_real(p.m2);
    let l1 = T::from_real(p.l1);
    let two = T::from_real(2.0);

    let c2 = q[1].cos();
    let s2 = q[1].sin();

    // Mass matrix (symmetric PD for these parameters).
    let m11 = a1 + two * a2 * c2;
    let m12 = a3 + a2 * c2;
    let m22 = a3;

    // Coriolis/centrifugal and gravity torques.
    let h1 = -a2 * s2 * (two * dq[0] * dq[1] + dq[1] * dq[1]);
    let h2 = a2 * s2 * dq[0] * dq[0];
    let g1 = (m1 * r1 + m2 * l1) * g * q[0].cos() + m2 * r2 * g * (q[0] + q[1]).cos();
    let g2 = m2 * r2 * g * (q[0] + q[1]).cos();

    let rhs1 = tau[0] - h1 - g1 - damping * dq[0];
    let rhs2 = tau[1] - h2 - g2 - damping * dq[1];

    let det = m11 * m22 - m12 * m12;
    [
        (m22 * rhs1 - m12 * rhs2) / det,
        (m11 * rhs2 - m12 * rhs1) / det,
    ]
}

/// One semi-implicit Euler step of the arm.
fn arm_step<T: ComplexField<RealField = f64> + Copy>(
    p: &ArmParams,
    x: [T; 4],
    u: [T; 2],
) -> [T; 4] {
    let ddq = arm_accel(p, [x[0], x[1]], [x[2], x[3]], u);
    let dt = T::from_real(p.dt);
    let v1 = x[2] + ddq[0] * dt;
    let v2 = x[3] + ddq[1] * dt;
    [x[0] + v1 * dt, x[1] + v2 * dt, v1, v2]
}

/// Planar 2-link arm: state `[q1, q2, dq1, dq2]`, control = joint torques,
/// tracking output = end-effector position via forward kinematics.
#[derive(Debug, Clone)]
pub struct TwoLinkArm {
    pub params: ArmParams,
    pub w: DMatrix<f64>,
    pub wf: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub sigma: f64,
}

impl TwoLinkArm {
    pub fn new(params: ArmParams) -> Self {
        Self {
            params,
            w: DMatrix::identity(2, 2),
            wf: DMatrix::identity(2, 2) * 100.0,
            r: DMatrix::identity(2, 2) * 0.1,
            sigma: 0.0,
        }
    }

    pub fn with_weights(mut self, w: DMatrix<f64>, wf: DMatrix<f64>, r: DMatrix<f64>) -> Self {
        self.w = w;
        self.wf = wf;
        self.r = r;
        self
    }

    /// Joint accelerations at `(q, dq)` under torques `tau`.
    pub fn accelerations(&self, q: [f64; 2], dq: [f64; 2], tau: [f64; 2]) -> [f64; 2] {
        arm_accel(&self.params, q, dq, tau)
    }

    /// End-effector position for joint angles `q`.
    pub fn forward_kinematics(&self, q1: f64, q2: f64) -> DVector<f64> {
        let p = &self.params;
        DVector::from_vec(vec![
            p.l1 * q1.cos() + p.l2 * (q1 + q2).cos(),
            p.l1 * q1.sin() + p.l2 * (q1 + q2).sin(),
        ])
    }

    fn complex_step_jacobians(
        &self,
        x: &StateVector,
        u: &ControlVector,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        // Complex-step differentiation: exact to machine precision, no
        // cancellation, and it differentiates the real transition verbatim.
        let h = 1e-100;
        let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let uc: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut a = DMatrix::zeros(4, 4);
        for j in 0..4 {
            let mut xp = [xc[0], xc[1], xc[2], xc[3]];
            xp[j] += Complex64::new(0.0, h);
            let out = arm_step(&self.params, xp, [uc[0], uc[1]]);
            for i in 0..4 {
                a[(i, j)] = out[i].im / h;
            }
        }
        let mut b = DMatrix::zeros(4, 2);
        for j in 0..2 {
            let mut up = [uc[0], uc[1]];
            up[j] += Complex64::new(0.0, h);
            let out = arm_step(&self.params, [xc[0], xc[1], xc[2], xc[3]], up);
            for i in 0..4 {
                b[(i, j)] = out[i].im / h;
            }
        }
        (a, b)
    }
}

impl SystemModel for TwoLinkArm {
    fn state_dim(&self) -> usize {
        4
    }
    fn control_dim(&self) -> usize {
        2
    }
    fn target_dim(&self) -> usize {
        2
    }
    fn transition(&self, x: &StateVector, u: &ControlVector, _t: usize) -> StateVector {
        let out = arm_step(&self.params, [x[0], x[1], x[2], x[3]], [u[0], u[1]]);
        DVector::from_vec(out.to_vec())
    }
    fn jacobians(
        &self,
        x: &StateVector,
        u: &ControlVector,
        _t: usize,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        Some(self.complex_step_jacobians(x, u))
    }
    fn track_output(&self, x: &StateVector) -> DVector<f64> {
        self.forward_kinematics(x[0], x[1])
    }
    fn track_jacobian(&self, x: &StateVector) -> DMatrix<f64> {
        let p = &self.params;
        let (q1, q2) = (x[0], x[1]);
        let s1 = q1.sin();
        let c1 = q1.cos();
        let s12 = (q1 + q2).sin();
        let c12 = (q1 + q2).cos();
        let mut j = DMatrix::zeros(2, 4);
        j[(0, 0)] = -p.l1 * s1 - p.l2 * s12;
        j[(0, 1)] = -p.l2 * s12;
        j[(1, 0)] = p.l1 * c1 + p.l2 * c12;
        j[(1, 1)] = p.l2 * c12;
        j
    }
    fn track_hessians(&self, x: &StateVector) -> Option<Vec<DMatrix<f64>>> {
        let p = &self.params;
        let (q1, q2) = (x[0], x[1]);
        let c1 = q1.cos();
        let s1 = q1.sin();
        let c12 = (q1 + q2).cos();
        let s12 = (q1 + q2).sin();
        let mut hx = DMatrix::zeros(4, 4);
        hx[(0, 0)] = -p.l1 * c1 - p.l2 * c12;
        hx[(0, 1)] = -p.l2 * c12;
        hx[(1, 0)] = -p.l2 * c12;
        hx[(1, 1)] = -p.l2 * c12;
        let mut hy = DMatrix::zeros(4, 4);
        hy[(0, 0)] = -p.l1 * s1 - p.l2 * s12;
        hy[(0, 1)] = -p.l2 * s12;
        hy[(1, 0)] = -p.l2 * s12;
        hy[(1, 1)] = -p.l2 * s12;
        Some(vec![hx, hy])
    }
    fn tracking_weight(&self) -> &DMatrix<f64> {
        &self.w
    }
    fn final_weight(&self) -> &DMatrix<f64> {
        &self.wf
    }
    fn control_weight(&self) -> &DMatrix<f64> {
        &self.r
    }
    fn noise_sigma(&self) -> f64 {
        self.sigma
    }
    fn name(&self) -> &str {
        "two_link_arm"
    }
}

/// The 2-link arm with a 9-state actuator-filter chain appended (n = 13),
/// used by the dimension-scaling benchmarks. The chain is a stable damped
/// cascade driven by the torque inputs; it does not feed back into the arm
/// and stays out of the tracking output.
#[derive(Debug, Clone)]
pub struct ArmAugmented {
    arm: TwoLinkArm,
    chain_a: DMatrix<f64>,
    chain_b: DMatrix<f64>,
}

const CHAIN_DIM: usize = 9;

impl ArmAugmented {
    pub fn with_weights(mut self, w: DMatrix<f64>, wf: DMatrix<f64>, r: DMatrix<f64>) -> Self {
        self.arm.w = w;
        self.arm.wf = wf;
        self.arm.r = r;
        self
    }

    pub fn new(params: ArmParams) -> Self {
        let dt = params.dt;
        let mut a = DMatrix::zeros(CHAIN_DIM, CHAIN_DIM);
        for i in 0..CHAIN_DIM {
            a[(i, i)] = 1.0 - 1.5 * dt;
            if i > 0 {
                a[(i, i - 1)] = 0.5 * dt;
            }
            if i + 1 < CHAIN_DIM {
                a[(i, i + 1)] = 0.25 * dt;
            }
        }
        let mut b = DMatrix::zeros(CHAIN_DIM, 2);
        b[(0, 0)] = dt;
        b[(1, 1)] = dt;
        Self {
            arm: TwoLinkArm::new(params),
            chain_a: a,
            chain_b: b,
        }
    }
}

impl SystemModel for ArmAugmented {
    fn state_dim(&self) -> usize {
        4 + CHAIN_DIM
    }
    fn control_dim(&self) -> usize {
        2
    }
    fn target_dim(&self) -> usize {
        2
    }
    fn transition(&self, x: &StateVector, u: &ControlVector, t: usize) -> StateVector {
        let arm_next =
            self.arm
                .transition(&DVector::from_iterator(4, x.iter().take(4).copied()), u, t);
        let chain = x.rows(4, CHAIN_DIM);
        let chain_next = &self.chain_a * chain + &self.chain_b * u;
        let mut out = DVector::zeros(4 + CHAIN_DIM);
        out.rows_mut(0, 4).copy_from(&arm_next);
        out.rows_mut(4, CHAIN_DIM).copy_from(&chain_next);
        out
    }
    fn jacobians(
        &self,
        x: &StateVector,
        u: &ControlVector,
        t: usize,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let (arm_a, arm_b) =
            self.arm
                .jacobians(&DVector::from_iterator(4, x.iter().take(4).copied()), u, t)?;
        let n = self.state_dim();
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (4, 4)).copy_from(&arm_a);
        a.view_mut((4, 4), (CHAIN_DIM, CHAIN_DIM))
            .copy_from(&self.chain_a);
        let mut b = DMatrix::zeros(n, 2);
        b.view_mut((0, 0), (4, 2)).copy_from(&arm_b);
        b.view_mut((4, 0), (CHAIN_DIM, 2)).copy_from(&self.chain_b);
        Some((a, b))
    }
    fn track_output(&self, x: &StateVector) -> DVector<f64> {
        self.arm.forward_kinematics(x[0], x[1])
    }
    fn track_jacobian(&self, x: &StateVector) -> DMatrix<f64> {
        let inner = self
            .arm
            .track_jacobian(&DVector::from_iterator(4, x.iter().take(4).copied()));
        let mut j = DMatrix::zeros(2, self.state_dim());
        j.view_mut((0, 0), (2, 4)).copy_from(&inner);
        j
    }
    fn track_hessians(&self, x: &StateVector) -> Option<Vec<DMatrix<f64>>> {
        let inner = self
            .arm
            .track_hessians(&DVector::from_iterator(4, x.iter().take(4).copied()))?;
        let n = self.state_dim();
        Some(
            inner
                .into_iter()
                .map(|h| {
                    let mut big = DMatrix::zeros(n, n);
                    big.view_mut((0, 0), (4, 4)).copy_from(&h);
                    big
                })
                .collect(),
        )
    }
    fn tracking_weight(&self) -> &DMatrix<f64> {
        &self.arm.w
    }
    fn final_weight(&self) -> &DMatrix<f64> {
        &self.arm.wf
    }
    fn control_weight(&self) -> &DMatrix<f64> {
        &self.arm.r
    }
    fn name(&self) -> &str {
        "two_link_arm_augmented"
    }
}

/// 2-link arm with default parameters.
pub fn two_link_arm() -> TwoLinkArm {
    TwoLinkArm::new(ArmParams::default())
}

/// 13-state augmented arm with default parameters.
pub fn two_link_arm_augmented() -> ArmAugmented {
    ArmAugmented::new(ArmParams::default())
}

/// Catalog of the built-in models under their default parameters.
pub fn builtin_models() -> Vec<Box<dyn SystemModel>> {
    vec![
        Box::new(scalar_lti()),
        Box::new(lti_n4m2()),
        Box::new(double_integrator_2d(0.01)),
        Box::new(two_link_arm()),
        Box::new(two_link_arm_augmented()),
    ]
}
