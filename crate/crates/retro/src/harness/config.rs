//! Scenario configuration: a strict TOML schema with unknown-key rejection,
//! fully validated before anything runs. Every tunable the solver, belief
//! engine, and adjustment layer expose is reachable from here.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    double_integrator_2d, lti_n4m2, scalar_lti, ArmParams, SystemModel, TwoLinkArm,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub launch: LaunchSection,
    #[serde(default)]
    pub observations: ObservationSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub gmm: GmmSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default)]
    pub seed: u64,
    /// Number of control steps `T`.
    #[serde(default = "d_horizon")]
    pub horizon: usize,
    #[serde(default = "d_dt")]
    pub dt: f64,
    /// Shift threshold in nats.
    #[serde(default = "d_lambda")]
    pub lambda_thres: f64,
    /// `ballistic` or `gmm`.
    #[serde(default = "d_forecaster")]
    pub forecaster: Forecaster,
}

fn d_horizon() -> usize {
    200
}
fn d_dt() -> f64 {
    0.01
}
fn d_lambda() -> f64 {
    0.05
}
fn d_forecaster() -> Forecaster {
    Forecaster::Ballistic
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            seed: 0,
            horizon: d_horizon(),
            dt: d_dt(),
            lambda_thres: d_lambda(),
            forecaster: d_forecaster(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Forecaster {
    Ballistic,
    Gmm,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "d_model_id")]
    pub id: String,
    /// Scalar applied to the identity tracking weight `W`.
    #[serde(default = "d_w")]
    pub tracking_weight: f64,
    /// Scalar applied to the identity final weight `Wf`.
    #[serde(default = "d_wf")]
    pub final_weight: f64,
    /// Scalar applied to the identity control weight `R`.
    #[serde(default = "d_r")]
    pub control_weight: f64,
    /// Execution process-noise scale (planning always uses the mean
    /// dynamics).
    #[serde(default)]
    pub noise_sigma: f64,
    /// Two-link arm parameters; ignored by the other models.
    #[serde(default)]
    pub arm: ArmSection,
}

fn d_model_id() -> String {
    "double_integrator_2d".to_string()
}
fn d_w() -> f64 {
    20.0
}
fn d_wf() -> f64 {
    100.0
}
fn d_r() -> f64 {
    0.002
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            id: d_model_id(),
            tracking_weight: d_w(),
            final_weight: d_wf(),
            control_weight: d_r(),
            noise_sigma: 0.0,
            arm: ArmSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ArmSection {
    #[serde(default = "d_mass")]
    pub m1: f64,
    #[serde(default = "d_mass")]
    pub m2: f64,
    #[serde(default = "d_len")]
    pub l1: f64,
    #[serde(default = "d_len")]
    pub l2: f64,
    #[serde(default = "d_gravity_mag")]
    pub gravity: f64,
    #[serde(default)]
    pub damping: f64,
}

fn d_mass() -> f64 {
    1.0
}
fn d_len() -> f64 {
    0.5
}
fn d_gravity_mag() -> f64 {
    9.8
}

impl Default for ArmSection {
    fn default() -> Self {
        let p = ArmParams::default();
        Self {
            m1: p.m1,
            m2: p.m2,
            l1: p.l1,
            l2: p.l2,
            gravity: p.gravity,
            damping: p.damping,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LaunchSection {
    /// Mean launch position of the target (length `d`).
    #[serde(default = "d_position")]
    pub position: Vec<f64>,
    /// Mean launch velocity (length `d`).
    #[serde(default = "d_velocity")]
    pub velocity: Vec<f64>,
    #[serde(default = "d_pos_std")]
    pub position_std: f64,
    #[serde(default = "d_vel_std")]
    pub velocity_std: f64,
    /// Acceleration vector, e.g. `[0.0, -9.8]`.
    #[serde(default = "d_gravity_vec")]
    pub gravity: Vec<f64>,
    /// Belief-side process noise scale.
    #[serde(default)]
    pub process_noise: f64,
}

fn d_position() -> Vec<f64> {
    vec![1.2, 1.6]
}
fn d_velocity() -> Vec<f64> {
    vec![-0.8, 9.8]
}
fn d_pos_std() -> f64 {
    0.15
}
fn d_vel_std() -> f64 {
    0.25
}
fn d_gravity_vec() -> Vec<f64> {
    vec![0.0, -9.8]
}

impl Default for LaunchSection {
    fn default() -> Self {
        Self {
            position: d_position(),
            velocity: d_velocity(),
            position_std: d_pos_std(),
            velocity_std: d_vel_std(),
            gravity: d_gravity_vec(),
            process_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ObservationSection {
    /// Explicit observation steps; used when non-empty.
    #[serde(default)]
    pub times: Vec<usize>,
    /// Otherwise one observation every `every` steps (0 = none).
    #[serde(default = "d_every")]
    pub every: usize,
    #[serde(default = "d_obs_noise")]
    pub noise: f64,
}

fn d_every() -> usize {
    20
}
fn d_obs_noise() -> f64 {
    0.05
}

impl Default for ObservationSection {
    fn default() -> Self {
        Self {
            times: vec![],
            every: d_every(),
            noise: d_obs_noise(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_reg")]
    pub reg_init: f64,
    #[serde(default)]
    pub full_ddp: bool,
}

fn d_max_iters() -> usize {
    100
}
fn d_tol() -> f64 {
    1e-8
}
fn d_reg() -> f64 {
    1e-10
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            max_iters: d_max_iters(),
            tol: d_tol(),
            reg_init: d_reg(),
            full_ddp: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GmmSection {
    #[serde(default = "d_components")]
    pub components: usize,
    /// Monte-Carlo sample count for mixture KL.
    #[serde(default = "d_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "d_restarts")]
    pub em_restarts: usize,
    #[serde(default = "d_em_iters")]
    pub em_max_iters: usize,
}

fn d_components() -> usize {
    1
}
fn d_mc_samples() -> usize {
    100_000
}
fn d_restarts() -> usize {
    3
}
fn d_em_iters() -> usize {
    200
}

impl Default for GmmSection {
    fn default() -> Self {
        Self {
            components: d_components(),
            mc_samples: d_mc_samples(),
            em_restarts: d_restarts(),
            em_max_iters: d_em_iters(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "d_out_dir")]
    pub dir: String,
    /// `json` or `csv` for the tabular outputs.
    #[serde(default = "d_out_format")]
    pub format: String,
}

fn d_out_dir() -> String {
    "out".to_string()
}
fn d_out_format() -> String {
    "json".to_string()
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: d_out_dir(),
            format: d_out_format(),
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioSection::default(),
            model: ModelSection::default(),
            launch: LaunchSection::default(),
            observations: ObservationSection::default(),
            solver: SolverSection::default(),
            gmm: GmmSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_path(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_string(),
            source,
        })?;
        let config: ScenarioConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError::Invalid(m));
        if self.scenario.horizon < 2 {
            return err(format!(
                "scenario.horizon must be >= 2, got {}",
                self.scenario.horizon
            ));
        }
        if !(self.scenario.dt > 0.0) {
            return err(format!(
                "scenario.dt must be positive, got {}",
                self.scenario.dt
            ));
        }
        if self.scenario.lambda_thres < 0.0 {
            return err("scenario.lambda_thres must be nonnegative".into());
        }
        let known = [
            "scalar_lti",
            "lti_n4m2",
            "double_integrator_2d",
            "two_link_arm",
            "two_link_arm_augmented",
        ];
        if !known.contains(&self.model.id.as_str()) {
            return err(format!(
                "model.id '{}' unknown; expected one of {known:?}",
                self.model.id
            ));
        }
        for (name, v) in [
            ("tracking_weight", self.model.tracking_weight),
            ("final_weight", self.model.final_weight),
        ] {
            if v < 0.0 {
                return err(format!("model.{name} must be nonnegative, got {v}"));
            }
        }
        if !(self.model.control_weight > 0.0) {
            return err(format!(
                "model.control_weight must be positive, got {}",
                self.model.control_weight
            ));
        }
        let d = self.target_dim();
        if self.launch.position.len() != d
            || self.launch.velocity.len() != d
            || self.launch.gravity.len() != d
        {
            return err(format!(
                "launch vectors must have length {d} for model '{}'",
                self.model.id
            ));
        }
        if self.launch.position_std < 0.0 || self.launch.velocity_std < 0.0 {
            return err("launch stds must be nonnegative".into());
        }
        if self.observations.noise < 0.0 {
            return err("observations.noise must be nonnegative".into());
        }
        for &t in &self.observations.times {
            if t >= self.scenario.horizon {
                return err(format!(
                    "observation time {t} outside horizon {}",
                    self.scenario.horizon
                ));
            }
        }
        if self.gmm.components == 0 {
            return err("gmm.components must be >= 1".into());
        }
        if self.solver.max_iters == 0 {
            return err("solver.max_iters must be >= 1".into());
        }
        if !["json", "csv"].contains(&self.output.format.as_str()) {
            return err(format!(
                "output.format must be json or csv, got {}",
                self.output.format
            ));
        }
        Ok(())
    }

    /// Target-space dimension implied by the model.
    pub fn target_dim(&self) -> usize {
        match self.model.id.as_str() {
            "scalar_lti" => 1,
            "lti_n4m2" => 4,
            _ => 2,
        }
    }

    /// Observation steps implied by the schedule.
    pub fn observation_times(&self) -> Vec<usize> {
        if !self.observations.times.is_empty() {
            let mut ts = self.observations.times.clone();
            ts.sort_unstable();
            ts.dedup();
            return ts;
        }
        if self.observations.every == 0 {
            return vec![];
        }
        (1..self.scenario.horizon)
            .filter(|t| t % self.observations.every == 0)
            .collect()
    }

    /// Instantiate the configured model with the configured weights.
    pub fn build_model(&self) -> Box<dyn SystemModel> {
        let w = self.model.tracking_weight;
        let wf = self.model.final_weight;
        let r = self.model.control_weight;
        match self.model.id.as_str() {
            "scalar_lti" => {
                let mut m = scalar_lti();
                m.w *= w;
                m.wf *= wf;
                m.r *= r;
                m.sigma = self.model.noise_sigma;
                Box::new(m)
            }
            "lti_n4m2" => {
                let mut m = lti_n4m2();
                m.w *= w;
                m.wf *= wf;
                m.r *= r;
                m.sigma = self.model.noise_sigma;
                Box::new(m)
            }
            "double_integrator_2d" => {
                let mut m = double_integrator_2d(self.scenario.dt);
                m.w = DMatrix::identity(2, 2) * w;
                m.wf = DMatrix::identity(2, 2) * wf;
                m.r = DMatrix::identity(2, 2) * r;
                m.sigma = self.model.noise_sigma;
                Box::new(m)
            }
            "two_link_arm" | "two_link_arm_augmented" => {
                let a = &self.model.arm;
                let params = ArmParams {
                    m1: a.m1,
                    m2: a.m2,
                    l1: a.l1,
                    l2: a.l2,
                    gravity: a.gravity,
                    damping: a.damping,
                    dt: self.scenario.dt,
                };
                if self.model.id == "two_link_arm" {
                    let mut arm = TwoLinkArm::new(params);
                    arm.w = DMatrix::identity(2, 2) * w;
                    arm.wf = DMatrix::identity(2, 2) * wf;
                    arm.r = DMatrix::identity(2, 2) * r;
                    arm.sigma = self.model.noise_sigma;
                    Box::new(arm)
                } else {
                    Box::new(crate::dynamics::ArmAugmented::new(params).with_weights(
                        DMatrix::identity(2, 2) * w,
                        DMatrix::identity(2, 2) * wf,
                        DMatrix::identity(2, 2) * r,
                    ))
                }
            }
            other => unreachable!("validated model id {other}"),
        }
    }

    /// Launch-state mean `[position; velocity]`.
    pub fn launch_mean(&self) -> DVector<f64> {
        let d = self.target_dim();
        let mut v = DVector::zeros(2 * d);
        for i in 0..d {
            v[i] = self.launch.position[i];
            v[d + i] = self.launch.velocity[i];
        }
        v
    }

    /// Launch-state covariance.
    pub fn launch_cov(&self) -> DMatrix<f64> {
        let d = self.target_dim();
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            m[(i, i)] = self.launch.position_std * self.launch.position_std;
            m[(d + i, d + i)] = self.launch.velocity_std * self.launch.velocity_std;
        }
        m
    }

    pub fn gravity(&self) -> DVector<f64> {
        DVector::from_vec(self.launch.gravity.clone())
    }
}
