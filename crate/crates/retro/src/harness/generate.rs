//! Ground-truth target generation and observation streams.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::belief::Observation;
use crate::dynamics::TargetSeries;

use super::config::ScenarioConfig;

/// The realized target path plus its noisy observations, deterministic per
/// seed: the launch state is drawn from the configured distribution and
/// propagated through exact projectile kinematics.
pub fn generate_target(config: &ScenarioConfig, seed: u64) -> (TargetSeries, Vec<Observation>) {
    let d = config.target_dim();
    let horizon = config.scenario.horizon;
    let dt = config.scenario.dt;
    let gravity = config.gravity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut position = DVector::zeros(d);
    let mut velocity = DVector::zeros(d);
    for i in 0..d {
        let zp: f64 = StandardNormal.sample(&mut rng);
        let zv: f64 = StandardNormal.sample(&mut rng);
        position[i] = config.launch.position[i] + config.launch.position_std * zp;
        velocity[i] = config.launch.velocity[i] + config.launch.velocity_std * zv;
    }

    let truth: TargetSeries = (0..=horizon)
        .map(|k| {
            let tau = k as f64 * dt;
            &position + &velocity * tau + &gravity * (0.5 * tau * tau)
        })
        .collect();

    let noise = config.observations.noise;
    let observations = config
        .observation_times()
        .into_iter()
        .map(|t| {
            let mut y = truth[t].clone();
            for i in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                y[i] += noise * z;
            }
            Observation { t, y, noise }
        })
        .collect();

    (truth, observations)
}

/// Parse an observation replay file: CSV rows `t, y_1..y_d, noise`, header
/// optional.
pub fn parse_replay(text: &str, d: usize) -> Result<Vec<Observation>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && fields[0].parse::<f64>().is_err() {
            continue; // header row
        }
        if fields.len() != d + 2 {
            return Err(format!(
                "replay line {}: expected {} fields (t, y_1..y_{d}, noise), got {}",
                lineno + 1,
                d + 2,
                fields.len()
            ));
        }
        let parse = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|_| format!("replay line {}: bad {what} '{s}'", lineno + 1))
        };
        let t = parse(fields[0], "time")? as usize;
        let mut y = DVector::zeros(d);
        for i in 0..d {
            y[i] = parse(fields[1 + i], "coordinate")?;
        }
        let noise = parse(fields[d + 1], "noise")?;
        out.push(Observation { t, y, noise });
    }
    out.sort_by_key(|o| o.t);
    Ok(out)
}
