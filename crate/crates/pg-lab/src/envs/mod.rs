//! Deterministic, seeded toy continuous-control environments.
//!
//! Both tasks integrate with explicit Euler at a fixed `dt` and are fully
//! replayable: a (reset seed, action sequence) pair produces bitwise
//! identical trajectories. Out-of-range actions are clipped into the action
//! box before the dynamics run. Constants are overridable through `env.*`
//! config keys; every default is documented on the environment type.

mod pendulum;
mod point_mass;

pub use pendulum::{wrap_angle, PendulumSwingup};
pub use point_mass::PointMass2d;

use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Static description of an environment.
#[derive(Debug, Clone)]
pub struct EnvSpec {
    pub name: String,
    pub observation_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: u32,
    /// Inclusive bounds every emitted reward respects.
    pub reward_bounds: (f64, f64),
}

/// Observation plus episode bookkeeping. Once `done` is true, `step` is
/// illegal until the next `reset`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub step_index: u32,
    pub done: bool,
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Start a new episode from the seeded initial-state distribution.
    fn reset(&mut self, seed: u64) -> EnvState;

    /// Advance one step. Actions are clipped into the action box first.
    fn step(&mut self, action: &[f64]) -> Result<(EnvState, f64)>;
}

/// Checks shared by all environments before their dynamics run. Returns the
/// clipped action.
fn prepare_action(spec: &EnvSpec, done: bool, action: &[f64]) -> Result<Vec<f64>> {
    if done {
        return Err(Error::Usage(
            "step called on a finished episode; call reset first".into(),
        ));
    }
    if action.len() != spec.action_dim {
        return Err(Error::Shape {
            what: "action",
            expected: spec.action_dim,
            got: action.len(),
        });
    }
    Ok(action
        .iter()
        .enumerate()
        .map(|(i, &a)| a.clamp(spec.action_low[i], spec.action_high[i]))
        .collect())
}

/// Construct a registered environment by name. `overrides` holds `env.*`
/// config values with the `env.` prefix stripped; unknown keys are rejected.
pub fn make_env(name: &str, overrides: &BTreeMap<String, f64>) -> Result<Box<dyn Environment>> {
    match name {
        "point-mass-2d" => Ok(Box::new(PointMass2d::from_overrides(overrides)?)),
        "pendulum-swingup" => Ok(Box::new(PendulumSwingup::from_overrides(overrides)?)),
        other => Err(Error::Config(format!(
            "unknown environment '{other}' (registered: point-mass-2d, pendulum-swingup)"
        ))),
    }
}

/// Names accepted by `make_env`.
pub fn registered_envs() -> &'static [&'static str] {
    &["point-mass-2d", "pendulum-swingup"]
}

fn take_override(
    overrides: &BTreeMap<String, f64>,
    consumed: &mut Vec<String>,
    key: &str,
    default: f64,
) -> f64 {
    consumed.push(key.to_string());
    overrides.get(key).copied().unwrap_or(default)
}

fn reject_unknown(overrides: &BTreeMap<String, f64>, consumed: &[String]) -> Result<()> {
    for key in overrides.keys() {
        if !consumed.iter().any(|c| c == key) {
            return Err(Error::Config(format!("unknown env override 'env.{key}'")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
