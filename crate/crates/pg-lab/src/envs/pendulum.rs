//! Torque-limited pendulum swing-up.
//!
//! The angle `theta` is measured from upright (`theta = 0` is up, `theta =
//! +-pi` hangs down) and wrapped into `[-pi, pi)`. The gravity term pushes
//! away from upright, so hanging down is the rest equilibrium and the agent
//! must pump energy to swing up. Explicit Euler with the angular
//! acceleration of a rigid rod actuated at the pivot:
//!
//! ```text
//! theta'' = (3 g / (2 l)) sin(theta) + (3 / (m l^2)) u
//! omega'  = omega + dt * theta''     (then clamped to +-max_speed)
//! theta'  = wrap(theta + dt * omega) (old omega: explicit Euler)
//! ```
//!
//! Reward is `-(theta^2 + 0.1 omega^2 + 0.001 u^2)` with the clipped torque
//! `u`; balancing upright scores 0. Episodes end only at the step limit.
//!
//! Defaults: dt 0.05, g 10, m 1, l 1, max_torque 2, max_speed 8,
//! max_episode_steps 200. Initial angle is uniform in `[-pi, pi)`, initial
//! angular velocity uniform in `[-1, 1]`.

use super::{prepare_action, reject_unknown, take_override, EnvSpec, EnvState, Environment};
use crate::error::Result;
use crate::rng::stream_rng;
use rand::Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct PendulumSwingup {
    spec: EnvSpec,
    dt: f64,
    gravity: f64,
    mass: f64,
    length: f64,
    max_speed: f64,
    theta: f64,
    omega: f64,
    step_index: u32,
    done: bool,
}

/// Wrap an angle into [-pi, pi).
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    debug_assert!((-PI..=PI).contains(&wrapped));
    wrapped
}

impl PendulumSwingup {
    pub fn from_overrides(overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut consumed = Vec::new();
        let dt = take_override(overrides, &mut consumed, "dt", 0.05);
        let gravity = take_override(overrides, &mut consumed, "g", 10.0);
        let mass = take_override(overrides, &mut consumed, "m", 1.0);
        let length = take_override(overrides, &mut consumed, "l", 1.0);
        let max_torque = take_override(overrides, &mut consumed, "max_torque", 2.0);
        let max_speed = take_override(overrides, &mut consumed, "max_speed", 8.0);
        let max_steps = take_override(overrides, &mut consumed, "max_episode_steps", 200.0) as u32;
        reject_unknown(overrides, &consumed)?;

        let worst = PI * PI + 0.1 * max_speed * max_speed + 0.001 * max_torque * max_torque;
        let spec = EnvSpec {
            name: "pendulum-swingup".into(),
            observation_dim: 3,
            action_dim: 1,
            action_low: vec![-max_torque],
            action_high: vec![max_torque],
            max_episode_steps: max_steps,
            reward_bounds: (-worst, 0.0),
        };
        Ok(PendulumSwingup {
            spec,
            dt,
            gravity,
            mass,
            length,
            max_speed,
            theta: PI,
            omega: 0.0,
            step_index: 0,
            done: false,
        })
    }

    /// Place the pendulum at an exact state; used by diagnostics and tests.
    pub fn set_state(&mut self, theta: f64, omega: f64) {
        self.theta = theta;
        self.omega = omega;
        self.step_index = 0;
        self.done = false;
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.omega]
    }

    fn state(&self) -> EnvState {
        EnvState {
            observation: self.observation(),
            step_index: self.step_index,
            done: self.done,
        }
    }
}

impl Environment for PendulumSwingup {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        let mut rng = stream_rng(seed, "pendulum-swingup/reset");
        self.theta = rng.gen_range(-PI..PI);
        self.omega = rng.gen_range(-1.0..1.0);
        self.step_index = 0;
        self.done = false;
        self.state()
    }

    fn step(&mut self, action: &[f64]) -> Result<(EnvState, f64)> {
        let torque = prepare_action(&self.spec, self.done, action)?[0];

        let angle = wrap_angle(self.theta);
        let reward =
            -(angle * angle + 0.1 * self.omega * self.omega + 0.001 * torque * torque);

        let accel = 1.5 * self.gravity / self.length * self.theta.sin()
            + 3.0 / (self.mass * self.length * self.length) * torque;
        let new_theta = wrap_angle(self.theta + self.dt * self.omega);
        let new_omega = (self.omega + self.dt * accel).clamp(-self.max_speed, self.max_speed);
        self.theta = new_theta;
        self.omega = new_omega;

        self.step_index += 1;
        if self.step_index >= self.spec.max_episode_steps {
            self.done = true;
        }
        Ok((self.state(), reward))
    }
}
