//! Planar double integrator with quadratic cost.
//!
//! State is (position, velocity) in R^2 x R^2; the action is a force in
//! `[-action_limit, action_limit]^2`. Explicit Euler:
//!
//! ```text
//! pos'  = pos + dt * vel        (then clamped to +-pos_limit)
//! vel'  = vel + dt * a          (then clamped to +-vel_limit)
//! ```
//!
//! Reward is `-(|pos|^2 + act_cost * |a|^2)` with the clipped action, so the
//! origin with zero action is a fixed point of maximal reward 0.
//!
//! Defaults: dt 0.05, pos_limit 5, vel_limit 5, action_limit 1,
//! act_cost 0.1, max_episode_steps 100. Initial position is uniform in
//! `[-1, 1]^2`, initial velocity uniform in `[-0.5, 0.5]^2`.

use super::{prepare_action, reject_unknown, take_override, EnvSpec, EnvState, Environment};
use crate::error::Result;
use crate::rng::stream_rng;
use rand::Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct PointMass2d {
    spec: EnvSpec,
    dt: f64,
    pos_limit: f64,
    vel_limit: f64,
    act_cost: f64,
    pos: [f64; 2],
    vel: [f64; 2],
    step_index: u32,
    done: bool,
}

impl PointMass2d {
    pub fn from_overrides(overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut consumed = Vec::new();
        let dt = take_override(overrides, &mut consumed, "dt", 0.05);
        let pos_limit = take_override(overrides, &mut consumed, "pos_limit", 5.0);
        let vel_limit = take_override(overrides, &mut consumed, "vel_limit", 5.0);
        let action_limit = take_override(overrides, &mut consumed, "action_limit", 1.0);
        let act_cost = take_override(overrides, &mut consumed, "act_cost", 0.1);
        let max_steps = take_override(overrides, &mut consumed, "max_episode_steps", 100.0) as u32;
        reject_unknown(overrides, &consumed)?;

        let worst = 2.0 * pos_limit * pos_limit + act_cost * 2.0 * action_limit * action_limit;
        let spec = EnvSpec {
            name: "point-mass-2d".into(),
            observation_dim: 4,
            action_dim: 2,
            action_low: vec![-action_limit; 2],
            action_high: vec![action_limit; 2],
            max_episode_steps: max_steps,
            reward_bounds: (-worst, 0.0),
        };
        Ok(PointMass2d {
            spec,
            dt,
            pos_limit,
            vel_limit,
            act_cost,
            pos: [0.0; 2],
            vel: [0.0; 2],
            step_index: 0,
            done: false,
        })
    }

    /// Place the system at an exact state; used by diagnostics and tests.
    pub fn set_state(&mut self, pos: [f64; 2], vel: [f64; 2]) {
        self.pos = pos;
        self.vel = vel;
        self.step_index = 0;
        self.done = false;
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }

    fn state(&self) -> EnvState {
        EnvState {
            observation: self.observation(),
            step_index: self.step_index,
            done: self.done,
        }
    }
}

impl Environment for PointMass2d {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        let mut rng = stream_rng(seed, "point-mass-2d/reset");
        self.pos = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        self.vel = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        self.step_index = 0;
        self.done = false;
        self.state()
    }

    fn step(&mut self, action: &[f64]) -> Result<(EnvState, f64)> {
        let a = prepare_action(&self.spec, self.done, action)?;

        let reward = -(self.pos[0] * self.pos[0]
            + self.pos[1] * self.pos[1]
            + self.act_cost * (a[0] * a[0] + a[1] * a[1]));

        for i in 0..2 {
            self.pos[i] = (self.pos[i] + self.dt * self.vel[i]).clamp(-self.pos_limit, self.pos_limit);
            self.vel[i] = (self.vel[i] + self.dt * a[i]).clamp(-self.vel_limit, self.vel_limit);
        }

        self.step_index += 1;
        if self.step_index >= self.spec.max_episode_steps {
            self.done = true;
        }
        Ok((self.state(), reward))
    }
}
