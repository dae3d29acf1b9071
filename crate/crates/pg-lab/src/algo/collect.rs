//! Environment interaction: rollout collection and greedy evaluation.

use super::buffer::{RolloutBuffer, Transition};
use super::gaussian::{gaussian_log_prob, gaussian_sample};
use super::{AgentState, Algorithm};
use crate::envs::Environment;
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// How actions are drawn when rolling a policy for data collection or
/// analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    /// Sample from the stochastic policy (PPO) or add exploration noise
    /// (DDPG/TD3).
    Explore,
    /// Deterministic action: Gaussian mean or raw actor output.
    Greedy,
}

/// An environment plus its current observation and a reset-seed stream.
/// Episodes restart transparently; reset seeds come from the stream's own
/// RNG so trajectories replay exactly for a given stream seed.
pub struct EpisodeStream {
    env: Box<dyn Environment>,
    reset_rng: ChaCha8Rng,
    obs: Vec<f64>,
}

impl EpisodeStream {
    pub fn new(mut env: Box<dyn Environment>, mut reset_rng: ChaCha8Rng) -> Self {
        let seed = reset_rng.gen();
        let state = env.reset(seed);
        EpisodeStream {
            env,
            reset_rng,
            obs: state.observation,
        }
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    /// Step with `action`; on episode end, auto-reset and report the
    /// finished episode through the return value.
    pub fn step(&mut self, action: &[f64]) -> Result<StreamStep> {
        let (state, reward) = self.env.step(action)?;
        let done = state.done;
        let next_obs = state.observation;
        let prev_obs = std::mem::replace(&mut self.obs, next_obs.clone());
        if done {
            let seed = self.reset_rng.gen();
            self.obs = self.env.reset(seed).observation;
        }
        Ok(StreamStep {
            state: prev_obs,
            next_state: next_obs,
            reward,
            done,
        })
    }
}

pub struct StreamStep {
    pub state: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Sample one action under the agent's collection policy, returning the
/// action to store and its log-probability (PPO only; 0 otherwise).
pub fn sample_action(
    agent: &AgentState,
    obs: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    match agent.algorithm {
        Algorithm::Ppo => {
            let mean = agent.actor.forward(obs)?;
            let log_std = agent.log_std.as_ref().expect("ppo has log_std");
            let action = gaussian_sample(&mean, log_std, rng);
            let log_prob = gaussian_log_prob(&mean, log_std, &action);
            Ok((action, log_prob))
        }
        Algorithm::Ddpg | Algorithm::Td3 => {
            let mut action = agent.actor.forward(obs)?;
            for (i, a) in action.iter_mut().enumerate() {
                let half_range = 0.5 * (agent.action_high[i] - agent.action_low[i]);
                let noise: f64 = rng.sample(StandardNormal);
                *a = (*a + agent.config.off_policy.exploration_noise * half_range * noise)
                    .clamp(agent.action_low[i], agent.action_high[i]);
            }
            Ok((action, 0.0))
        }
    }
}

/// Collect exactly `n_steps` on-policy transitions for PPO. Episodes reset
/// on termination; the trailing episode is left open (truncated) if the
/// budget runs out mid-episode.
pub fn collect_rollout(
    agent: &AgentState,
    stream: &mut EpisodeStream,
    n_steps: usize,
    policy_rng: &mut ChaCha8Rng,
) -> Result<RolloutBuffer> {
    if n_steps == 0 {
        return Err(Error::Usage("rollout length must be at least 1".into()));
    }
    if agent.algorithm != Algorithm::Ppo {
        return Err(Error::Usage(
            "collect_rollout is the on-policy path; DDPG/TD3 use the replay loop".into(),
        ));
    }
    let mut buffer = RolloutBuffer::default();
    for _ in 0..n_steps {
        let obs = stream.observation().to_vec();
        let (action, log_prob) = sample_action(agent, &obs, policy_rng)?;
        let step = stream.step(&action)?;
        let done = step.done;
        buffer.push(Transition {
            state: obs,
            action,
            reward: step.reward,
            next_state: step.next_state,
            done,
            log_prob,
        });
        if done {
            buffer.close_episode(true);
        }
    }
    buffer.close_episode(false);
    Ok(buffer)
}

/// Roll one full greedy episode and return its undiscounted return.
pub fn evaluate_return(
    agent: &AgentState,
    env: &mut dyn Environment,
    seed: u64,
) -> Result<f64> {
    let mut obs = env.reset(seed).observation;
    let mut total = 0.0;
    loop {
        let action = agent.deterministic_action(&obs)?;
        let (state, reward) = env.step(&action)?;
        total += reward;
        if state.done {
            return Ok(total);
        }
        obs = state.observation;
    }
}
