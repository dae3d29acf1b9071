//! TD3: twin critics with pessimistic smoothed targets and delayed actor
//! updates.

use super::buffer::Transition;
use super::ddpg::{actor_ascent_step, critic_step_toward, polyak_all_targets};
use super::{critic_input, AgentState, Algorithm};
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Pessimistic smoothed targets:
/// `a' = clip(mu_tg(s') + clip(eps, +-c), bounds)`, `eps ~ N(0, sigma)`,
/// `y = r + gamma (1 - done) min(Q1_tg, Q2_tg)(s', a')`.
pub(super) fn td3_targets(
    agent: &AgentState,
    batch: &[&Transition],
    noise_rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let gamma = agent.config.gamma;
    let sigma = agent.config.td3.target_noise_std;
    let clip = agent.config.td3.target_noise_clip;
    let target_actor = agent
        .target_actor
        .as_ref()
        .ok_or_else(|| Error::Usage("target networks not initialized".into()))?;

    batch
        .iter()
        .map(|t| {
            // Noise is drawn even for terminal transitions so the stream
            // advances identically regardless of the done pattern.
            let mut next_action = target_actor.forward(&t.next_state)?;
            for (i, a) in next_action.iter_mut().enumerate() {
                let eps: f64 = noise_rng.sample(StandardNormal);
                let noise = (sigma * eps).clamp(-clip, clip);
                *a = (*a + noise).clamp(agent.action_low[i], agent.action_high[i]);
            }
            if t.done {
                return Ok(t.reward);
            }
            let input = critic_input(&t.next_state, &next_action);
            let q1 = agent.target_critics[0].forward(&input)?[0];
            let q2 = agent.target_critics[1].forward(&input)?[0];
            let y = t.reward + gamma * q1.min(q2);
            // Pessimism: never above either single-critic target.
            debug_assert!(y <= t.reward + gamma * q1 + 1e-12);
            debug_assert!(y <= t.reward + gamma * q2 + 1e-12);
            Ok(y)
        })
        .collect()
}

/// One TD3 update. Both critics regress to the shared pessimistic target
/// every call; the actor and all targets move only when
/// `update_index % policy_delay == 0`.
pub fn td3_update(
    agent: &mut AgentState,
    batch: &[&Transition],
    update_index: u64,
    noise_rng: &mut ChaCha8Rng,
) -> Result<()> {
    if agent.algorithm != Algorithm::Td3 {
        return Err(Error::Usage("td3_update called on a non-TD3 agent".into()));
    }
    if batch.is_empty() {
        return Err(Error::Usage("empty minibatch".into()));
    }
    let targets = td3_targets(agent, batch, noise_rng)?;
    critic_step_toward(agent, 0, batch, &targets)?;
    critic_step_toward(agent, 1, batch, &targets)?;
    if update_index % agent.config.td3.policy_delay == 0 {
        actor_ascent_step(agent, 0, batch)?;
        polyak_all_targets(agent)?;
    }
    Ok(())
}
