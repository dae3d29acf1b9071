//! PPO: clipped-surrogate actor updates with Monte-Carlo critic regression.

use super::buffer::RolloutBuffer;
use super::gaussian::{dlogp_dlogstd, dlogp_dmean, gaussian_log_prob};
use super::{AgentState, Algorithm};
use crate::error::{Error, Result};
use crate::nn::adam_step_flat;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// One minibatch of clipped-surrogate ascent on the actor (MLP mean plus
/// log-std head) with an entropy bonus.
fn actor_minibatch_step(
    agent: &mut AgentState,
    buffer: &RolloutBuffer,
    indices: &[usize],
) -> Result<()> {
    let epsilon = agent.config.ppo.clip_epsilon;
    let entropy_coef = agent.config.ppo.entropy_coef;
    let advantages = buffer.advantages()?;
    let n_mlp = agent.actor.param_count();
    let act_dim = agent.log_std.as_ref().expect("ppo log_std").len();
    let batch_scale = 1.0 / indices.len() as f64;

    // Loss: -mean_i min(r_i A_i, clip(r_i) A_i) - c * H(pi).
    let mut grad = vec![0.0; n_mlp + act_dim];
    let log_std = agent.log_std.as_ref().unwrap().clone();
    let mut d_mean = vec![0.0; act_dim];
    let mut d_ls = vec![0.0; act_dim];
    for &idx in indices {
        let t = &buffer.transitions[idx];
        let advantage = advantages[idx];
        let (mean, trace) = agent.actor.forward_trace(&t.state)?;
        let new_log_prob = gaussian_log_prob(&mean, &log_std, &t.action);
        let ratio = (new_log_prob - t.log_prob).exp();
        if !ratio.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite probability ratio at transition {idx}"
            )));
        }
        let unclipped = ratio * advantage;
        let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
        // Subgradient of min: the clipped branch is constant in theta.
        if unclipped <= clipped {
            let coef = ratio * advantage;
            dlogp_dmean(&mean, &log_std, &t.action, &mut d_mean);
            let d_output: Vec<f64> = d_mean.iter().map(|d| -coef * d * batch_scale).collect();
            agent
                .actor
                .accumulate_gradient(&trace, &d_output, 1.0, &mut grad[..n_mlp])?;
            dlogp_dlogstd(&mean, &log_std, &t.action, &mut d_ls);
            for (g, d) in grad[n_mlp..].iter_mut().zip(&d_ls) {
                *g += -coef * d * batch_scale;
            }
        }
    }
    // Entropy bonus: dH/dlog_std_i = 1, independent of the batch.
    for g in grad[n_mlp..].iter_mut() {
        *g -= entropy_coef;
    }

    let mut flat = agent.actor.flatten();
    flat.extend_from_slice(agent.log_std.as_ref().unwrap());
    adam_step_flat(&mut flat, &grad, &mut agent.actor_optim)?;
    agent.actor = crate::nn::MlpParams::unflatten(agent.actor.architecture().clone(), &flat[..n_mlp])?;
    agent.log_std = Some(flat[n_mlp..].to_vec());
    Ok(())
}

/// One minibatch of MSE descent on the critic against Monte-Carlo returns.
/// Also the kernel of the matched-compute baseline.
pub fn critic_minibatch_step(
    agent: &mut AgentState,
    buffer: &RolloutBuffer,
    indices: &[usize],
) -> Result<()> {
    let returns = buffer.returns()?;
    let inputs: Vec<Vec<f64>> = indices
        .iter()
        .map(|&i| buffer.transitions[i].state.clone())
        .collect();
    let (_, grad) = agent.critics[0].grad_batch_mean(&inputs, |k, out| {
        let err = out[0] - returns[indices[k]];
        (err * err, vec![2.0 * err])
    })?;
    let (updated, optim) =
        crate::nn::adam_step(&agent.critics[0], &grad, &agent.critic_optims[0])?;
    agent.critics[0] = updated;
    agent.critic_optims[0] = optim;
    Ok(())
}

/// Run `update_epochs` passes of shuffled minibatch updates over the rollout:
/// clipped-surrogate ascent for the actor, MSE descent for the critic.
/// Requires returns and advantages to be filled in.
pub fn ppo_update(
    agent: &mut AgentState,
    buffer: &RolloutBuffer,
    shuffle_rng: &mut ChaCha8Rng,
) -> Result<()> {
    if agent.algorithm != Algorithm::Ppo {
        return Err(Error::Usage("ppo_update called on a non-PPO agent".into()));
    }
    buffer.returns()?;
    buffer.advantages()?;

    let n = buffer.len();
    let minibatch = agent.config.ppo.minibatch_size.min(n);
    let mut indices: Vec<usize> = (0..n).collect();
    for _ in 0..agent.config.ppo.update_epochs {
        indices.shuffle(shuffle_rng);
        for chunk in indices.chunks(minibatch) {
            actor_minibatch_step(agent, buffer, chunk)?;
            critic_minibatch_step(agent, buffer, chunk)?;
        }
    }
    Ok(())
}
