//! DDPG: deterministic actor ascending Q, critic regressing to bootstrapped
//! targets, Polyak-averaged target networks.

use super::buffer::Transition;
use super::{critic_input, polyak_update, AgentState, Algorithm};
use crate::error::{Error, Result};
use crate::nn::adam_step;

/// Bootstrapped regression target `r + gamma (1 - done) Q_tg(s', mu_tg(s'))`.
pub(super) fn ddpg_targets(agent: &AgentState, batch: &[&Transition]) -> Result<Vec<f64>> {
    let gamma = agent.config.gamma;
    let target_actor = agent
        .target_actor
        .as_ref()
        .ok_or_else(|| Error::Usage("target networks not initialized".into()))?;
    let target_critic = &agent.target_critics[0];
    batch
        .iter()
        .map(|t| {
            if t.done {
                return Ok(t.reward);
            }
            let next_action = target_actor.forward(&t.next_state)?;
            let q = target_critic.forward(&critic_input(&t.next_state, &next_action))?[0];
            Ok(t.reward + gamma * q)
        })
        .collect()
}

/// Critic MSE step toward `targets` for critic `index`; shared with TD3.
pub(super) fn critic_step_toward(
    agent: &mut AgentState,
    index: usize,
    batch: &[&Transition],
    targets: &[f64],
) -> Result<()> {
    let inputs: Vec<Vec<f64>> = batch
        .iter()
        .map(|t| critic_input(&t.state, &t.action))
        .collect();
    let (_, grad) = agent.critics[index].grad_batch_mean(&inputs, |k, out| {
        let err = out[0] - targets[k];
        (err * err, vec![2.0 * err])
    })?;
    let (updated, optim) = adam_step(&agent.critics[index], &grad, &agent.critic_optims[index])?;
    agent.critics[index] = updated;
    agent.critic_optims[index] = optim;
    Ok(())
}

/// Deterministic policy-gradient step: ascend `mean_i Q(s_i, mu(s_i))`
/// through critic `critic_index`; shared with TD3.
pub(super) fn actor_ascent_step(
    agent: &mut AgentState,
    critic_index: usize,
    batch: &[&Transition],
) -> Result<()> {
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; agent.actor.param_count()];
    for t in batch {
        let (action, actor_trace) = agent.actor.forward_trace(&t.state)?;
        let input = critic_input(&t.state, &action);
        let (_, critic_trace) = agent.critics[critic_index].forward_trace(&input)?;
        // dQ/d(input) restricted to the action block, negated for descent on
        // -Q and averaged over the batch.
        let mut zero_acc = vec![0.0; agent.critics[critic_index].param_count()];
        let d_input = agent.critics[critic_index].accumulate_gradient(
            &critic_trace,
            &[1.0],
            0.0,
            &mut zero_acc,
        )?;
        let d_action: Vec<f64> = d_input[t.state.len()..]
            .iter()
            .map(|d| -d * scale)
            .collect();
        agent
            .actor
            .accumulate_gradient(&actor_trace, &d_action, 1.0, &mut grad)?;
    }
    let flat_grad = crate::nn::FlatGradient::from_values(grad);
    let (updated, optim) = adam_step(&agent.actor, &flat_grad, &agent.actor_optim)?;
    agent.actor = updated;
    agent.actor_optim = optim;
    Ok(())
}

pub(super) fn polyak_all_targets(agent: &mut AgentState) -> Result<()> {
    let tau = agent.config.off_policy.tau;
    if let Some(target_actor) = &agent.target_actor {
        agent.target_actor = Some(polyak_update(target_actor, &agent.actor, tau)?);
    }
    for i in 0..agent.target_critics.len() {
        agent.target_critics[i] = polyak_update(&agent.target_critics[i], &agent.critics[i], tau)?;
    }
    Ok(())
}

/// One DDPG gradient update on a sampled minibatch.
pub fn ddpg_update(agent: &mut AgentState, batch: &[&Transition]) -> Result<()> {
    if agent.algorithm != Algorithm::Ddpg {
        return Err(Error::Usage("ddpg_update called on a non-DDPG agent".into()));
    }
    if batch.is_empty() {
        return Err(Error::Usage("empty minibatch".into()));
    }
    let targets = ddpg_targets(agent, batch)?;
    critic_step_toward(agent, 0, batch, &targets)?;
    actor_ascent_step(agent, 0, batch)?;
    polyak_all_targets(agent)
}
