//! Monte-Carlo returns and advantages.

use super::buffer::RolloutBuffer;
use crate::error::{Error, Result};
use crate::nn::MlpParams;

/// Discounted returns of one episode: `G_t = r_t + gamma * G_{t+1}` with
/// `G_T = tail` after the final reward. `tail` is zero for terminated
/// episodes and a critic bootstrap for truncated ones.
pub fn discounted_returns(rewards: &[f64], gamma: f64, tail: f64) -> Vec<f64> {
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = tail;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        returns[t] = acc;
    }
    returns
}

/// Per-step Monte-Carlo returns for every episode in the rollout.
///
/// Terminated episodes use a zero tail. The trailing truncated episode (if
/// any) bootstraps its tail with `critic`'s value of the last next-state;
/// passing `None` forces a zero tail everywhere (strict Monte-Carlo).
pub fn monte_carlo_returns(
    buffer: &RolloutBuffer,
    gamma: f64,
    critic: Option<&MlpParams>,
) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma must be in [0, 1), got {gamma}")));
    }
    let mut returns = vec![0.0; buffer.len()];
    for episode in &buffer.episodes {
        let range = episode.range();
        let rewards: Vec<f64> = buffer.transitions[range.clone()]
            .iter()
            .map(|t| t.reward)
            .collect();
        let tail = if episode.terminated {
            0.0
        } else {
            match critic {
                Some(critic) => {
                    let last = &buffer.transitions[range.end - 1];
                    critic.forward(&last.next_state)?[0]
                }
                None => 0.0,
            }
        };
        returns[range].copy_from_slice(&discounted_returns(&rewards, gamma, tail));
    }
    Ok(returns)
}

/// Unnormalized advantages `G_t - V(s_t)`.
pub fn raw_advantages(returns: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if returns.len() != values.len() {
        return Err(Error::Shape {
            what: "advantages",
            expected: returns.len(),
            got: values.len(),
        });
    }
    Ok(returns.iter().zip(values).map(|(g, v)| g - v).collect())
}

/// Advantages standardized to zero mean and unit variance over the batch.
/// The std uses divisor n; an all-equal batch normalizes to zeros.
pub fn compute_advantages(returns: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let mut adv = raw_advantages(returns, values)?;
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in &mut adv {
        *a = (*a - mean) / (std + 1e-8);
    }
    Ok(adv)
}
