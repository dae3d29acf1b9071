//! The three baseline deep policy-gradient algorithms.
//!
//! PPO is on-policy with Monte-Carlo critic targets; DDPG and TD3 are
//! off-policy with bootstrapped targets and Polyak-averaged target networks.
//! One training loop owns one [`AgentState`]; updates are serialized.

mod buffer;
mod collect;
mod ddpg;
mod gaussian;
mod ppo;
mod returns;
mod td3;

pub use buffer::{EpisodeSpan, ReplayBuffer, RolloutBuffer, Transition};
pub use collect::{collect_rollout, evaluate_return, sample_action, EpisodeStream, PolicyMode};
pub use ddpg::ddpg_update;
pub use gaussian::{
    dlogp_dlogstd, dlogp_dmean, gaussian_entropy, gaussian_log_prob, gaussian_sample,
};
pub use ppo::{critic_minibatch_step, ppo_update};
pub use returns::{compute_advantages, discounted_returns, monte_carlo_returns, raw_advantages};
pub use td3::td3_update;

use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::nn::{
    Activation, AdamState, MlpArchitecture, MlpParams, OutputActivation,
};
use rand::Rng;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Ppo,
    Ddpg,
    Td3,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Ppo => "ppo",
            Algorithm::Ddpg => "ddpg",
            Algorithm::Td3 => "td3",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppo" => Ok(Algorithm::Ppo),
            "ddpg" => Ok(Algorithm::Ddpg),
            "td3" => Ok(Algorithm::Td3),
            other => Err(Error::Config(format!(
                "unknown algorithm '{other}' (expected ppo, ddpg or td3)"
            ))),
        }
    }
}

/// Network shape shared by the actor and critics of one agent.
#[derive(Debug, Clone)]
pub struct NetConfig {
    pub hidden_dims: Vec<usize>,
    pub hidden_activation: Activation,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            hidden_dims: vec![64, 64],
            hidden_activation: Activation::Relu,
        }
    }
}

/// PPO hyperparameters.
#[derive(Debug, Clone)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub update_epochs: usize,
    pub samples_per_update: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub lr: f64,
    /// Bootstrap the unfinished episode at the end of a rollout with the
    /// critic's value of its last next-state. Disable for strict Monte-Carlo
    /// returns (`--no-tail-bootstrap`).
    pub tail_bootstrap: bool,
    /// Extra critic-only minibatch steps appended after each update,
    /// matching the compute of a population search of the same size.
    pub extra_critic_steps: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_epsilon: 0.2,
            update_epochs: 10,
            samples_per_update: 2048,
            minibatch_size: 64,
            entropy_coef: 0.001,
            lr: 3e-4,
            tail_bootstrap: true,
            extra_critic_steps: 0,
        }
    }
}

/// Hyperparameters shared by DDPG and TD3.
#[derive(Debug, Clone)]
pub struct OffPolicyConfig {
    pub minibatch_size: usize,
    /// Polyak rate for target updates after each gradient step.
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub buffer_capacity: usize,
    /// Exploration noise std as a fraction of the action half-range.
    pub exploration_noise: f64,
    /// Uniform-random action steps before learning starts.
    pub warmup_steps: u64,
    pub update_every: u64,
}

impl Default for OffPolicyConfig {
    fn default() -> Self {
        OffPolicyConfig {
            minibatch_size: 128,
            tau: 0.005,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            buffer_capacity: 100_000,
            exploration_noise: 0.1,
            warmup_steps: 1000,
            update_every: 1,
        }
    }
}

/// TD3-specific hyperparameters on top of [`OffPolicyConfig`].
#[derive(Debug, Clone)]
pub struct Td3Config {
    /// Std of the smoothing noise added to target actions (action units).
    pub target_noise_std: f64,
    /// Clip bound for that noise (action units).
    pub target_noise_clip: f64,
    /// Actor and targets update once per this many critic updates.
    pub policy_delay: u64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            policy_delay: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlgoConfig {
    pub gamma: f64,
    pub ppo: PpoConfig,
    pub off_policy: OffPolicyConfig,
    pub td3: Td3Config,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            gamma: 0.99,
            ppo: PpoConfig::default(),
            off_policy: OffPolicyConfig::default(),
            td3: Td3Config::default(),
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must be in [0, 1), got {}",
                self.gamma
            )));
        }
        if !(0.0 < self.ppo.clip_epsilon && self.ppo.clip_epsilon < 1.0) {
            return Err(Error::Config(format!(
                "ppo.clip_epsilon must be in (0, 1), got {}",
                self.ppo.clip_epsilon
            )));
        }
        if !(0.0 < self.off_policy.tau && self.off_policy.tau <= 1.0) {
            return Err(Error::Config(format!(
                "tau must be in (0, 1], got {}",
                self.off_policy.tau
            )));
        }
        let positive = [
            ("ppo.update_epochs", self.ppo.update_epochs as f64),
            ("ppo.samples_per_update", self.ppo.samples_per_update as f64),
            ("ppo.minibatch_size", self.ppo.minibatch_size as f64),
            ("ppo.lr", self.ppo.lr),
            ("ddpg.minibatch_size", self.off_policy.minibatch_size as f64),
            ("ddpg.actor_lr", self.off_policy.actor_lr),
            ("ddpg.critic_lr", self.off_policy.critic_lr),
            ("ddpg.buffer_capacity", self.off_policy.buffer_capacity as f64),
            ("td3.policy_delay", self.td3.policy_delay as f64),
        ];
        for (name, value) in positive {
            if value <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(())
    }
}

/// Actor, critics, targets and optimizer states for one algorithm.
///
/// Structure by algorithm:
/// - PPO: stochastic actor (MLP mean + learned global log-std), one V(s)
///   critic, no targets.
/// - DDPG: deterministic actor, one Q(s, a) critic, targets for both.
/// - TD3: deterministic actor, two Q critics, targets for all three.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub algorithm: Algorithm,
    pub actor: MlpParams,
    /// Global log standard deviations of the Gaussian head (PPO only).
    pub log_std: Option<Vec<f64>>,
    pub critics: Vec<MlpParams>,
    pub target_actor: Option<MlpParams>,
    pub target_critics: Vec<MlpParams>,
    /// Covers the actor parameters, with the log-std entries appended for
    /// PPO.
    pub actor_optim: AdamState,
    pub critic_optims: Vec<AdamState>,
    pub config: AlgoConfig,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl AgentState {
    pub fn new<R: Rng>(
        algorithm: Algorithm,
        env_spec: &EnvSpec,
        net: &NetConfig,
        config: AlgoConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let obs_dim = env_spec.observation_dim;
        let act_dim = env_spec.action_dim;

        let agent = match algorithm {
            Algorithm::Ppo => {
                let actor_arch = MlpArchitecture::new(
                    obs_dim,
                    net.hidden_dims.clone(),
                    act_dim,
                    net.hidden_activation,
                    OutputActivation::Linear,
                )?;
                let critic_arch = MlpArchitecture::new(
                    obs_dim,
                    net.hidden_dims.clone(),
                    1,
                    net.hidden_activation,
                    OutputActivation::Linear,
                )?;
                let actor = MlpParams::glorot(actor_arch, rng);
                let critic = MlpParams::glorot(critic_arch, rng);
                let actor_optim = AdamState::new(actor.param_count() + act_dim, config.ppo.lr);
                let critic_optim = AdamState::new(critic.param_count(), config.ppo.lr);
                AgentState {
                    algorithm,
                    actor,
                    log_std: Some(vec![0.0; act_dim]),
                    critics: vec![critic],
                    target_actor: None,
                    target_critics: Vec::new(),
                    actor_optim,
                    critic_optims: vec![critic_optim],
                    config,
                    action_low: env_spec.action_low.clone(),
                    action_high: env_spec.action_high.clone(),
                }
            }
            Algorithm::Ddpg | Algorithm::Td3 => {
                let scale = symmetric_action_scale(env_spec)?;
                let actor_arch = MlpArchitecture::new(
                    obs_dim,
                    net.hidden_dims.clone(),
                    act_dim,
                    net.hidden_activation,
                    OutputActivation::TanhScaled { scale },
                )?;
                let critic_arch = MlpArchitecture::new(
                    obs_dim + act_dim,
                    net.hidden_dims.clone(),
                    1,
                    net.hidden_activation,
                    OutputActivation::Linear,
                )?;
                let actor = MlpParams::glorot(actor_arch, rng);
                let n_critics = if algorithm == Algorithm::Td3 { 2 } else { 1 };
                let critics: Vec<MlpParams> = (0..n_critics)
                    .map(|_| MlpParams::glorot(critic_arch.clone(), rng))
                    .collect();
                let actor_optim = AdamState::new(actor.param_count(), config.off_policy.actor_lr);
                let critic_optims = critics
                    .iter()
                    .map(|c| AdamState::new(c.param_count(), config.off_policy.critic_lr))
                    .collect();
                AgentState {
                    algorithm,
                    target_actor: Some(actor.clone()),
                    target_critics: critics.clone(),
                    actor,
                    log_std: None,
                    critics,
                    actor_optim,
                    critic_optims,
                    config,
                    action_low: env_spec.action_low.clone(),
                    action_high: env_spec.action_high.clone(),
                }
            }
        };
        agent.validate()?;
        Ok(agent)
    }

    /// Structural invariants per algorithm.
    pub fn validate(&self) -> Result<()> {
        let ok = match self.algorithm {
            Algorithm::Ppo => {
                self.critics.len() == 1
                    && self.log_std.is_some()
                    && self.target_actor.is_none()
                    && self.target_critics.is_empty()
            }
            Algorithm::Ddpg => {
                self.critics.len() == 1
                    && self.target_actor.is_some()
                    && self.target_critics.len() == 1
            }
            Algorithm::Td3 => {
                self.critics.len() == 2
                    && self.target_actor.is_some()
                    && self.target_critics.len() == 2
            }
        };
        if !ok {
            return Err(Error::Usage(format!(
                "inconsistent agent structure for {}",
                self.algorithm
            )));
        }
        if self.critic_optims.len() != self.critics.len() {
            return Err(Error::Usage("one optimizer state per critic required".into()));
        }
        Ok(())
    }

    /// V(s) for PPO critics, Q(s, a) for DDPG/TD3 via [`critic_input`].
    pub fn critic_value(&self, index: usize, input: &[f64]) -> Result<f64> {
        Ok(self.critics[index].forward(input)?[0])
    }

    /// Deterministic evaluation action: the Gaussian mean for PPO (clipped
    /// to bounds), the actor output for DDPG/TD3.
    pub fn deterministic_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mut action = self.actor.forward(obs)?;
        if self.algorithm == Algorithm::Ppo {
            for (i, a) in action.iter_mut().enumerate() {
                *a = a.clamp(self.action_low[i], self.action_high[i]);
            }
        }
        Ok(action)
    }
}

/// DDPG/TD3 actors emit tanh-scaled actions, which requires a symmetric,
/// per-dimension-uniform action box.
fn symmetric_action_scale(spec: &EnvSpec) -> Result<f64> {
    let scale = spec.action_high[0];
    let symmetric = spec
        .action_low
        .iter()
        .zip(&spec.action_high)
        .all(|(&lo, &hi)| lo == -scale && hi == scale);
    if !symmetric {
        return Err(Error::Config(format!(
            "{} needs a symmetric uniform action box for a tanh-scaled actor",
            spec.name
        )));
    }
    Ok(scale)
}

/// Concatenate state and action into a Q-critic input.
pub fn critic_input(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut input = Vec::with_capacity(state.len() + action.len());
    input.extend_from_slice(state);
    input.extend_from_slice(action);
    input
}

/// Polyak average: `alpha * online + (1 - alpha) * target`, elementwise in
/// flattening order. `alpha = 1` copies the online network, `alpha = 0`
/// leaves the target unchanged.
pub fn polyak_update(target: &MlpParams, online: &MlpParams, alpha: f64) -> Result<MlpParams> {
    if target.architecture() != online.architecture() {
        return Err(Error::Shape {
            what: "polyak architectures",
            expected: target.param_count(),
            got: online.param_count(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "polyak alpha must be in [0, 1], got {alpha}"
        )));
    }
    let blended: Vec<f64> = target
        .flatten()
        .iter()
        .zip(online.flatten().iter())
        .map(|(t, o)| alpha * o + (1.0 - alpha) * t)
        .collect();
    MlpParams::unflatten(target.architecture().clone(), &blended)
}
