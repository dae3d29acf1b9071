//! Gradient-free two-scale population search over critic parameters.
//!
//! Periodically during training, the agent's critic is cloned into a
//! population: half the copies get small additive Gaussian parameter noise
//! (local refinement of value predictions), half get noise two orders of
//! magnitude larger (escaping poor fits). Every candidate — plus the
//! untouched original — is scored by mean squared error against the same
//! frozen regression targets the critic itself trains on, and the argmin is
//! installed. Because the original is in the selection set, a search can
//! never make the critic's batch error worse.
//!
//! Evaluation data comes from the agent's own buffers: PPO reuses the
//! (state, return) pairs of the rollout it just trained on; DDPG and TD3
//! sample a large replay batch and compute bootstrapped targets once from
//! the frozen target networks, so all candidates face an identical
//! regression problem. TD3 runs one independent search per critic.

use crate::algo::{
    critic_input, polyak_update, AgentState, Algorithm, ReplayBuffer, RolloutBuffer,
};
use crate::error::{Error, Result};
use crate::nn::MlpParams;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fmt;
use std::str::FromStr;

/// Which noise scale produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleTag {
    Original,
    Small,
    Large,
}

impl fmt::Display for ScaleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleTag::Original => "original",
            ScaleTag::Small => "small",
            ScaleTag::Large => "large",
        })
    }
}

impl FromStr for ScaleTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(ScaleTag::Original),
            "small" => Ok(ScaleTag::Small),
            "large" => Ok(ScaleTag::Large),
            other => Err(Error::Config(format!("unknown scale tag '{other}'"))),
        }
    }
}

/// Ablation switch: which halves of the population actually get noise.
/// The population size and split stay fixed; a disabled half degenerates to
/// exact copies of the original.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    TwoScale,
    SmallOnly,
    LargeOnly,
}

impl FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-scale" => Ok(ScaleMode::TwoScale),
            "small-only" => Ok(ScaleMode::SmallOnly),
            "large-only" => Ok(ScaleMode::LargeOnly),
            other => Err(Error::Config(format!(
                "unknown scale mode '{other}' (two-scale, small-only, large-only)"
            ))),
        }
    }
}

/// Linear decay of both noise scales toward zero, after which the search is
/// a no-op and training reduces to the plain baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Annealing {
    None,
    LinearToZero { end_step: u64 },
}

/// Population-search hyperparameters.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Number of perturbed candidates; split evenly between the two scales.
    pub population_size: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Run one search every this many environment steps.
    pub search_period: u64,
    /// Replay transitions per evaluation batch (off-policy only; on-policy
    /// evaluation reuses the full rollout).
    pub eval_batch_size: usize,
    /// Polyak rate pulling the critic's target toward the installed winner.
    pub target_alpha: f64,
    pub annealing: Annealing,
    /// Keep the unperturbed critic in the selection set (`false` via
    /// `--exclude-original` for ablation).
    pub include_original: bool,
    /// Reset the critic's Adam moments after installing a perturbed winner.
    pub reset_critic_optim: bool,
    pub scale_mode: ScaleMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population_size: 10,
            sigma_min: 5e-6,
            sigma_max: 5e-4,
            search_period: 2048,
            eval_batch_size: 2048,
            target_alpha: 0.005,
            annealing: Annealing::None,
            include_original: true,
            reset_critic_optim: false,
            scale_mode: ScaleMode::TwoScale,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || self.population_size % 2 != 0 {
            return Err(Error::Config(format!(
                "search.population_size must be a positive even integer, got {}",
                self.population_size
            )));
        }
        if self.sigma_min <= 0.0 || self.sigma_max <= 0.0 || self.sigma_min >= self.sigma_max {
            return Err(Error::Config(format!(
                "search scales must satisfy 0 < sigma_min < sigma_max, got ({}, {})",
                self.sigma_min, self.sigma_max
            )));
        }
        if self.search_period == 0 || self.eval_batch_size == 0 {
            return Err(Error::Config(
                "search period and eval batch size must be positive".into(),
            ));
        }
        if !(0.0 < self.target_alpha && self.target_alpha <= 1.0) {
            return Err(Error::Config(format!(
                "search.target_alpha must be in (0, 1], got {}",
                self.target_alpha
            )));
        }
        Ok(())
    }

    /// Noise scales after annealing at `step`: both multiplied by
    /// `max(0, 1 - step / end_step)`.
    pub fn effective_sigmas(&self, step: u64) -> (f64, f64) {
        let factor = match self.annealing {
            Annealing::None => 1.0,
            Annealing::LinearToZero { end_step } => {
                if end_step == 0 {
                    0.0
                } else {
                    (1.0 - step as f64 / end_step as f64).max(0.0)
                }
            }
        };
        let (mut small, mut large) = (self.sigma_min * factor, self.sigma_max * factor);
        match self.scale_mode {
            ScaleMode::TwoScale => {}
            ScaleMode::SmallOnly => large = 0.0,
            ScaleMode::LargeOnly => small = 0.0,
        }
        (small, large)
    }
}

/// One member of a search population.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub params: MlpParams,
    pub scale_tag: ScaleTag,
    pub mse: Option<f64>,
}

/// Outcome of one search event for one critic.
#[derive(Debug, Clone)]
pub struct SearchRecord {
    pub step: u64,
    pub critic_index: usize,
    pub winner_tag: ScaleTag,
    pub winner_mse: f64,
    pub original_mse: f64,
    pub per_candidate_mse: Vec<(ScaleTag, f64)>,
}

/// Frozen evaluation data: every candidate is scored against the same
/// inputs and targets.
#[derive(Debug, Clone)]
pub struct EvalBatch {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

/// Data source a search evaluates against.
pub enum EvalSource<'a> {
    /// PPO: the rollout consumed by the update that just ran, with its
    /// Monte-Carlo returns.
    Rollout(&'a RolloutBuffer),
    /// DDPG/TD3: the replay buffer.
    Replay(&'a ReplayBuffer),
}

/// Result of one search event over all critics of an agent.
#[derive(Debug, Clone)]
pub enum SearchOutcome {
    Done(Vec<SearchRecord>),
    /// Not enough data to evaluate candidates; the agent is untouched.
    Skipped { reason: String },
}

/// Clone `phi` into the search population: `population_size / 2` candidates
/// perturbed per-parameter by `N(0, sigma_min')`, the same number by
/// `N(0, sigma_max')` (annealed scales), and the unperturbed original
/// appended last.
pub fn generate_population(
    phi: &MlpParams,
    config: &SearchConfig,
    rng: &mut ChaCha8Rng,
    current_step: u64,
) -> Vec<Candidate> {
    let (sigma_small, sigma_large) = config.effective_sigmas(current_step);
    let half = config.population_size / 2;
    let flat = phi.flatten();
    let mut population = Vec::with_capacity(config.population_size + 1);
    for (count, sigma, tag) in [
        (half, sigma_small, ScaleTag::Small),
        (half, sigma_large, ScaleTag::Large),
    ] {
        for _ in 0..count {
            let perturbed: Vec<f64> = flat
                .iter()
                .map(|&v| {
                    let eps: f64 = rng.sample(StandardNormal);
                    v + sigma * eps
                })
                .collect();
            population.push(Candidate {
                params: MlpParams::unflatten(phi.architecture().clone(), &perturbed)
                    .expect("same architecture"),
                scale_tag: tag,
                mse: None,
            });
        }
    }
    population.push(Candidate {
        params: phi.clone(),
        scale_tag: ScaleTag::Original,
        mse: None,
    });
    population
}

/// Mean squared error of a candidate critic on a frozen batch.
pub fn critic_mse(candidate: &MlpParams, batch: &EvalBatch) -> Result<f64> {
    if batch.inputs.is_empty() {
        return Err(Error::Usage("empty evaluation batch".into()));
    }
    let mut total = 0.0;
    for (input, &target) in batch.inputs.iter().zip(&batch.targets) {
        let prediction = candidate.forward(input)?[0];
        if !prediction.is_finite() {
            return Err(Error::Numeric(
                "candidate critic produced a non-finite prediction".into(),
            ));
        }
        let err = target - prediction;
        total += err * err;
    }
    Ok(total / batch.inputs.len() as f64)
}

/// Build the frozen evaluation batch for the agent's critics. Returns
/// `None` when the replay buffer cannot fill a batch yet (the search is
/// skipped).
pub fn build_eval_batch(
    agent: &AgentState,
    source: &EvalSource<'_>,
    config: &SearchConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<EvalBatch>> {
    match (agent.algorithm, source) {
        (Algorithm::Ppo, EvalSource::Rollout(buffer)) => {
            let returns = buffer.returns()?;
            let inputs: Vec<Vec<f64>> = buffer
                .transitions
                .iter()
                .map(|t| t.state.clone())
                .collect();
            Ok(Some(EvalBatch {
                inputs,
                targets: returns.to_vec(),
            }))
        }
        (Algorithm::Ddpg, EvalSource::Replay(replay)) => {
            if replay.len() < config.eval_batch_size {
                return Ok(None);
            }
            let batch = replay.sample(rng, config.eval_batch_size);
            let gamma = agent.config.gamma;
            let target_actor = agent
                .target_actor
                .as_ref()
                .ok_or_else(|| Error::Usage("target networks not initialized".into()))?;
            let mut inputs = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for t in batch {
                inputs.push(critic_input(&t.state, &t.action));
                let y = if t.done {
                    t.reward
                } else {
                    let a = target_actor.forward(&t.next_state)?;
                    let q = agent.target_critics[0]
                        .forward(&critic_input(&t.next_state, &a))?[0];
                    t.reward + gamma * q
                };
                targets.push(y);
            }
            Ok(Some(EvalBatch { inputs, targets }))
        }
        (Algorithm::Td3, EvalSource::Replay(replay)) => {
            if replay.len() < config.eval_batch_size {
                return Ok(None);
            }
            let batch = replay.sample(rng, config.eval_batch_size);
            let gamma = agent.config.gamma;
            let sigma = agent.config.td3.target_noise_std;
            let clip = agent.config.td3.target_noise_clip;
            let target_actor = agent
                .target_actor
                .as_ref()
                .ok_or_else(|| Error::Usage("target networks not initialized".into()))?;
            let mut inputs = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for t in batch {
                inputs.push(critic_input(&t.state, &t.action));
                let mut a = target_actor.forward(&t.next_state)?;
                for (i, ai) in a.iter_mut().enumerate() {
                    let eps: f64 = rng.sample(StandardNormal);
                    let noise = (sigma * eps).clamp(-clip, clip);
                    *ai = (*ai + noise).clamp(agent.action_low[i], agent.action_high[i]);
                }
                let y = if t.done {
                    t.reward
                } else {
                    let input = critic_input(&t.next_state, &a);
                    let q1 = agent.target_critics[0].forward(&input)?[0];
                    let q2 = agent.target_critics[1].forward(&input)?[0];
                    t.reward + gamma * q1.min(q2)
                };
                targets.push(y);
            }
            Ok(Some(EvalBatch { inputs, targets }))
        }
        (Algorithm::Ppo, EvalSource::Replay(_)) => Err(Error::Usage(
            "PPO searches evaluate on the last rollout, not a replay buffer".into(),
        )),
        (_, EvalSource::Rollout(_)) => Err(Error::Usage(
            "off-policy searches evaluate on the replay buffer".into(),
        )),
    }
}

/// Argmin MSE with deterministic tie-breaking: the original wins ties, then
/// small-scale candidates, then the lowest candidate index.
fn select_winner(
    original_mse: Option<f64>,
    candidates: &[(ScaleTag, f64)],
) -> (ScaleTag, f64, Option<usize>) {
    let mut best_tag = ScaleTag::Original;
    let mut best_index = None;
    let mut best = original_mse.unwrap_or(f64::INFINITY);
    // Small-scale candidates come first in population order; strict `<`
    // keeps earlier entries on ties.
    for (i, &(tag, mse)) in candidates.iter().enumerate() {
        if mse < best {
            best = mse;
            best_tag = tag;
            best_index = Some(i);
        }
    }
    (best_tag, best, best_index)
}

/// Run one search event over every critic of the agent (both critics
/// independently for TD3): generate the population, score every candidate
/// plus the original on the same frozen batch, install the argmin, and pull
/// the critic's target (if any) toward the winner by Polyak averaging.
///
/// Must only be called on the periodicity gate
/// (`step % config.search_period == 0`). On failure the agent is untouched.
pub fn critic_search(
    agent: &mut AgentState,
    source: &EvalSource<'_>,
    config: &SearchConfig,
    rng: &mut ChaCha8Rng,
    step: u64,
) -> Result<SearchOutcome> {
    if step % config.search_period != 0 {
        return Err(Error::Usage(format!(
            "search invoked off its period: step {step} % {} != 0",
            config.search_period
        )));
    }

    let batch = match build_eval_batch(agent, source, config, rng)? {
        Some(batch) => batch,
        None => {
            return Ok(SearchOutcome::Skipped {
                reason: format!(
                    "replay holds fewer than eval_batch_size = {} transitions",
                    config.eval_batch_size
                ),
            })
        }
    };

    // Compute every installation first; mutate the agent only once nothing
    // can fail anymore.
    let mut records = Vec::with_capacity(agent.critics.len());
    let mut installs: Vec<(usize, Option<MlpParams>)> = Vec::new();
    for critic_index in 0..agent.critics.len() {
        let mut population = generate_population(&agent.critics[critic_index], config, rng, step);
        let mut scored = Vec::with_capacity(population.len());
        let mut original_mse = None;
        for candidate in &mut population {
            let mse = critic_mse(&candidate.params, &batch)?;
            candidate.mse = Some(mse);
            if candidate.scale_tag == ScaleTag::Original {
                original_mse = Some(mse);
            } else {
                scored.push((candidate.scale_tag, mse));
            }
        }
        let original_mse = original_mse.expect("population carries the original");
        let considered_original = if config.include_original {
            Some(original_mse)
        } else {
            None
        };
        let (winner_tag, winner_mse, winner_index) = select_winner(considered_original, &scored);

        // `scored` drops only the original, which sits last in the
        // population, so indices into `scored` address the population too.
        debug_assert_eq!(population.last().unwrap().scale_tag, ScaleTag::Original);
        let install = winner_index.map(|i| population[i].params.clone());
        installs.push((critic_index, install));
        records.push(SearchRecord {
            step,
            critic_index,
            winner_tag,
            winner_mse,
            original_mse,
            per_candidate_mse: scored,
        });
    }

    for (critic_index, install) in installs {
        if let Some(params) = install {
            agent.critics[critic_index] = params;
            if config.reset_critic_optim {
                let optim = &agent.critic_optims[critic_index];
                agent.critic_optims[critic_index] =
                    crate::nn::AdamState::new(optim.param_count(), optim.lr);
            }
        }
        if let Some(target) = agent.target_critics.get(critic_index) {
            agent.target_critics[critic_index] =
                polyak_update(target, &agent.critics[critic_index], config.target_alpha)?;
        }
    }
    Ok(SearchOutcome::Done(records))
}

/// Cumulative counts of searches won strictly by each perturbation scale
/// (winner_mse < original_mse), in record order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImprovementTally {
    pub small_cumulative: Vec<u64>,
    pub large_cumulative: Vec<u64>,
}

pub fn improvement_tally(records: &[SearchRecord]) -> ImprovementTally {
    let mut small = 0;
    let mut large = 0;
    let mut small_cumulative = Vec::with_capacity(records.len());
    let mut large_cumulative = Vec::with_capacity(records.len());
    for record in records {
        if record.winner_mse < record.original_mse {
            match record.winner_tag {
                ScaleTag::Small => small += 1,
                ScaleTag::Large => large += 1,
                ScaleTag::Original => {}
            }
        }
        small_cumulative.push(small);
        large_cumulative.push(large);
    }
    ImprovementTally {
        small_cumulative,
        large_cumulative,
    }
}
