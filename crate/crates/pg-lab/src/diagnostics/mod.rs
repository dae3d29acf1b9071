//! Training diagnostics: why does a better critic help?
//!
//! Three read-only analyses over saved agents, plus the matched-compute
//! baseline:
//!
//! - **Gradient similarity** — draw many independent actor-gradient
//!   estimates at increasing sample counts and report the mean and std of
//!   all pairwise cosine similarities. Concentrated estimates (higher mean
//!   cosine) indicate lower estimator variance around the true gradient.
//! - **Critic error vs. empirical return** — roll full episodes, compare
//!   critic predictions against realized discounted returns, and normalize
//!   the MSE by the number of evaluated steps.
//! - **Perturbation deltas** — how much one small-scale and one large-scale
//!   parameter perturbation move value predictions along real trajectories.
//!
//! Analyses never mutate agent state; they take the agent by shared
//! reference and build their own environments.

use crate::algo::{
    collect_rollout, critic_input, critic_minibatch_step, dlogp_dlogstd, dlogp_dmean,
    monte_carlo_returns, raw_advantages, sample_action, AgentState, Algorithm, EpisodeStream,
    PolicyMode, RolloutBuffer,
};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::nn::{FlatGradient, MlpParams};
use crate::search::SearchConfig;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// cos(g1, g2) = dot / (|g1| |g2|), in [-1, 1]. Zero-norm vectors have no
/// direction and produce an error.
pub fn cosine_similarity(g1: &FlatGradient, g2: &FlatGradient) -> Result<f64> {
    let n1 = g1.norm();
    let n2 = g2.norm();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    let cos = g1.dot(g2)? / (n1 * n2);
    Ok(cos.clamp(-1.0, 1.0))
}

/// Mean/std over all n(n-1)/2 pairwise cosines of a set of gradient
/// estimates. Zero-norm estimates are excluded and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseCosine {
    pub mean: f64,
    pub std: f64,
    pub n_pairs: usize,
    pub n_excluded: usize,
}

pub fn pairwise_cosine_stats(estimates: &[FlatGradient]) -> Result<PairwiseCosine> {
    let usable: Vec<&FlatGradient> = estimates.iter().filter(|g| g.norm() > 0.0).collect();
    let n_excluded = estimates.len() - usable.len();
    if usable.len() < 2 {
        return Err(Error::Usage(
            "pairwise cosine needs at least two nonzero estimates".into(),
        ));
    }
    let mut cosines = Vec::with_capacity(usable.len() * (usable.len() - 1) / 2);
    for i in 0..usable.len() {
        for j in i + 1..usable.len() {
            cosines.push(cosine_similarity(usable[i], usable[j])?);
        }
    }
    let n = cosines.len() as f64;
    let mean = cosines.iter().sum::<f64>() / n;
    let var = cosines.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n;
    Ok(PairwiseCosine {
        mean,
        std: var.sqrt(),
        n_pairs: cosines.len(),
        n_excluded,
    })
}

/// Pairwise-cosine curve over a grid of per-estimate sample counts.
#[derive(Debug, Clone)]
pub struct GradientSimilarityCurve {
    pub sample_sizes: Vec<usize>,
    pub mean_pairwise_cosine: Vec<f64>,
    pub std_pairwise_cosine: Vec<f64>,
    pub n_excluded: Vec<usize>,
    pub n_estimates: usize,
    pub checkpoint_step: u64,
}

/// One actor-gradient estimate from `k` freshly collected samples, using
/// the algorithm's own estimator.
///
/// PPO: the advantage-weighted score-function gradient with the checkpoint
/// critic as baseline, `(1/k) sum grad log pi(a|s) (G_t - V(s_t))`, over
/// the actor MLP and log-std parameters (raw advantages: the positive
/// rescaling applied by advantage normalization cannot change cosines, and
/// the unnormalized form is the estimator whose variance the baseline
/// reduces).
///
/// DDPG/TD3: the deterministic policy gradient
/// `grad (1/k) sum Q(s, mu(s))` over the actor parameters, with states
/// drawn from exploration-noise rollouts of the checkpoint actor.
pub fn actor_gradient_estimate<F>(
    agent: &AgentState,
    env_factory: &F,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<FlatGradient>
where
    F: Fn() -> Result<Box<dyn Environment>>,
{
    let mut stream = EpisodeStream::new(env_factory()?, sub_rng(rng));
    match agent.algorithm {
        Algorithm::Ppo => {
            let mut policy_rng = sub_rng(rng);
            let buffer = collect_rollout(agent, &mut stream, k, &mut policy_rng)?;
            let returns = monte_carlo_returns(&buffer, agent.config.gamma, Some(&agent.critics[0]))?;
            let values: Vec<f64> = buffer
                .transitions
                .iter()
                .map(|t| agent.critics[0].forward(&t.state).map(|v| v[0]))
                .collect::<Result<_>>()?;
            let advantages = raw_advantages(&returns, &values)?;

            let n_mlp = agent.actor.param_count();
            let log_std = agent.log_std.as_ref().expect("ppo log_std");
            let act_dim = log_std.len();
            let mut grad = vec![0.0; n_mlp + act_dim];
            let scale = 1.0 / k as f64;
            let mut d_mean = vec![0.0; act_dim];
            let mut d_ls = vec![0.0; act_dim];
            for (t, &adv) in buffer.transitions.iter().zip(&advantages) {
                let (mean, trace) = agent.actor.forward_trace(&t.state)?;
                dlogp_dmean(&mean, log_std, &t.action, &mut d_mean);
                let d_output: Vec<f64> = d_mean.iter().map(|d| adv * d * scale).collect();
                agent
                    .actor
                    .accumulate_gradient(&trace, &d_output, 1.0, &mut grad[..n_mlp])?;
                dlogp_dlogstd(&mean, log_std, &t.action, &mut d_ls);
                for (g, d) in grad[n_mlp..].iter_mut().zip(&d_ls) {
                    *g += adv * d * scale;
                }
            }
            Ok(FlatGradient::from_values(grad))
        }
        Algorithm::Ddpg | Algorithm::Td3 => {
            let mut policy_rng = sub_rng(rng);
            let mut states = Vec::with_capacity(k);
            for _ in 0..k {
                let obs = stream.observation().to_vec();
                let (action, _) = sample_action(agent, &obs, &mut policy_rng)?;
                stream.step(&action)?;
                states.push(obs);
            }
            let scale = 1.0 / k as f64;
            let mut grad = vec![0.0; agent.actor.param_count()];
            for state in &states {
                let (action, actor_trace) = agent.actor.forward_trace(state)?;
                let input = critic_input(state, &action);
                let (_, critic_trace) = agent.critics[0].forward_trace(&input)?;
                let mut scratch = vec![0.0; agent.critics[0].param_count()];
                let d_input =
                    agent.critics[0].accumulate_gradient(&critic_trace, &[1.0], 0.0, &mut scratch)?;
                let d_action: Vec<f64> = d_input[state.len()..].iter().map(|d| d * scale).collect();
                agent
                    .actor
                    .accumulate_gradient(&actor_trace, &d_action, 1.0, &mut grad)?;
            }
            Ok(FlatGradient::from_values(grad))
        }
    }
}

/// Derive an independent child RNG from a parent stream.
fn sub_rng(parent: &mut ChaCha8Rng) -> ChaCha8Rng {
    crate::rng::stream_rng(parent.gen(), "diagnostics-sub")
}

/// For each sample size `k`, draw `n_estimates` fully independent gradient
/// estimates (fresh environments and noise per estimate) and record the
/// mean and std of all pairwise cosines. Zero gradients are excluded and
/// counted per grid point.
pub fn gradient_similarity_analysis<F>(
    agent: &AgentState,
    env_factory: &F,
    sample_sizes: &[usize],
    n_estimates: usize,
    checkpoint_step: u64,
    rng: &mut ChaCha8Rng,
) -> Result<GradientSimilarityCurve>
where
    F: Fn() -> Result<Box<dyn Environment>>,
{
    if n_estimates < 2 {
        return Err(Error::Usage("need at least two gradient estimates".into()));
    }
    let mut mean_pairwise_cosine = Vec::with_capacity(sample_sizes.len());
    let mut std_pairwise_cosine = Vec::with_capacity(sample_sizes.len());
    let mut n_excluded = Vec::with_capacity(sample_sizes.len());
    for &k in sample_sizes {
        let estimates: Vec<FlatGradient> = (0..n_estimates)
            .map(|_| actor_gradient_estimate(agent, env_factory, k, rng))
            .collect::<Result<_>>()?;
        let stats = pairwise_cosine_stats(&estimates)?;
        mean_pairwise_cosine.push(stats.mean);
        std_pairwise_cosine.push(stats.std);
        n_excluded.push(stats.n_excluded);
    }
    Ok(GradientSimilarityCurve {
        sample_sizes: sample_sizes.to_vec(),
        mean_pairwise_cosine,
        std_pairwise_cosine,
        n_excluded,
        n_estimates,
        checkpoint_step,
    })
}

/// Roll `n_episodes` full episodes under the agent's policy and return the
/// critic's mean squared error against the realized discounted returns,
/// normalized by the number of evaluated steps.
///
/// State-value critics see the visited state; action-value critics (input
/// width = observation + action) see the state paired with the executed
/// action, so their prediction is compared against the return that action
/// actually produced.
///
/// Each episode contributes its mean squared error divided by its length;
/// these per-episode values are averaged, so the result is an estimate that
/// does not shrink as more episodes are added.
pub fn critic_mse_vs_return<F>(
    critic: &MlpParams,
    agent: &AgentState,
    env_factory: &F,
    n_episodes: usize,
    gamma: f64,
    mode: PolicyMode,
    rng: &mut ChaCha8Rng,
) -> Result<f64>
where
    F: Fn() -> Result<Box<dyn Environment>>,
{
    if n_episodes == 0 {
        return Err(Error::Usage("need at least one evaluation episode".into()));
    }
    let needs_action = critic.architecture().input_dim != agent.actor.architecture().input_dim;
    let mut acc = 0.0;
    let mut policy_rng = sub_rng(rng);
    for _ in 0..n_episodes {
        let episode = roll_episode(agent, env_factory, mode, rng, &mut policy_rng)?;
        let returns = crate::algo::discounted_returns(&episode.rewards, gamma, 0.0);
        let mut sse = 0.0;
        for ((state, action), &g) in episode
            .states
            .iter()
            .zip(&episode.actions)
            .zip(&returns)
        {
            let prediction = if needs_action {
                critic.forward(&critic_input(state, action))?[0]
            } else {
                critic.forward(state)?[0]
            };
            sse += (prediction - g) * (prediction - g);
        }
        let steps = episode.states.len() as f64;
        acc += sse / steps / steps;
    }
    Ok(acc / n_episodes as f64)
}

struct Episode {
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    rewards: Vec<f64>,
}

/// One full episode under the agent's policy.
fn roll_episode<F>(
    agent: &AgentState,
    env_factory: &F,
    mode: PolicyMode,
    seed_rng: &mut ChaCha8Rng,
    policy_rng: &mut ChaCha8Rng,
) -> Result<Episode>
where
    F: Fn() -> Result<Box<dyn Environment>>,
{
    let mut env = env_factory()?;
    let mut obs = env.reset(seed_rng.gen()).observation;
    let mut episode = Episode {
        states: Vec::new(),
        actions: Vec::new(),
        rewards: Vec::new(),
    };
    loop {
        let action = match mode {
            PolicyMode::Explore => sample_action(agent, &obs, policy_rng)?.0,
            PolicyMode::Greedy => agent.deterministic_action(&obs)?,
        };
        episode.states.push(obs.clone());
        episode.actions.push(action.clone());
        let (state, reward) = env.step(&action)?;
        episode.rewards.push(reward);
        if state.done {
            return Ok(episode);
        }
        obs = state.observation;
    }
}

/// Per-episode mean absolute change in value predictions under one
/// small-scale and one large-scale parameter perturbation of `critic`.
#[derive(Debug, Clone)]
pub struct PerturbationDeltas {
    pub small: Vec<f64>,
    pub large: Vec<f64>,
}

pub fn perturbation_delta_map<F>(
    critic: &MlpParams,
    config: &SearchConfig,
    agent: &AgentState,
    env_factory: &F,
    n_episodes: usize,
    mode: PolicyMode,
    rng: &mut ChaCha8Rng,
) -> Result<PerturbationDeltas>
where
    F: Fn() -> Result<Box<dyn Environment>>,
{
    if n_episodes == 0 {
        return Err(Error::Usage("need at least one episode".into()));
    }
    // One perturbed critic per scale, drawn once and reused across episodes.
    let perturb = |sigma: f64, rng: &mut ChaCha8Rng| -> MlpParams {
        let flat: Vec<f64> = critic
            .flatten()
            .iter()
            .map(|&v| {
                let eps: f64 = rng.sample(rand_distr::StandardNormal);
                v + sigma * eps
            })
            .collect();
        MlpParams::unflatten(critic.architecture().clone(), &flat).expect("same architecture")
    };
    let small_critic = perturb(config.sigma_min, rng);
    let large_critic = perturb(config.sigma_max, rng);

    let mut small = Vec::with_capacity(n_episodes);
    let mut large = Vec::with_capacity(n_episodes);
    let mut policy_rng = sub_rng(rng);
    for _ in 0..n_episodes {
        let episode = roll_episode(agent, env_factory, mode, rng, &mut policy_rng)?;
        let mut sum_small = 0.0;
        let mut sum_large = 0.0;
        for (state, action) in episode.states.iter().zip(&episode.actions) {
            // Value critics see the state; Q critics see state || action.
            let input = if critic.architecture().input_dim == state.len() {
                state.clone()
            } else {
                critic_input(state, action)
            };
            let v = critic.forward(&input)?[0];
            sum_small += (small_critic.forward(&input)?[0] - v).abs();
            sum_large += (large_critic.forward(&input)?[0] - v).abs();
        }
        small.push(sum_small / episode.states.len() as f64);
        large.push(sum_large / episode.states.len() as f64);
    }
    Ok(PerturbationDeltas { small, large })
}

/// Matched-compute baseline: `extra_steps` additional critic-only minibatch
/// MSE steps on the same rollout, actor untouched. One step is exactly one
/// call into the PPO critic step path.
pub fn matched_compute_baseline(
    agent: &mut AgentState,
    buffer: &RolloutBuffer,
    extra_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if agent.algorithm != Algorithm::Ppo {
        return Err(Error::Usage(
            "the matched-compute baseline is defined for PPO".into(),
        ));
    }
    let n = buffer.len();
    let minibatch = agent.config.ppo.minibatch_size.min(n);
    for _ in 0..extra_steps {
        let indices: Vec<usize> = (0..minibatch).map(|_| rng.gen_range(0..n)).collect();
        critic_minibatch_step(agent, buffer, &indices)?;
    }
    Ok(())
}

/// Welch two-sample t-statistic: (m1 - m2) / sqrt(s1^2/n1 + s2^2/n2).
pub fn two_sample_t_stat(
    mean1: f64,
    std1: f64,
    n1: usize,
    mean2: f64,
    std2: f64,
    n2: usize,
) -> f64 {
    (mean1 - mean2) / (std1 * std1 / n1 as f64 + std2 * std2 / n2 as f64).sqrt()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rank_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Shape {
            what: "spearman inputs",
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Usage("spearman needs at least two points".into()));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = rx.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut num = 0.0;
    let mut den_x = 0.0;
    let mut den_y = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mean) * (b - mean);
        den_x += (a - mean) * (a - mean);
        den_y += (b - mean) * (b - mean);
    }
    if den_x == 0.0 || den_y == 0.0 {
        return Err(Error::Usage("spearman undefined for constant inputs".into()));
    }
    Ok(num / (den_x * den_y).sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut result = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based average rank over the tie group [i, j].
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            result[idx] = avg;
        }
        i = j + 1;
    }
    result
}

/// Large-sample reference gradient for the deeper similarity check on the
/// point-mass task: the same estimator as `actor_gradient_estimate`, run at
/// a sample count orders of magnitude above the training regime.
pub fn reference_gradient<F>(
    agent: &AgentState,
    env_factory: &F,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<FlatGradient>
where
    F: Fn() -> Result<Box<dyn Environment>>,
{
    actor_gradient_estimate(agent, env_factory, n_samples, rng)
}
