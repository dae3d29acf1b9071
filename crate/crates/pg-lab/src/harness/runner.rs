//! Seeded training runs.
//!
//! A run is fully determined by its `RunConfig`: every random draw comes
//! from a named stream derived from the run seed (`init`, `env`, `policy`,
//! `update`, `search`, `eval`), so re-running a config reproduces every
//! emitted byte, and enabling the critic search does not shift the draws
//! of any baseline stream.
//!
//! Output layout per run directory:
//! - `train.csv`  — step, episode_return (one row per finished episode)
//! - `eval.csv`   — step, mean_return, std_return (greedy policy)
//! - `search.csv` — step, critic_index, winner_tag, original_mse, winner_mse
//! - `meta.txt`   — config hash, crate version, resolved config
//! - `checkpoint_<step>.agent` at 25/50/75/100% of training

use super::checkpoint::save_agent;
use super::config::RunConfig;
use super::csv::CsvWriter;
use crate::algo::{
    collect_rollout, compute_advantages, ddpg_update, evaluate_return, monte_carlo_returns,
    ppo_update, sample_action, td3_update, AgentState, Algorithm, EpisodeStream, ReplayBuffer,
    Transition,
};
use crate::diagnostics::matched_compute_baseline;
use crate::error::Result;
use crate::rng::stream_rng;
use crate::search::{critic_search, EvalSource, SearchOutcome, SearchRecord};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

/// Everything a finished run reports back.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub seed: u64,
    /// (step, mean greedy return) at every evaluation point.
    pub return_curve: Vec<(u64, f64)>,
    pub final_return: f64,
    pub best_return: f64,
    pub search_records: Vec<SearchRecord>,
    pub output_dir: PathBuf,
    /// Steps of every saved checkpoint, ascending.
    pub checkpoint_steps: Vec<u64>,
}

struct RunIo {
    train: CsvWriter,
    eval: CsvWriter,
    search: CsvWriter,
}

struct EvalLoop {
    rng: ChaCha8Rng,
    episodes: usize,
}

impl EvalLoop {
    fn run(&mut self, agent: &AgentState, config: &RunConfig) -> Result<(f64, f64)> {
        let mut env = crate::envs::make_env(&config.env_name, &config.env_overrides)?;
        let mut returns = Vec::with_capacity(self.episodes);
        for _ in 0..self.episodes {
            returns.push(evaluate_return(agent, env.as_mut(), self.rng.gen())?);
        }
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        Ok((mean, var.sqrt()))
    }
}

/// Tracks quarter-mark checkpoints.
struct CheckpointSchedule {
    marks: Vec<u64>,
    next: usize,
    saved: Vec<u64>,
}

impl CheckpointSchedule {
    fn new(total_steps: u64) -> Self {
        let marks = if total_steps == 0 {
            Vec::new()
        } else {
            [0.25, 0.5, 0.75, 1.0]
                .iter()
                .map(|f| ((total_steps as f64) * f).round() as u64)
                .collect()
        };
        CheckpointSchedule {
            marks,
            next: 0,
            saved: Vec::new(),
        }
    }

    fn due(&mut self, steps: u64) -> bool {
        self.next < self.marks.len() && steps >= self.marks[self.next]
    }

    fn save(&mut self, steps: u64, agent: &AgentState, config: &RunConfig) -> Result<()> {
        while self.due(steps) {
            let path = config.output_dir.join(format!("checkpoint_{steps}.agent"));
            save_agent(&path, agent, config, steps)?;
            // Several marks can collapse onto one step for tiny runs.
            if self.saved.last() != Some(&steps) {
                self.saved.push(steps);
            }
            self.next += 1;
        }
        Ok(())
    }
}

/// Train one agent per `config` and write the run directory.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    // Fail on unknown env/algorithm before any output is produced.
    let env = crate::envs::make_env(&config.env_name, &config.env_overrides)?;
    let mut init_rng = stream_rng(config.seed, "init");
    let mut agent = AgentState::new(
        config.algorithm,
        env.spec(),
        &config.net,
        config.algo.clone(),
        &mut init_rng,
    )?;
    drop(env);
    if let Some(search) = &config.search {
        search.validate()?;
    }

    std::fs::create_dir_all(&config.output_dir)?;
    let mut io = RunIo {
        train: CsvWriter::create(
            config.output_dir.join("train.csv"),
            "step,episode_return",
        )?,
        eval: CsvWriter::create(
            config.output_dir.join("eval.csv"),
            "step,mean_return,std_return",
        )?,
        search: CsvWriter::create(
            config.output_dir.join("search.csv"),
            "step,critic_index,winner_tag,original_mse,winner_mse",
        )?,
    };
    write_meta(config)?;

    let mut eval_loop = EvalLoop {
        rng: stream_rng(config.seed, "eval"),
        episodes: config.eval_episodes,
    };
    let mut curve = Vec::new();
    let (mean, std) = eval_loop.run(&agent, config)?;
    io.eval.row(&[&0u64, &mean, &std])?;
    curve.push((0, mean));

    let mut search_records = Vec::new();
    let mut schedule = CheckpointSchedule::new(config.total_steps);

    match config.algorithm {
        Algorithm::Ppo => run_ppo_loop(
            config,
            &mut agent,
            &mut io,
            &mut eval_loop,
            &mut curve,
            &mut search_records,
            &mut schedule,
        )?,
        Algorithm::Ddpg | Algorithm::Td3 => run_off_policy_loop(
            config,
            &mut agent,
            &mut io,
            &mut eval_loop,
            &mut curve,
            &mut search_records,
            &mut schedule,
        )?,
    }

    let final_return = curve.last().map(|&(_, r)| r).unwrap_or(f64::NEG_INFINITY);
    let best_return = curve
        .iter()
        .map(|&(_, r)| r)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RunSummary {
        seed: config.seed,
        return_curve: curve,
        final_return,
        best_return,
        search_records,
        output_dir: config.output_dir.clone(),
        checkpoint_steps: schedule.saved,
    })
}

fn write_meta(config: &RunConfig) -> Result<()> {
    let mut lines = vec![
        format!("config_hash={:016x}", config.config_hash),
        format!("version={}", env!("CARGO_PKG_VERSION")),
        format!("seed={}", config.seed),
    ];
    lines.push("--- resolved config ---".to_string());
    lines.extend(config.config_lines.iter().cloned());
    std::fs::write(config.output_dir.join("meta.txt"), lines.join("\n") + "\n")?;
    Ok(())
}

/// Log finished-episode returns to train.csv, carrying partial episodes
/// across rollout boundaries.
struct EpisodeLog {
    acc: f64,
    step: u64,
}

impl EpisodeLog {
    fn push(&mut self, reward: f64, done: bool, train: &mut CsvWriter) -> Result<()> {
        self.acc += reward;
        self.step += 1;
        if done {
            train.row(&[&self.step, &self.acc])?;
            self.acc = 0.0;
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn run_ppo_loop(
    config: &RunConfig,
    agent: &mut AgentState,
    io: &mut RunIo,
    eval_loop: &mut EvalLoop,
    curve: &mut Vec<(u64, f64)>,
    search_records: &mut Vec<SearchRecord>,
    schedule: &mut CheckpointSchedule,
) -> Result<()> {
    let mut stream = EpisodeStream::new(
        crate::envs::make_env(&config.env_name, &config.env_overrides)?,
        stream_rng(config.seed, "env"),
    );
    let mut policy_rng = stream_rng(config.seed, "policy");
    let mut update_rng = stream_rng(config.seed, "update");
    let mut search_rng = stream_rng(config.seed, "search");
    let mut log = EpisodeLog { acc: 0.0, step: 0 };

    let spu = config.algo.ppo.samples_per_update;
    let mut steps: u64 = 0;
    let mut next_eval = config.eval_every;

    while steps < config.total_steps {
        let mut buffer = collect_rollout(agent, &mut stream, spu, &mut policy_rng)?;
        for t in &buffer.transitions {
            log.push(t.reward, t.done, &mut io.train)?;
        }
        steps += spu as u64;

        let tail_critic = config.algo.ppo.tail_bootstrap.then_some(&agent.critics[0]);
        let returns = monte_carlo_returns(&buffer, config.algo.gamma, tail_critic)?;
        let values: Vec<f64> = buffer
            .transitions
            .iter()
            .map(|t| agent.critics[0].forward(&t.state).map(|v| v[0]))
            .collect::<Result<_>>()?;
        let advantages = compute_advantages(&returns, &values)?;
        buffer.returns = Some(returns);
        buffer.advantages = Some(advantages);

        ppo_update(agent, &buffer, &mut update_rng)?;
        if config.algo.ppo.extra_critic_steps > 0 {
            matched_compute_baseline(
                agent,
                &buffer,
                config.algo.ppo.extra_critic_steps,
                &mut update_rng,
            )?;
        }

        if let Some(search) = &config.search {
            if steps % search.search_period == 0 {
                let outcome = critic_search(
                    agent,
                    &EvalSource::Rollout(&buffer),
                    search,
                    &mut search_rng,
                    steps,
                )?;
                record_search(outcome, io, search_records)?;
            }
        }

        // Evaluations are scheduled every eval_every steps but can only run
        // at update boundaries; rows carry the scheduled step so curves
        // align across methods (the agent evaluated is the newest one).
        while steps >= next_eval {
            let (mean, std) = eval_loop.run(agent, config)?;
            io.eval.row(&[&next_eval, &mean, &std])?;
            curve.push((next_eval, mean));
            next_eval += config.eval_every;
        }
        schedule.save(steps, agent, config)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_off_policy_loop(
    config: &RunConfig,
    agent: &mut AgentState,
    io: &mut RunIo,
    eval_loop: &mut EvalLoop,
    curve: &mut Vec<(u64, f64)>,
    search_records: &mut Vec<SearchRecord>,
    schedule: &mut CheckpointSchedule,
) -> Result<()> {
    let mut stream = EpisodeStream::new(
        crate::envs::make_env(&config.env_name, &config.env_overrides)?,
        stream_rng(config.seed, "env"),
    );
    let mut policy_rng = stream_rng(config.seed, "policy");
    let mut update_rng = stream_rng(config.seed, "update");
    let mut search_rng = stream_rng(config.seed, "search");
    let mut log = EpisodeLog { acc: 0.0, step: 0 };

    let off = &config.algo.off_policy;
    let mut replay = ReplayBuffer::new(off.buffer_capacity);
    let mut update_index: u64 = 0;
    let action_dim = agent.action_low.len();

    for step in 1..=config.total_steps {
        let obs = stream.observation().to_vec();
        let action = if step <= off.warmup_steps {
            (0..action_dim)
                .map(|i| policy_rng.gen_range(agent.action_low[i]..agent.action_high[i]))
                .collect()
        } else {
            sample_action(agent, &obs, &mut policy_rng)?.0
        };
        let result = stream.step(&action)?;
        log.push(result.reward, result.done, &mut io.train)?;
        replay.push(Transition {
            state: obs,
            action,
            reward: result.reward,
            next_state: result.next_state,
            done: result.done,
            log_prob: 0.0,
        });

        if step > off.warmup_steps && step % off.update_every == 0 {
            let batch = replay.sample(&mut update_rng, off.minibatch_size);
            match config.algorithm {
                Algorithm::Ddpg => ddpg_update(agent, &batch)?,
                Algorithm::Td3 => td3_update(agent, &batch, update_index, &mut update_rng)?,
                Algorithm::Ppo => unreachable!("on-policy loop handles ppo"),
            }
            update_index += 1;
        }

        if let Some(search) = &config.search {
            if step % search.search_period == 0 {
                let outcome = critic_search(
                    agent,
                    &EvalSource::Replay(&replay),
                    search,
                    &mut search_rng,
                    step,
                )?;
                record_search(outcome, io, search_records)?;
            }
        }

        if step % config.eval_every == 0 {
            let (mean, std) = eval_loop.run(agent, config)?;
            io.eval.row(&[&step, &mean, &std])?;
            curve.push((step, mean));
        }
        schedule.save(step, agent, config)?;
    }
    Ok(())
}

fn record_search(
    outcome: SearchOutcome,
    io: &mut RunIo,
    search_records: &mut Vec<SearchRecord>,
) -> Result<()> {
    match outcome {
        SearchOutcome::Done(records) => {
            for record in records {
                io.search.row(&[
                    &record.step,
                    &record.critic_index,
                    &record.winner_tag,
                    &record.original_mse,
                    &record.winner_mse,
                ])?;
                search_records.push(record);
            }
        }
        SearchOutcome::Skipped { reason } => {
            eprintln!("search skipped: {reason}");
        }
    }
    Ok(())
}
