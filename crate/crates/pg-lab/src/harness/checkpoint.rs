//! Agent checkpoint bundles.
//!
//! One file per checkpoint: a text header of `key=value` lines terminated
//! by a blank line, then one binary parameter record per network (the
//! format documented in [`crate::nn`]) in the order listed by the header's
//! `networks` key. Checkpoints capture networks and config, not optimizer
//! moments; they feed read-only diagnostics, not training resumption.

use super::config::RunConfig;
use crate::algo::{AgentState, AlgoConfig, Algorithm};
use crate::error::{Error, Result};
use crate::nn::{read_params, write_params, AdamState};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const HEADER_MAGIC: &str = "pg-lab-agent v1";

/// Metadata stored alongside the networks.
#[derive(Debug, Clone)]
pub struct CheckpointMeta {
    pub algorithm: Algorithm,
    pub step: u64,
    pub env_name: String,
    pub env_overrides: BTreeMap<String, f64>,
    pub gamma: f64,
}

/// The full algorithm config as the same key=value pairs the run config
/// uses, so a bundle is self-describing.
fn algo_config_lines(config: &AlgoConfig) -> Vec<(String, String)> {
    vec![
        ("gamma".into(), config.gamma.to_string()),
        ("ppo.clip_epsilon".into(), config.ppo.clip_epsilon.to_string()),
        ("ppo.update_epochs".into(), config.ppo.update_epochs.to_string()),
        ("ppo.samples_per_update".into(), config.ppo.samples_per_update.to_string()),
        ("ppo.minibatch_size".into(), config.ppo.minibatch_size.to_string()),
        ("ppo.entropy_coef".into(), config.ppo.entropy_coef.to_string()),
        ("ppo.lr".into(), config.ppo.lr.to_string()),
        ("ppo.tail_bootstrap".into(), config.ppo.tail_bootstrap.to_string()),
        ("ppo.extra_critic_steps".into(), config.ppo.extra_critic_steps.to_string()),
        ("ddpg.minibatch_size".into(), config.off_policy.minibatch_size.to_string()),
        ("ddpg.tau".into(), config.off_policy.tau.to_string()),
        ("ddpg.actor_lr".into(), config.off_policy.actor_lr.to_string()),
        ("ddpg.critic_lr".into(), config.off_policy.critic_lr.to_string()),
        ("ddpg.buffer_capacity".into(), config.off_policy.buffer_capacity.to_string()),
        ("ddpg.exploration_noise".into(), config.off_policy.exploration_noise.to_string()),
        ("ddpg.warmup_steps".into(), config.off_policy.warmup_steps.to_string()),
        ("ddpg.update_every".into(), config.off_policy.update_every.to_string()),
        ("td3.target_noise_std".into(), config.td3.target_noise_std.to_string()),
        ("td3.target_noise_clip".into(), config.td3.target_noise_clip.to_string()),
        ("td3.policy_delay".into(), config.td3.policy_delay.to_string()),
    ]
}

fn parse_algo_config(header: &BTreeMap<String, String>) -> Result<AlgoConfig> {
    let mut config = AlgoConfig::default();
    let get = |key: &str, default: f64| -> Result<f64> {
        match header.get(key) {
            None => Ok(default),
            Some(text) => text
                .parse()
                .map_err(|_| Error::Config(format!("bad checkpoint value for '{key}'"))),
        }
    };
    let get_bool = |key: &str, default: bool| -> Result<bool> {
        match header.get(key).map(|s| s.as_str()) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => Err(Error::Config(format!(
                "bad checkpoint boolean '{other}' for '{key}'"
            ))),
        }
    };
    config.gamma = get("gamma", config.gamma)?;
    config.ppo.clip_epsilon = get("ppo.clip_epsilon", config.ppo.clip_epsilon)?;
    config.ppo.update_epochs = get("ppo.update_epochs", config.ppo.update_epochs as f64)? as usize;
    config.ppo.samples_per_update =
        get("ppo.samples_per_update", config.ppo.samples_per_update as f64)? as usize;
    config.ppo.minibatch_size =
        get("ppo.minibatch_size", config.ppo.minibatch_size as f64)? as usize;
    config.ppo.entropy_coef = get("ppo.entropy_coef", config.ppo.entropy_coef)?;
    config.ppo.lr = get("ppo.lr", config.ppo.lr)?;
    config.ppo.tail_bootstrap = get_bool("ppo.tail_bootstrap", config.ppo.tail_bootstrap)?;
    config.ppo.extra_critic_steps =
        get("ppo.extra_critic_steps", config.ppo.extra_critic_steps as f64)? as usize;
    config.off_policy.minibatch_size =
        get("ddpg.minibatch_size", config.off_policy.minibatch_size as f64)? as usize;
    config.off_policy.tau = get("ddpg.tau", config.off_policy.tau)?;
    config.off_policy.actor_lr = get("ddpg.actor_lr", config.off_policy.actor_lr)?;
    config.off_policy.critic_lr = get("ddpg.critic_lr", config.off_policy.critic_lr)?;
    config.off_policy.buffer_capacity =
        get("ddpg.buffer_capacity", config.off_policy.buffer_capacity as f64)? as usize;
    config.off_policy.exploration_noise =
        get("ddpg.exploration_noise", config.off_policy.exploration_noise)?;
    config.off_policy.warmup_steps =
        get("ddpg.warmup_steps", config.off_policy.warmup_steps as f64)? as u64;
    config.off_policy.update_every =
        get("ddpg.update_every", config.off_policy.update_every as f64)? as u64;
    config.td3.target_noise_std = get("td3.target_noise_std", config.td3.target_noise_std)?;
    config.td3.target_noise_clip = get("td3.target_noise_clip", config.td3.target_noise_clip)?;
    config.td3.policy_delay = get("td3.policy_delay", config.td3.policy_delay as f64)? as u64;
    Ok(config)
}

fn network_names(agent: &AgentState) -> Vec<String> {
    let mut names = vec!["actor".to_string()];
    for i in 0..agent.critics.len() {
        names.push(format!("critic{i}"));
    }
    if agent.target_actor.is_some() {
        names.push("target_actor".to_string());
    }
    for i in 0..agent.target_critics.len() {
        names.push(format!("target_critic{i}"));
    }
    names
}

pub fn save_agent(path: &Path, agent: &AgentState, config: &RunConfig, step: u64) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    writeln!(writer, "{HEADER_MAGIC}")?;
    writeln!(writer, "algorithm={}", agent.algorithm)?;
    writeln!(writer, "step={step}")?;
    writeln!(writer, "env={}", config.env_name)?;
    for (key, value) in &config.env_overrides {
        writeln!(writer, "env.{key}={value}")?;
    }
    for (key, value) in algo_config_lines(&agent.config) {
        writeln!(writer, "{key}={value}")?;
    }
    if let Some(log_std) = &agent.log_std {
        let rendered: Vec<String> = log_std.iter().map(|v| v.to_string()).collect();
        writeln!(writer, "log_std={}", rendered.join(","))?;
    }
    writeln!(writer, "networks={}", network_names(agent).join(","))?;
    writeln!(writer)?;

    write_params(&mut writer, &agent.actor)?;
    for critic in &agent.critics {
        write_params(&mut writer, critic)?;
    }
    if let Some(target_actor) = &agent.target_actor {
        write_params(&mut writer, target_actor)?;
    }
    for target in &agent.target_critics {
        write_params(&mut writer, target)?;
    }
    writer.flush()?;
    Ok(())
}

/// Load an agent bundle. Optimizer states come back fresh (zero moments) at
/// the configured learning rates; action bounds are rebuilt from the
/// environment registry.
pub fn load_agent(path: &Path) -> Result<(AgentState, CheckpointMeta)> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot open checkpoint {}: {e}", path.display())))?;
    let mut reader = BufReader::new(file);

    let mut header = BTreeMap::new();
    let mut env_overrides = BTreeMap::new();
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != HEADER_MAGIC {
        return Err(Error::Config(format!(
            "{} is not an agent checkpoint (bad magic)",
            path.display()
        )));
    }
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(Error::Config("truncated checkpoint header".into()));
        }
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            break;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("bad checkpoint header line '{trimmed}'")))?;
        if let Some(env_key) = key.strip_prefix("env.") {
            let parsed: f64 = value
                .parse()
                .map_err(|_| Error::Config(format!("bad env override '{trimmed}'")))?;
            env_overrides.insert(env_key.to_string(), parsed);
        } else {
            header.insert(key.to_string(), value.to_string());
        }
    }

    let get = |key: &str| -> Result<&String> {
        header
            .get(key)
            .ok_or_else(|| Error::Config(format!("checkpoint header missing '{key}'")))
    };
    let algorithm: Algorithm = get("algorithm")?.parse()?;
    let step: u64 = get("step")?
        .parse()
        .map_err(|_| Error::Config("bad step in checkpoint header".into()))?;
    let env_name = get("env")?.clone();
    let gamma: f64 = get("gamma")?
        .parse()
        .map_err(|_| Error::Config("bad gamma in checkpoint header".into()))?;
    let log_std: Option<Vec<f64>> = match header.get("log_std") {
        None => None,
        Some(text) => Some(
            text.split(',')
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::Config("bad log_std in checkpoint header".into()))
                })
                .collect::<Result<_>>()?,
        ),
    };
    let names: Vec<&str> = get("networks")?.split(',').collect();

    let mut networks = BTreeMap::new();
    for name in &names {
        networks.insert(name.to_string(), read_params(&mut reader)?);
    }
    // Nothing may trail the records.
    let mut trailing = [0u8; 1];
    if reader.read(&mut trailing)? != 0 {
        return Err(Error::Config("trailing bytes after checkpoint records".into()));
    }

    let env = crate::envs::make_env(&env_name, &env_overrides)?;
    let spec = env.spec();

    let take = |networks: &mut BTreeMap<String, crate::nn::MlpParams>,
                name: &str|
     -> Result<crate::nn::MlpParams> {
        networks
            .remove(name)
            .ok_or_else(|| Error::Config(format!("checkpoint is missing network '{name}'")))
    };

    let config = parse_algo_config(&header)?;

    let actor = take(&mut networks, "actor")?;
    let n_critics = if algorithm == Algorithm::Td3 { 2 } else { 1 };
    let mut critics = Vec::new();
    for i in 0..n_critics {
        critics.push(take(&mut networks, &format!("critic{i}"))?);
    }
    let (target_actor, target_critics) = if algorithm == Algorithm::Ppo {
        (None, Vec::new())
    } else {
        let ta = take(&mut networks, "target_actor")?;
        let mut tcs = Vec::new();
        for i in 0..n_critics {
            tcs.push(take(&mut networks, &format!("target_critic{i}"))?);
        }
        (Some(ta), tcs)
    };

    let actor_optim_len = actor.param_count()
        + if algorithm == Algorithm::Ppo {
            spec.action_dim
        } else {
            0
        };
    let actor_lr = if algorithm == Algorithm::Ppo {
        config.ppo.lr
    } else {
        config.off_policy.actor_lr
    };
    let critic_lr = if algorithm == Algorithm::Ppo {
        config.ppo.lr
    } else {
        config.off_policy.critic_lr
    };
    let critic_optims = critics
        .iter()
        .map(|c| AdamState::new(c.param_count(), critic_lr))
        .collect();
    let agent = AgentState {
        algorithm,
        actor_optim: AdamState::new(actor_optim_len, actor_lr),
        actor,
        log_std,
        critics,
        target_actor,
        target_critics,
        critic_optims,
        config,
        action_low: spec.action_low.clone(),
        action_high: spec.action_high.clone(),
    };
    agent.validate()?;
    Ok((
        agent,
        CheckpointMeta {
            algorithm,
            step,
            env_name,
            env_overrides,
            gamma,
        },
    ))
}
