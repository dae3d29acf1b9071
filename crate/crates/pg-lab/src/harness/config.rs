//! Flat key=value run configuration.
//!
//! Config files are plain text: one `key=value` per line, `#` comments,
//! blank lines ignored. CLI `--set key=value` flags override file values.
//! Unknown keys are rejected so typos fail fast. The full key reference
//! lives in the book's experiments chapter.

use crate::algo::{AlgoConfig, Algorithm, NetConfig};
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::rng::fnv1a64;
use crate::search::{Annealing, SearchConfig};
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Ordered key=value map with accessed-key tracking.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
    accessed: RefCell<Vec<String>>,
}

impl ConfigMap {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut map = ConfigMap::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected key=value, got '{raw}'",
                    path.display(),
                    line_no + 1
                ))
            })?;
            map.values
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(map)
    }

    /// Apply `--set key=value` overrides.
    pub fn apply_sets(&mut self, sets: &[String]) -> Result<()> {
        for set in sets {
            let (key, value) = set.split_once('=').ok_or_else(|| {
                Error::Config(format!("--set expects key=value, got '{set}'"))
            })?;
            self.values
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.accessed.borrow_mut().push(key.to_string());
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(text) => text.parse().map_err(|_| {
                Error::Config(format!("invalid value '{text}' for key '{key}'"))
            }),
        }
    }

    pub fn get_string(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(other) => Err(Error::Config(format!(
                "invalid boolean '{other}' for key '{key}'"
            ))),
        }
    }

    /// All keys under `prefix.` with the prefix stripped, parsed as f64.
    fn numeric_group(&self, prefix: &str) -> Result<BTreeMap<String, f64>> {
        let mut group = BTreeMap::new();
        let full_prefix = format!("{prefix}.");
        for (key, value) in &self.values {
            if let Some(stripped) = key.strip_prefix(&full_prefix) {
                self.accessed.borrow_mut().push(key.clone());
                let parsed: f64 = value.parse().map_err(|_| {
                    Error::Config(format!("invalid numeric value '{value}' for key '{key}'"))
                })?;
                group.insert(stripped.to_string(), parsed);
            }
        }
        Ok(group)
    }

    /// Error on any key that was never consumed while building a RunConfig.
    fn reject_unaccessed(&self) -> Result<()> {
        let accessed = self.accessed.borrow();
        for key in self.values.keys() {
            if !accessed.iter().any(|a| a == key) {
                return Err(Error::Config(format!("unknown config key '{key}'")));
            }
        }
        Ok(())
    }

    /// FNV-1a hash over the canonical `key=value\n` listing.
    pub fn hash(&self) -> u64 {
        let mut canonical = String::new();
        for (key, value) in &self.values {
            canonical.push_str(key);
            canonical.push('=');
            canonical.push_str(value);
            canonical.push('\n');
        }
        fnv1a64(canonical.as_bytes())
    }

    /// Canonical listing for meta files.
    pub fn canonical_lines(&self) -> Vec<String> {
        self.values
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect()
    }
}

/// Everything one training run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub env_name: String,
    pub env_overrides: BTreeMap<String, f64>,
    pub total_steps: u64,
    pub seed: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub output_dir: PathBuf,
    pub net: NetConfig,
    pub algo: AlgoConfig,
    pub search: Option<SearchConfig>,
    /// Hash of the source ConfigMap, stamped into meta.txt.
    pub config_hash: u64,
    /// Canonical key=value lines of the source ConfigMap.
    pub config_lines: Vec<String>,
}

impl RunConfig {
    /// Parse and validate a full run configuration; unknown keys error.
    pub fn from_map(map: &ConfigMap) -> Result<RunConfig> {
        let algorithm: Algorithm = map.get_string("algorithm", "ppo").parse()?;
        let env_name = map.get_string("env", "pendulum-swingup");
        let env_overrides = map.numeric_group("env")?;

        let default_steps: u64 = match env_name.as_str() {
            "point-mass-2d" => 150_000,
            _ => 200_000,
        };
        let total_steps = map.get_parsed("total_steps", default_steps)?;
        let seed = map.get_parsed("seed", 0u64)?;
        let eval_every = map.get_parsed("eval_every", 5000u64)?;
        let eval_episodes = map.get_parsed("eval_episodes", 10usize)?;
        if eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        if total_steps > 0 && total_steps < eval_every {
            return Err(Error::Config(
                "total_steps must be at least eval_every".into(),
            ));
        }

        let default_dir = format!("runs/{algorithm}_{env_name}_seed{seed}");
        let output_dir = PathBuf::from(map.get_string("output_dir", &default_dir));

        let hidden_text = map.get_string("net.hidden", "64,64");
        let hidden_dims: Vec<usize> = hidden_text
            .split(',')
            .map(|part| {
                part.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("invalid net.hidden '{hidden_text}'")))
            })
            .collect::<Result<_>>()?;
        let hidden_activation = match map.get_string("net.activation", "relu").as_str() {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            other => {
                return Err(Error::Config(format!(
                    "unknown net.activation '{other}' (relu or tanh)"
                )))
            }
        };
        let net = NetConfig {
            hidden_dims,
            hidden_activation,
        };

        let mut algo = AlgoConfig::default();
        algo.gamma = map.get_parsed("gamma", algo.gamma)?;
        algo.ppo.clip_epsilon = map.get_parsed("ppo.clip_epsilon", algo.ppo.clip_epsilon)?;
        algo.ppo.update_epochs = map.get_parsed("ppo.update_epochs", algo.ppo.update_epochs)?;
        algo.ppo.samples_per_update =
            map.get_parsed("ppo.samples_per_update", algo.ppo.samples_per_update)?;
        algo.ppo.minibatch_size = map.get_parsed("ppo.minibatch_size", algo.ppo.minibatch_size)?;
        algo.ppo.entropy_coef = map.get_parsed("ppo.entropy_coef", algo.ppo.entropy_coef)?;
        algo.ppo.lr = map.get_parsed("ppo.lr", algo.ppo.lr)?;
        algo.ppo.tail_bootstrap = map.get_bool("ppo.tail_bootstrap", algo.ppo.tail_bootstrap)?;
        algo.ppo.extra_critic_steps =
            map.get_parsed("ppo.extra_critic_steps", algo.ppo.extra_critic_steps)?;
        algo.off_policy.minibatch_size =
            map.get_parsed("ddpg.minibatch_size", algo.off_policy.minibatch_size)?;
        algo.off_policy.tau = map.get_parsed("ddpg.tau", algo.off_policy.tau)?;
        algo.off_policy.actor_lr = map.get_parsed("ddpg.actor_lr", algo.off_policy.actor_lr)?;
        algo.off_policy.critic_lr = map.get_parsed("ddpg.critic_lr", algo.off_policy.critic_lr)?;
        algo.off_policy.buffer_capacity =
            map.get_parsed("ddpg.buffer_capacity", algo.off_policy.buffer_capacity)?;
        algo.off_policy.exploration_noise =
            map.get_parsed("ddpg.exploration_noise", algo.off_policy.exploration_noise)?;
        algo.off_policy.warmup_steps =
            map.get_parsed("ddpg.warmup_steps", algo.off_policy.warmup_steps)?;
        algo.off_policy.update_every =
            map.get_parsed("ddpg.update_every", algo.off_policy.update_every)?;
        algo.td3.target_noise_std =
            map.get_parsed("td3.target_noise_std", algo.td3.target_noise_std)?;
        algo.td3.target_noise_clip =
            map.get_parsed("td3.target_noise_clip", algo.td3.target_noise_clip)?;
        algo.td3.policy_delay = map.get_parsed("td3.policy_delay", algo.td3.policy_delay)?;
        algo.validate()?;

        let search = if map.get_bool("search.enabled", false)? {
            let defaults = SearchConfig::default();
            let annealing_end: u64 = map.get_parsed("search.annealing_end_step", 0u64)?;
            let config = SearchConfig {
                population_size: map
                    .get_parsed("search.population_size", defaults.population_size)?,
                sigma_min: map.get_parsed("search.sigma_min", defaults.sigma_min)?,
                sigma_max: map.get_parsed("search.sigma_max", defaults.sigma_max)?,
                search_period: map.get_parsed("search.period", defaults.search_period)?,
                eval_batch_size: map
                    .get_parsed("search.eval_batch_size", defaults.eval_batch_size)?,
                target_alpha: map.get_parsed("search.target_alpha", defaults.target_alpha)?,
                annealing: if annealing_end == 0 {
                    Annealing::None
                } else {
                    Annealing::LinearToZero {
                        end_step: annealing_end,
                    }
                },
                include_original: map.get_bool("search.include_original", true)?,
                reset_critic_optim: map.get_bool("search.reset_critic_optim", false)?,
                scale_mode: map.get_string("search.scale_mode", "two-scale").parse()?,
            };
            config.validate()?;
            Some(config)
        } else {
            // Touch search keys so a disabled-search config with stale
            // search settings still round-trips without unknown-key errors.
            for key in [
                "search.population_size",
                "search.sigma_min",
                "search.sigma_max",
                "search.period",
                "search.eval_batch_size",
                "search.target_alpha",
                "search.annealing_end_step",
                "search.include_original",
                "search.reset_critic_optim",
                "search.scale_mode",
            ] {
                let _ = map.raw(key);
            }
            None
        };

        map.reject_unaccessed()?;
        Ok(RunConfig {
            algorithm,
            env_name,
            env_overrides,
            total_steps,
            seed,
            eval_every,
            eval_episodes,
            output_dir,
            net,
            algo,
            search,
            config_hash: map.hash(),
            config_lines: map.canonical_lines(),
        })
    }

    pub fn env_factory(
        &self,
    ) -> impl Fn() -> Result<Box<dyn crate::envs::Environment>> + Send + Sync + Clone + '_ {
        let name = self.env_name.clone();
        let overrides = self.env_overrides.clone();
        move || crate::envs::make_env(&name, &overrides)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::ScaleMode;

    fn map_of(pairs: &[(&str, &str)]) -> ConfigMap {
        let mut map = ConfigMap::default();
        for (k, v) in pairs {
            map.set(k, v);
        }
        map
    }

    #[test]
    fn defaults_build_a_valid_config() {
        let config = RunConfig::from_map(&ConfigMap::default()).unwrap();
        assert_eq!(config.algorithm, Algorithm::Ppo);
        assert_eq!(config.env_name, "pendulum-swingup");
        assert_eq!(config.total_steps, 200_000);
        assert!(config.search.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let map = map_of(&[("ppo.clip_epsilonn", "0.2")]);
        assert!(matches!(
            RunConfig::from_map(&map),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sets_override_values() {
        let mut map = map_of(&[("seed", "1")]);
        map.apply_sets(&["seed=9".to_string(), "algorithm=td3".to_string()])
            .unwrap();
        let config = RunConfig::from_map(&map).unwrap();
        assert_eq!(config.seed, 9);
        assert_eq!(config.algorithm, Algorithm::Td3);
    }

    #[test]
    fn search_block_parses_when_enabled() {
        let map = map_of(&[
            ("search.enabled", "true"),
            ("search.population_size", "4"),
            ("search.annealing_end_step", "1000"),
            ("search.scale_mode", "small-only"),
        ]);
        let config = RunConfig::from_map(&map).unwrap();
        let search = config.search.unwrap();
        assert_eq!(search.population_size, 4);
        assert_eq!(search.annealing, Annealing::LinearToZero { end_step: 1000 });
        assert_eq!(search.scale_mode, ScaleMode::SmallOnly);
    }

    #[test]
    fn env_overrides_are_grouped() {
        let map = map_of(&[("env.dt", "0.1"), ("env.g", "9.81")]);
        let config = RunConfig::from_map(&map).unwrap();
        assert_eq!(config.env_overrides["dt"], 0.1);
        assert_eq!(config.env_overrides["g"], 9.81);
    }

    #[test]
    fn hash_is_order_independent_and_value_sensitive() {
        let a = map_of(&[("seed", "1"), ("algorithm", "ppo")]);
        let b = map_of(&[("algorithm", "ppo"), ("seed", "1")]);
        assert_eq!(a.hash(), b.hash());
        let c = map_of(&[("algorithm", "ppo"), ("seed", "2")]);
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn config_files_parse_with_comments() {
        let dir = std::env::temp_dir().join("pg-lab-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sample.txt");
        std::fs::write(&path, "# sample\nseed = 5\nalgorithm=ddpg # inline\n\n").unwrap();
        let map = ConfigMap::from_file(&path).unwrap();
        let config = RunConfig::from_map(&map).unwrap();
        assert_eq!(config.seed, 5);
        assert_eq!(config.algorithm, Algorithm::Ddpg);
    }
}
