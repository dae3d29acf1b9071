//! Interaction storage: on-policy rollouts and the off-policy replay ring.

use crate::error::{Error, Result};
use rand::Rng;

/// One environment step.
///
/// For PPO the recorded action is the raw Gaussian sample (the environment
/// clips internally), so `log_prob` is exactly the policy density at
/// (state, action). Off-policy transitions store the executed (clipped)
/// action and a zero `log_prob`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub log_prob: f64,
}

/// Half-open slice of one episode inside a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSpan {
    pub start: usize,
    pub len: usize,
    /// False only for the rollout's trailing episode when collection stopped
    /// mid-episode; its return tail may be bootstrapped.
    pub terminated: bool,
}

impl EpisodeSpan {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Transitions of one on-policy collection phase, grouped by episode, plus
/// the returns and advantages filled in before an update. Return
/// computation never crosses an episode boundary.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    pub episodes: Vec<EpisodeSpan>,
    pub returns: Option<Vec<f64>>,
    pub advantages: Option<Vec<f64>>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn push(&mut self, transition: Transition) {
        self.transitions.push(transition);
    }

    /// Close the currently open episode, if any transitions are pending.
    pub fn close_episode(&mut self, terminated: bool) {
        let start = self.episodes.last().map_or(0, |e| e.start + e.len);
        let len = self.transitions.len() - start;
        if len > 0 {
            self.episodes.push(EpisodeSpan {
                start,
                len,
                terminated,
            });
        }
    }

    pub fn returns(&self) -> Result<&[f64]> {
        self.returns
            .as_deref()
            .ok_or_else(|| Error::Usage("returns not computed for this rollout".into()))
    }

    pub fn advantages(&self) -> Result<&[f64]> {
        self.advantages
            .as_deref()
            .ok_or_else(|| Error::Usage("advantages not computed for this rollout".into()))
    }
}

/// Fixed-capacity ring of transitions; insertion beyond capacity evicts the
/// oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            storage: Vec::with_capacity(capacity.min(4096)),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, transition: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(transition);
        } else {
            self.storage[self.next] = transition;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample with replacement.
    pub fn sample<'a, R: Rng>(&'a self, rng: &mut R, n: usize) -> Vec<&'a Transition> {
        (0..n)
            .map(|_| &self.storage[rng.gen_range(0..self.storage.len())])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }
}
