//! Desk-scale policy-gradient laboratory.
//!
//! Three deep policy-gradient algorithms (PPO, DDPG, TD3) on seeded toy
//! continuous-control tasks, plus a gradient-free two-scale population
//! search over critic parameters and the diagnostics needed to study why
//! better critics help: gradient-estimate cosine similarity, critic error
//! against empirical returns, and perturbation-delta maps.
//!
//! The guide under `book/` walks through every subsystem; its code snippets
//! are compiled as doc-tests via the [`book`] module. Start with
//! [`harness::run`] for end-to-end training or the `pg-lab` CLI.

pub mod algo;
pub mod book;
pub mod diagnostics;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod search;

pub use error::{Error, Result};
