//! Adam optimizer with bias correction.

use super::{FlatGradient, MlpParams};
use crate::error::{Error, Result};

/// First/second moment estimates plus hyperparameters for one parameter
/// vector. One step increments `step_count` by exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn param_count(&self) -> usize {
        self.first_moment.len()
    }
}

/// One in-place Adam descent step on a flat parameter vector.
pub fn adam_step_flat(values: &mut [f64], grad: &[f64], state: &mut AdamState) -> Result<()> {
    if grad.len() != values.len() || state.param_count() != values.len() {
        return Err(Error::Shape {
            what: "adam step",
            expected: values.len(),
            got: if grad.len() != values.len() {
                grad.len()
            } else {
                state.param_count()
            },
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);
    for i in 0..values.len() {
        let g = grad[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        state.second_moment[i] =
            state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.first_moment[i] / bias1;
        let v_hat = state.second_moment[i] / bias2;
        values[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
        debug_assert!(values[i].is_finite());
    }
    Ok(())
}

/// One Adam descent step on a network, returning the updated parameters and
/// optimizer state.
pub fn adam_step(
    params: &MlpParams,
    grad: &FlatGradient,
    state: &AdamState,
) -> Result<(MlpParams, AdamState)> {
    if grad.param_count() != params.param_count() {
        return Err(Error::Shape {
            what: "adam gradient",
            expected: params.param_count(),
            got: grad.param_count(),
        });
    }
    let mut flat = params.flatten();
    let mut new_state = state.clone();
    adam_step_flat(&mut flat, grad.values(), &mut new_state)?;
    let updated = MlpParams::unflatten(params.architecture().clone(), &flat)?;
    Ok((updated, new_state))
}
