//! Diagonal Gaussian policy head.
//!
//! The actor MLP outputs the mean; a learned state-independent log-std
//! vector supplies the spread. Per-dimension densities multiply.

use rand::Rng;
use rand_distr::StandardNormal;

const LN_2PI: f64 = 1.8378770664093453;

/// Draw `mean + exp(log_std) * eps`, `eps ~ N(0, I)`.
pub fn gaussian_sample<R: Rng>(mean: &[f64], log_std: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(&m, &ls)| {
            let eps: f64 = rng.sample(StandardNormal);
            m + ls.exp() * eps
        })
        .collect()
}

/// Log density of `action` under the diagonal Gaussian.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    debug_assert_eq!(mean.len(), action.len());
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Differential entropy; depends only on the log-stds.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|&ls| ls + 0.5 * (LN_2PI + 1.0)).sum()
}

/// d log p / d mean_i = (a_i - m_i) / sigma_i^2.
pub fn dlogp_dmean(mean: &[f64], log_std: &[f64], action: &[f64], out: &mut [f64]) {
    for i in 0..mean.len() {
        let var = (2.0 * log_std[i]).exp();
        out[i] = (action[i] - mean[i]) / var;
    }
}

/// d log p / d log_std_i = ((a_i - m_i) / sigma_i)^2 - 1.
pub fn dlogp_dlogstd(mean: &[f64], log_std: &[f64], action: &[f64], out: &mut [f64]) {
    for i in 0..mean.len() {
        let z = (action[i] - mean[i]) / log_std[i].exp();
        out[i] = z * z - 1.0;
    }
}
