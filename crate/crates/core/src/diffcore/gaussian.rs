use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Diagonal Gaussian over one continuous action per CAV pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianHead {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl GaussianHead {
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Result<Self> {
        check_len("gaussian head", mean.len(), log_std.len())?;
        Ok(Self { mean, log_std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn std(&self, i: usize) -> f64 {
        self.log_std[i].exp()
    }

    /// Gradient of `log p(action)` with respect to the mean and the log-std.
    pub fn log_prob_grad(&self, action: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("gaussian action", self.dim(), action.len())?;
        let mut d_mean = Vec::with_capacity(self.dim());
        let mut d_log_std = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let var = (2.0 * self.log_std[i]).exp();
            let diff = action[i] - self.mean[i];
            d_mean.push(diff / var);
            d_log_std.push(diff * diff / var - 1.0);
        }
        Ok((d_mean, d_log_std))
    }
}

/// Clamps every log-std into `[LOG_STD_MIN, LOG_STD_MAX]`.
pub fn clamp_log_std(log_std: &mut [f64]) {
    for v in log_std {
        *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
    }
}

/// Sum over dimensions of the Gaussian log-density.
pub fn gaussian_log_prob(head: &GaussianHead, action: &[f64]) -> Result<f64> {
    check_len("gaussian action", head.dim(), action.len())?;
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    let mut total = 0.0;
    for i in 0..head.dim() {
        let var = (2.0 * head.log_std[i]).exp();
        let diff = action[i] - head.mean[i];
        total += -diff * diff / (2.0 * var) - head.log_std[i] - half_log_2pi;
    }
    Ok(total)
}

/// Differential entropy averaged (not summed) over the action dimensions.
pub fn gaussian_entropy(head: &GaussianHead) -> f64 {
    entropy_from_log_std(&head.log_std)
}

pub fn entropy_from_log_std(log_std: &[f64]) -> f64 {
    if log_std.is_empty() {
        return 0.0;
    }
    let base = 0.5 * (2.0 * PI * E).ln();
    let total: f64 = log_std.iter().map(|s| base + s).sum();
    total / log_std.len() as f64
}
