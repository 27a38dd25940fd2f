use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ppo::Optimizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaAlgorithm {
    Fomaml,
    Reptile,
}

impl MetaAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            MetaAlgorithm::Fomaml => "fomaml",
            MetaAlgorithm::Reptile => "reptile",
        }
    }

    pub fn default_outer_lr(self) -> f64 {
        match self {
            MetaAlgorithm::Fomaml => 1e-3,
            MetaAlgorithm::Reptile => 0.25,
        }
    }

    pub fn default_outer_value_lr(self) -> f64 {
        match self {
            MetaAlgorithm::Fomaml => 1e-3,
            MetaAlgorithm::Reptile => 0.25,
        }
    }
}

impl std::str::FromStr for MetaAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fomaml" => Ok(MetaAlgorithm::Fomaml),
            "reptile" => Ok(MetaAlgorithm::Reptile),
            other => Err(Error::Config(format!("unknown meta algorithm {other:?}"))),
        }
    }
}

fn plain_descent() -> Optimizer {
    Optimizer::Sgd
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub algorithm: MetaAlgorithm,
    /// Tasks sampled per iteration.
    pub tasks_per_iteration: usize,
    pub inner_lr: f64,
    /// Outer step on the policy vector. FOMAML: gradient step size.
    /// Reptile: interpolation factor.
    pub outer_lr: f64,
    /// Outer step on the value vector, same meaning as `outer_lr`.
    pub outer_value_lr: f64,
    /// Rule applying the outer step along the averaged direction.
    #[serde(default = "plain_descent")]
    pub outer_optimizer: Optimizer,
    pub inner_steps: usize,
    pub iterations: usize,
    /// Episodes per data-collection round.
    pub episodes_per_task: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
}

impl MetaConfig {
    pub fn new(algorithm: MetaAlgorithm) -> Self {
        Self {
            algorithm,
            tasks_per_iteration: 8,
            inner_lr: 3e-4,
            outer_lr: algorithm.default_outer_lr(),
            outer_value_lr: algorithm.default_outer_value_lr(),
            outer_optimizer: Optimizer::Sgd,
            inner_steps: 1,
            iterations: 300,
            episodes_per_task: 10,
            gamma: 0.99,
            gae_lambda: 0.95,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.tasks_per_iteration == 0 {
            problems.push("tasks_per_iteration must be at least 1".to_string());
        }
        if !(self.inner_lr > 0.0 && self.outer_lr > 0.0 && self.outer_value_lr > 0.0) {
            problems.push(format!(
                "meta learning rates must be positive, got inner {} outer {} outer value {}",
                self.inner_lr, self.outer_lr, self.outer_value_lr
            ));
        }
        if self.inner_steps != 1 {
            problems.push(format!(
                "meta-training uses exactly one inner step, got {}",
                self.inner_steps
            ));
        }
        if self.episodes_per_task == 0 {
            problems.push("episodes_per_task must be at least 1".to_string());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            problems.push("meta gamma and gae_lambda must lie in (0,1]".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self::new(MetaAlgorithm::Fomaml)
    }
}
