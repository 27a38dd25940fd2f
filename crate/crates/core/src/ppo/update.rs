use serde::{Deserialize, Serialize};

use super::agent::{AgentParams, AgentSpec};
use super::optim::{Optimizer, OptimizerState};
use super::loss::{policy_loss_and_grad, prepare_samples, value_loss_and_grad, PolicyObjective, Sample};
use super::rollout::Trajectory;
use crate::diffcore::{clamp_log_std, ParamVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub update_epochs: usize,
    pub episodes_per_epoch: usize,
    /// Entropy is reported only; a non-zero bonus is rejected by `validate`.
    pub entropy_bonus: f64,
    /// Global-norm cap applied to each gradient before the descent step.
    pub max_grad_norm: Option<f64>,
    pub optimizer: Optimizer,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            policy_lr: 3e-3,
            value_lr: 1e-3,
            update_epochs: 4,
            episodes_per_epoch: 10,
            entropy_bonus: 0.0,
            max_grad_norm: None,
            optimizer: Optimizer::adam(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            problems.push(format!("clip_eps must lie in (0,1), got {}", self.clip_eps));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            problems.push(format!("gamma must lie in (0,1], got {}", self.gamma));
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            problems.push(format!("gae_lambda must lie in (0,1], got {}", self.gae_lambda));
        }
        if !(self.policy_lr > 0.0 && self.value_lr > 0.0) {
            problems.push("learning rates must be positive".to_string());
        }
        if self.update_epochs == 0 || self.episodes_per_epoch == 0 {
            problems.push("update_epochs and episodes_per_epoch must be at least 1".to_string());
        }
        if self.entropy_bonus != 0.0 {
            problems.push("entropy_bonus is not supported; entropy is only reported".to_string());
        }
        if let Some(c) = self.max_grad_norm {
            if !(c > 0.0) {
                problems.push(format!("max_grad_norm must be positive, got {c}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Mean over the inner epochs of the pre-step surrogate loss.
    pub surrogate_loss: f64,
    /// Mean over the inner epochs of the pre-step value loss.
    pub value_loss: f64,
    /// Entropy of the updated policy.
    pub entropy: f64,
}

pub(crate) fn clip_grad(grad: &mut ParamVector, max_norm: Option<f64>) {
    if let Some(max) = max_norm {
        let norm = grad.norm();
        if norm > max {
            let s = max / norm;
            for g in grad.as_mut_slice() {
                *g *= s;
            }
        }
    }
}

pub(crate) fn clamp_policy(spec: &AgentSpec, policy: &mut ParamVector) {
    let n = spec.policy_net.param_count();
    clamp_log_std(&mut policy.as_mut_slice()[n..]);
}

/// Optimizer state of one training run (policy and value vectors).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState {
    policy: OptimizerState,
    value: OptimizerState,
}

impl TrainerState {
    pub fn new(spec: &AgentSpec, optimizer: Optimizer) -> Self {
        Self {
            policy: OptimizerState::new(optimizer, spec.policy_len()),
            value: OptimizerState::new(optimizer, spec.value_len()),
        }
    }

    /// One descent step on both vectors along `grad`, then the log-std clamp.
    pub(crate) fn apply(
        &mut self,
        spec: &AgentSpec,
        params: &mut AgentParams,
        policy_lr: f64,
        value_lr: f64,
        grad: &AgentParams,
    ) -> Result<()> {
        self.policy.step(&mut params.policy, policy_lr, &grad.policy)?;
        clamp_policy(spec, &mut params.policy);
        self.value.step(&mut params.value, value_lr, &grad.value)
    }
}

/// PPO update on a batch of trajectories collected by `agent`, starting from
/// fresh optimizer state.
///
/// On a non-finite loss or gradient the update is abandoned and an error is
/// returned; the caller keeps its previous parameters.
pub fn ppo_update(
    spec: &AgentSpec,
    agent: &AgentParams,
    batch: &[Trajectory],
    config: &PpoConfig,
) -> Result<(AgentParams, UpdateStats)> {
    let mut state = TrainerState::new(spec, config.optimizer);
    ppo_update_with_state(spec, agent, batch, config, &mut state)
}

/// As [`ppo_update`], continuing from the optimizer state of a training run.
/// The state is only advanced when the update succeeds.
pub fn ppo_update_with_state(
    spec: &AgentSpec,
    agent: &AgentParams,
    batch: &[Trajectory],
    config: &PpoConfig,
    state: &mut TrainerState,
) -> Result<(AgentParams, UpdateStats)> {
    let samples = prepare_samples(batch, config.gamma, config.gae_lambda, true);
    let objective = PolicyObjective::Clipped {
        eps: config.clip_eps,
    };
    let mut trial = state.clone();
    let out = update_on_samples(spec, agent, &samples, config, objective, &mut trial)?;
    *state = trial;
    Ok(out)
}

pub fn update_on_samples(
    spec: &AgentSpec,
    agent: &AgentParams,
    samples: &[Sample],
    config: &PpoConfig,
    objective: PolicyObjective,
    state: &mut TrainerState,
) -> Result<(AgentParams, UpdateStats)> {
    spec.check(agent)?;
    let mut next = agent.clone();
    let mut surrogate = 0.0;
    let mut value_loss = 0.0;
    for _ in 0..config.update_epochs {
        let (sl, mut pg) = policy_loss_and_grad(spec, &next.policy, samples, objective)?;
        let (vl, mut vg) = value_loss_and_grad(spec, &next.value, samples)?;
        if !(sl.is_finite() && vl.is_finite() && pg.is_finite() && vg.is_finite()) {
            return Err(Error::NonFinite("ppo update"));
        }
        clip_grad(&mut pg, config.max_grad_norm);
        clip_grad(&mut vg, config.max_grad_norm);
        state.apply(
            spec,
            &mut next,
            config.policy_lr,
            config.value_lr,
            &AgentParams { policy: pg, value: vg },
        )?;
        surrogate += sl;
        value_loss += vl;
    }
    if !next.is_finite() {
        return Err(Error::NonFinite("ppo parameters"));
    }
    let k = config.update_epochs as f64;
    let entropy = spec.entropy(&next);
    Ok((
        next,
        UpdateStats {
            surrogate_loss: surrogate / k,
            value_loss: value_loss / k,
            entropy,
        },
    ))
}
