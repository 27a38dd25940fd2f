use rayon::prelude::*;

use super::agent::AgentSpec;
use super::rollout::{compute_gae, Trajectory};
use crate::diffcore::{backward_into, forward_trace, gaussian_log_prob, GaussianHead, ParamVector};
use crate::error::{check_len, Result};

/// Fixed chunking keeps the reduction order independent of the thread pool.
const CHUNK: usize = 64;

/// One flattened transition ready for a gradient pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub raw_action: Vec<f64>,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub target: f64,
}

/// Flattens trajectories, attaching GAE advantages and value targets.
/// With `normalize`, advantages are shifted and scaled to zero mean and unit
/// variance over the whole batch.
pub fn prepare_samples(batch: &[Trajectory], gamma: f64, lambda: f64, normalize: bool) -> Vec<Sample> {
    let mut samples = Vec::with_capacity(batch.iter().map(Trajectory::len).sum());
    for traj in batch {
        let (adv, ret) = compute_gae(traj, gamma, lambda);
        for ((step, a), r) in traj.steps.iter().zip(adv).zip(ret) {
            samples.push(Sample {
                features: step.features.clone(),
                raw_action: step.raw_action.clone(),
                old_log_prob: step.log_prob,
                advantage: a,
                target: r,
            });
        }
    }
    if normalize {
        normalize_advantages(&mut samples);
    }
    samples
}

pub fn normalize_advantages(samples: &mut [Sample]) {
    if samples.is_empty() {
        return;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples
        .iter()
        .map(|s| (s.advantage - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    let scale = if std > 1e-8 { 1.0 / std } else { 1.0 };
    for s in samples {
        s.advantage = (s.advantage - mean) * scale;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyObjective {
    /// `-E[min(r A, clip(r, 1-eps, 1+eps) A)]`
    Clipped { eps: f64 },
    /// `-E[A log pi(a|s)]`
    Vanilla,
}

/// Policy loss and its gradient with respect to the full policy vector.
pub fn policy_loss_and_grad(
    spec: &AgentSpec,
    policy: &ParamVector,
    samples: &[Sample],
    objective: PolicyObjective,
) -> Result<(f64, ParamVector)> {
    check_len("policy parameters", spec.policy_len(), policy.len())?;
    let n_net = spec.policy_net.param_count();
    let net = spec.mean_net_params(policy);
    let log_std = spec.split_policy(policy).1.to_vec();
    let inv_n = 1.0 / samples.len().max(1) as f64;

    let partials: Vec<(f64, Vec<f64>)> = samples
        .par_chunks(CHUNK)
        .map(|chunk| -> Result<(f64, Vec<f64>)> {
            let mut grad = vec![0.0; spec.policy_len()];
            let mut loss = 0.0;
            for s in chunk {
                let trace = forward_trace(&spec.policy_net, &net, &s.features)?;
                let head = GaussianHead::new(trace.output().to_vec(), log_std.clone())?;
                let log_prob = gaussian_log_prob(&head, &s.raw_action)?;
                let (term, coeff) = match objective {
                    PolicyObjective::Vanilla => (s.advantage * log_prob, s.advantage),
                    PolicyObjective::Clipped { eps } => {
                        let ratio = (log_prob - s.old_log_prob).exp();
                        let unclipped = ratio * s.advantage;
                        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * s.advantage;
                        if unclipped <= clipped {
                            (unclipped, s.advantage * ratio)
                        } else {
                            (clipped, 0.0)
                        }
                    }
                };
                loss -= term;
                if coeff == 0.0 {
                    continue;
                }
                let c = -coeff * inv_n;
                let (d_mean, d_log_std) = head.log_prob_grad(&s.raw_action)?;
                let out_grad: Vec<f64> = d_mean.iter().map(|d| c * d).collect();
                backward_into(&spec.policy_net, &net, &trace, &out_grad, &mut grad[..n_net])?;
                for (g, d) in grad[n_net..].iter_mut().zip(&d_log_std) {
                    *g += c * d;
                }
            }
            Ok((loss, grad))
        })
        .collect::<Result<_>>()?;

    let mut grad = vec![0.0; spec.policy_len()];
    let mut loss = 0.0;
    for (l, g) in partials {
        loss += l;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    Ok((loss * inv_n, ParamVector::new(grad)))
}

/// Mean squared error of the value network against the stored targets.
pub fn value_loss_and_grad(
    spec: &AgentSpec,
    value: &ParamVector,
    samples: &[Sample],
) -> Result<(f64, ParamVector)> {
    check_len("value parameters", spec.value_len(), value.len())?;
    let inv_n = 1.0 / samples.len().max(1) as f64;
    let partials: Vec<(f64, Vec<f64>)> = samples
        .par_chunks(CHUNK)
        .map(|chunk| -> Result<(f64, Vec<f64>)> {
            let mut grad = vec![0.0; spec.value_len()];
            let mut loss = 0.0;
            for s in chunk {
                let trace = forward_trace(&spec.value_net, value, &s.features)?;
                let err = spec.value_scale * trace.output()[0] - s.target;
                loss += err * err;
                let out_grad = [2.0 * err * spec.value_scale * inv_n];
                backward_into(&spec.value_net, value, &trace, &out_grad, &mut grad)?;
            }
            Ok((loss, grad))
        })
        .collect::<Result<_>>()?;
    let mut grad = vec![0.0; spec.value_len()];
    let mut loss = 0.0;
    for (l, g) in partials {
        loss += l;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    Ok((loss * inv_n, ParamVector::new(grad)))
}
