use crate::diffcore::ParamVector;
use crate::error::{check_len, Error, Result};
use crate::ppo::{
    clamp_policy, collect_batch, policy_loss_and_grad, prepare_samples, value_loss_and_grad,
    AgentParams, AgentSpec, PolicyObjective, Task, Trajectory,
};
use crate::rng::SimRng;

use super::config::{MetaAlgorithm, MetaConfig};

/// What a task sends back to the meta learner.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Adaptation-loss gradient at the adapted parameters.
    Gradient(AgentParams),
    /// `adapted - meta`.
    Delta(AgentParams),
}

impl Payload {
    pub fn params(&self) -> &AgentParams {
        match self {
            Payload::Gradient(p) | Payload::Delta(p) => p,
        }
    }

    fn algorithm(&self) -> MetaAlgorithm {
        match self {
            Payload::Gradient(_) => MetaAlgorithm::Fomaml,
            Payload::Delta(_) => MetaAlgorithm::Reptile,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaReport {
    pub task_id: u64,
    pub adaptation_loss: f64,
    pub payload: Payload,
}

/// Result of the single inner step on one task.
#[derive(Debug, Clone)]
pub struct InnerAdaptation {
    pub adapted: AgentParams,
    /// Batch collected with the meta model.
    pub first_round: Vec<Trajectory>,
    /// Individual loss of the meta model on `first_round`.
    pub inner_loss: f64,
    pub inner_grad: AgentParams,
}

/// Unclipped policy-gradient loss plus value regression on `batch`, and the
/// gradient of their sum with respect to both parameter vectors.
pub fn individual_loss_and_grad(
    spec: &AgentSpec,
    params: &AgentParams,
    batch: &[Trajectory],
    config: &MetaConfig,
) -> Result<(f64, AgentParams)> {
    spec.check(params)?;
    let samples = prepare_samples(batch, config.gamma, config.gae_lambda, true);
    let (pl, pg) = policy_loss_and_grad(spec, &params.policy, &samples, PolicyObjective::Vanilla)?;
    let (vl, vg) = value_loss_and_grad(spec, &params.value, &samples)?;
    let loss = pl + vl;
    if !(loss.is_finite() && pg.is_finite() && vg.is_finite()) {
        return Err(Error::NonFinite("individual loss"));
    }
    Ok((loss, AgentParams { policy: pg, value: vg }))
}

/// Copies the meta model, collects the first-round batch with it and takes
/// one plain gradient step of size `inner_lr`.
pub fn inner_adapt(
    spec: &AgentSpec,
    meta: &AgentParams,
    task: &Task,
    config: &MetaConfig,
    rng: &mut SimRng,
) -> Result<InnerAdaptation> {
    let first_round = collect_batch(task, spec, meta, config.episodes_per_task, rng)?;
    let (inner_loss, inner_grad) = individual_loss_and_grad(spec, meta, &first_round, config)?;
    let mut adapted = meta.clone();
    adapted.policy.add_scaled(-config.inner_lr, &inner_grad.policy)?;
    adapted.value.add_scaled(-config.inner_lr, &inner_grad.value)?;
    clamp_policy(spec, &mut adapted.policy);
    if !adapted.is_finite() {
        return Err(Error::NonFinite("adapted parameters"));
    }
    Ok(InnerAdaptation {
        adapted,
        first_round,
        inner_loss,
        inner_grad,
    })
}

/// FOMAML report computed on a given second-round batch.
pub fn adaptation_report(
    spec: &AgentSpec,
    task_id: u64,
    adapted: &AgentParams,
    second_round: &[Trajectory],
    config: &MetaConfig,
) -> Result<MetaReport> {
    let (adaptation_loss, grad) = individual_loss_and_grad(spec, adapted, second_round, config)?;
    Ok(MetaReport {
        task_id,
        adaptation_loss,
        payload: Payload::Gradient(grad),
    })
}

/// Collects a fresh batch with the adapted model and reports the gradient of
/// the individual loss on it, evaluated at the adapted parameters.
pub fn adaptation_loss_gradient(
    spec: &AgentSpec,
    adapted: &AgentParams,
    task: &Task,
    config: &MetaConfig,
    rng: &mut SimRng,
) -> Result<MetaReport> {
    let second_round = collect_batch(task, spec, adapted, config.episodes_per_task, rng)?;
    adaptation_report(spec, task.id, adapted, &second_round, config)
}

/// Reptile report; `inner_loss` stands in for the adaptation loss.
pub fn reptile_delta(
    task_id: u64,
    meta: &AgentParams,
    adapted: &AgentParams,
    inner_loss: f64,
) -> Result<MetaReport> {
    check_len("reptile policy", meta.policy.len(), adapted.policy.len())?;
    check_len("reptile value", meta.value.len(), adapted.value.len())?;
    Ok(MetaReport {
        task_id,
        adaptation_loss: inner_loss,
        payload: Payload::Delta(AgentParams {
            policy: adapted.policy.sub(&meta.policy)?,
            value: adapted.value.sub(&meta.value)?,
        }),
    })
}

fn mean_in_task_order(reports: &[MetaReport]) -> Result<AgentParams> {
    let mut ordered: Vec<&MetaReport> = reports.iter().collect();
    ordered.sort_by_key(|r| r.task_id);
    let first = ordered[0].payload.params();
    let mut policy = ParamVector::zeros(first.policy.len());
    let mut value = ParamVector::zeros(first.value.len());
    for r in &ordered {
        let p = r.payload.params();
        policy.add_scaled(1.0, &p.policy)?;
        value.add_scaled(1.0, &p.value)?;
    }
    let inv = 1.0 / ordered.len() as f64;
    Ok(AgentParams {
        policy: policy.scale(inv),
        value: value.scale(inv),
    })
}

/// Descent direction of one iteration: the mean gradient for FOMAML, the
/// negated mean delta for Reptile. Reports are averaged in task-id order.
pub fn meta_direction(reports: &[MetaReport], config: &MetaConfig) -> Result<AgentParams> {
    if reports.is_empty() {
        return Err(Error::AllTasksFailed(0));
    }
    if let Some(r) = reports.iter().find(|r| r.payload.algorithm() != config.algorithm) {
        return Err(Error::Config(format!(
            "task {} sent a {} payload to a {} meta learner",
            r.task_id,
            r.payload.algorithm().name(),
            config.algorithm.name()
        )));
    }
    let mean = mean_in_task_order(reports)?;
    Ok(match config.algorithm {
        MetaAlgorithm::Fomaml => mean,
        MetaAlgorithm::Reptile => AgentParams {
            policy: mean.policy.scale(-1.0),
            value: mean.value.scale(-1.0),
        },
    })
}

/// Plain outer step: FOMAML descends along the mean gradient, Reptile moves
/// toward the mean adapted model by `outer_lr`.
pub fn meta_update(meta: &AgentParams, reports: &[MetaReport], config: &MetaConfig) -> Result<AgentParams> {
    let direction = meta_direction(reports, config)?;
    Ok(AgentParams {
        policy: meta.policy.axpy(-config.outer_lr, &direction.policy)?,
        value: meta.value.axpy(-config.outer_value_lr, &direction.value)?,
    })
}
