use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{MetaAlgorithm, MetaConfig};
use super::protocol::{adaptation_loss_gradient, inner_adapt, meta_direction, reptile_delta, MetaReport};
use super::sampler::TaskSampler;
use crate::error::{Error, Result};
use crate::ppo::{train, AgentParams, AgentSpec, PpoConfig, Task, TrainerState, TrainingLog};
use crate::rng::{next_seed, seeded_rng, SimRng};

pub const META_HISTORY_HEADER: &str = "iteration,mean_adaptation_loss,n_failed";

/// Consecutive all-failed iterations after which meta-training aborts.
const MAX_DEAD_ITERATIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaIterationRecord {
    pub iteration: usize,
    /// NaN when every task failed.
    pub mean_adaptation_loss: f64,
    pub n_failed: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetaHistory {
    pub rows: Vec<MetaIterationRecord>,
}

impl MetaHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_adaptation_loss).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(META_HISTORY_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.iteration, r.mean_adaptation_loss, r.n_failed);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn run_task(
    spec: &AgentSpec,
    meta: &AgentParams,
    task: &Task,
    config: &MetaConfig,
    seed: u64,
) -> Result<MetaReport> {
    let mut rng = seeded_rng(seed);
    let inner = inner_adapt(spec, meta, task, config, &mut rng)?;
    match config.algorithm {
        MetaAlgorithm::Fomaml => adaptation_loss_gradient(spec, &inner.adapted, task, config, &mut rng),
        MetaAlgorithm::Reptile => reptile_delta(task.id, meta, &inner.adapted, inner.inner_loss),
    }
}

/// Meta-training from `init`; see [`meta_train_observed`].
pub fn meta_train(
    spec: &AgentSpec,
    config: &MetaConfig,
    sampler: &mut dyn TaskSampler,
    init: &AgentParams,
    rng: &mut SimRng,
) -> Result<(AgentParams, MetaHistory)> {
    meta_train_observed(spec, config, sampler, init, rng, &mut |_, _| {})
}

/// Runs `config.iterations` rounds of sample, adapt, report and update.
///
/// Tasks of one iteration run in parallel with seeds drawn up front. The
/// outer step follows `config.outer_optimizer`; with `Sgd` it is
/// [`meta_update`](super::meta_update) followed by the log-std clamp. Tasks
/// whose losses or parameters go non-finite are dropped from the average;
/// an iteration where all of them fail leaves the meta model untouched, and
/// three such iterations in a row abort the run. `observer` sees every
/// iteration record together with the meta model after the update.
pub fn meta_train_observed(
    spec: &AgentSpec,
    config: &MetaConfig,
    sampler: &mut dyn TaskSampler,
    init: &AgentParams,
    rng: &mut SimRng,
    observer: &mut dyn FnMut(&MetaIterationRecord, &AgentParams),
) -> Result<(AgentParams, MetaHistory)> {
    config.validate()?;
    spec.check(init)?;
    let mut meta = init.clone();
    let mut history = MetaHistory::default();
    let mut dead = 0;
    let mut outer = TrainerState::new(spec, config.outer_optimizer);
    let per_iter = config.tasks_per_iteration;
    for iteration in 0..config.iterations {
        let mut jobs = Vec::with_capacity(per_iter);
        for i in 0..per_iter {
            let task = sampler.sample((iteration * per_iter + i) as u64, rng)?;
            jobs.push((task, next_seed(rng)));
        }
        let outcomes: Vec<Result<MetaReport>> = jobs
            .par_iter()
            .map(|(task, seed)| run_task(spec, &meta, task, config, *seed))
            .collect();
        let mut reports = Vec::with_capacity(per_iter);
        let mut n_failed = 0;
        for ((task, _), outcome) in jobs.iter().zip(outcomes) {
            match outcome {
                Ok(r) if r.adaptation_loss.is_finite() && r.payload.params().is_finite() => reports.push(r),
                Ok(_) | Err(Error::NonFinite(_)) => {
                    log::warn!("meta iteration {iteration}: task {} failed, excluded", task.id);
                    n_failed += 1;
                }
                Err(e) => return Err(e),
            }
        }
        let mean_adaptation_loss = if reports.is_empty() {
            dead += 1;
            if dead >= MAX_DEAD_ITERATIONS {
                log::error!("meta-training aborted at iteration {iteration}: {dead} iterations with no usable task");
                return Err(Error::AllTasksFailed(per_iter));
            }
            f64::NAN
        } else {
            dead = 0;
            let direction = meta_direction(&reports, config)?;
            outer.apply(spec, &mut meta, config.outer_lr, config.outer_value_lr, &direction)?;
            let mut sorted: Vec<&MetaReport> = reports.iter().collect();
            sorted.sort_by_key(|r| r.task_id);
            sorted.iter().map(|r| r.adaptation_loss).sum::<f64>() / sorted.len() as f64
        };
        let record = MetaIterationRecord {
            iteration,
            mean_adaptation_loss,
            n_failed,
        };
        observer(&record, &meta);
        history.rows.push(record);
    }
    Ok((meta, history))
}

/// PPO training on `task` starting from a meta model.
pub fn meta_adapt(
    spec: &AgentSpec,
    meta: &AgentParams,
    task: &Task,
    ppo: &PpoConfig,
    budget_epochs: usize,
    rng: &mut SimRng,
) -> Result<(AgentParams, TrainingLog)> {
    train(spec, meta, task, ppo, budget_epochs, rng)
}

/// Transfer-learning initialisation: the source task's trained agent as is.
pub fn transfer_init(source: &AgentParams) -> AgentParams {
    source.clone()
}
