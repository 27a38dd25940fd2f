use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::agent::{AgentParams, AgentSpec};
use super::rollout::{collect_batch, Task};
use super::update::{ppo_update_with_state, PpoConfig, TrainerState};
use crate::error::{Error, Result};
use crate::rng::SimRng;

pub const TRAINING_LOG_HEADER: &str = "epoch,mean_total_reward,policy_entropy,value_loss,surrogate_loss";

/// One row of the training log.
///
/// `policy_entropy` belongs to the policy that collected the epoch's episodes,
/// so row 0 describes the initial model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_total_reward: f64,
    pub policy_entropy: f64,
    pub value_loss: f64,
    pub surrogate_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<EpochRecord>,
    pub failed_updates: usize,
    /// Total reward of every episode, per epoch. Not part of the CSV.
    pub episode_rewards: Vec<Vec<f64>>,
}

impl TrainingLog {
    pub fn rewards(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_total_reward).collect()
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.policy_entropy).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAINING_LOG_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch, r.mean_total_reward, r.policy_entropy, r.value_loss, r.surrogate_loss
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn parse_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty training log")?;
        if header.trim() != TRAINING_LOG_HEADER {
            return Err(format!("unexpected header {header:?}"));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(format!("row {} has {} fields", i + 1, f.len()));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1));
            rows.push(EpochRecord {
                epoch: f[0].parse().map_err(|e| format!("row {}: {e}", i + 1))?,
                mean_total_reward: num(f[1])?,
                policy_entropy: num(f[2])?,
                value_loss: num(f[3])?,
                surrogate_loss: num(f[4])?,
            });
        }
        Ok(Self {
            rows,
            ..Self::default()
        })
    }
}

/// Standard PPO training on one task starting from `init`.
///
/// Used both for training from scratch and for adaptation from a meta or
/// transferred model; only the initialisation differs.
pub fn train(
    spec: &AgentSpec,
    init: &AgentParams,
    task: &Task,
    config: &PpoConfig,
    epochs: usize,
    rng: &mut SimRng,
) -> Result<(AgentParams, TrainingLog)> {
    config.validate()?;
    spec.check(init)?;
    let mut agent = init.clone();
    let mut log = TrainingLog::default();
    let mut state = TrainerState::new(spec, config.optimizer);
    for epoch in 0..epochs {
        let entropy = spec.entropy(&agent);
        let batch = collect_batch(task, spec, &agent, config.episodes_per_epoch, rng)?;
        let totals: Vec<f64> = batch.iter().map(|t| t.total_reward()).collect();
        let mean_total_reward = totals.iter().sum::<f64>() / totals.len() as f64;
        log.episode_rewards.push(totals);
        let (value_loss, surrogate_loss) = match ppo_update_with_state(spec, &agent, &batch, config, &mut state) {
            Ok((next, stats)) => {
                agent = next;
                (stats.value_loss, stats.surrogate_loss)
            }
            Err(Error::NonFinite(what)) => {
                log::warn!("epoch {epoch}: skipped update, non-finite {what}");
                log.failed_updates += 1;
                (f64::NAN, f64::NAN)
            }
            Err(e) => return Err(e),
        };
        log.rows.push(EpochRecord {
            epoch,
            mean_total_reward,
            policy_entropy: entropy,
            value_loss,
            surrogate_loss,
        });
    }
    Ok((agent, log))
}

/// Mean total reward per episode of the stochastic policy, without learning.
pub fn evaluate_policy(
    task: &Task,
    spec: &AgentSpec,
    agent: &AgentParams,
    n_episodes: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    if n_episodes == 0 {
        return Ok(0.0);
    }
    let batch = collect_batch(task, spec, agent, n_episodes, rng)?;
    Ok(batch.iter().map(|t| t.total_reward()).sum::<f64>() / n_episodes as f64)
}
