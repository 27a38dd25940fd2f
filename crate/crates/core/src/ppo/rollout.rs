use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::agent::{sample_action, AgentParams, AgentSpec};
use crate::env::{Action, Env, EnvConfig, NetworkState, ResourcePattern};
use crate::error::Result;
use crate::rng::{derive_seed, next_seed, seeded_rng, SimRng};

/// How a task's episodes evolve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TaskDynamics {
    /// Stochastic network following a resource pattern.
    Pattern(ResourcePattern),
    /// One state repeated every slot (a contextual bandit).
    Frozen(NetworkState),
}

/// One individual learning task: a network environment family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: u64,
    pub config: EnvConfig,
    pub dynamics: TaskDynamics,
}

impl Task {
    pub fn with_pattern(id: u64, config: EnvConfig, pattern: ResourcePattern) -> Self {
        Self {
            id,
            config,
            dynamics: TaskDynamics::Pattern(pattern),
        }
    }

    pub fn frozen(id: u64, config: EnvConfig, state: NetworkState) -> Self {
        Self {
            id,
            config,
            dynamics: TaskDynamics::Frozen(state),
        }
    }

    pub fn make_env(&self, seed: u64) -> Result<Env> {
        match &self.dynamics {
            TaskDynamics::Pattern(p) => Env::new(self.config.clone(), p.clone(), seed),
            TaskDynamics::Frozen(s) => Env::frozen(self.config.clone(), s.clone()),
        }
    }
}

/// Whether a trajectory came from the twin's emulator or the physical network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Emulated,
    Measured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: NetworkState,
    pub features: Vec<f64>,
    pub raw_action: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.value).collect()
    }

    /// Rows for the trajectory CSV dump.
    pub fn csv_rows(&self) -> Vec<(NetworkState, Action, f64)> {
        self.steps
            .iter()
            .map(|s| (s.state.clone(), s.action.clone(), s.reward))
            .collect()
    }
}

/// Runs one full episode from the environment's current (freshly reset) state.
pub fn collect_episode(
    env: &mut Env,
    spec: &AgentSpec,
    params: &AgentParams,
    rng: &mut SimRng,
) -> Result<Trajectory> {
    let config = env.config().clone();
    let mut steps = Vec::with_capacity(config.slots);
    while !env.is_done() {
        let state = env.state().clone();
        let features = state.features(&config);
        let sampled = sample_action(spec, params, &features, rng)?;
        let value = spec.value(params, &features)?;
        let outcome = env.step(&sampled.action)?;
        steps.push(Transition {
            state,
            features,
            raw_action: sampled.raw,
            action: sampled.action,
            reward: outcome.reward,
            log_prob: sampled.log_prob,
            value,
        });
    }
    Ok(Trajectory {
        steps,
        provenance: Provenance::Emulated,
    })
}

/// Collects `episodes` independent episodes.
///
/// Per-episode seeds are drawn sequentially from `rng` before the parallel
/// section, so the batch does not depend on thread scheduling.
pub fn collect_batch(
    task: &Task,
    spec: &AgentSpec,
    params: &AgentParams,
    episodes: usize,
    rng: &mut SimRng,
) -> Result<Vec<Trajectory>> {
    let seeds: Vec<u64> = (0..episodes).map(|_| next_seed(rng)).collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let mut env = task.make_env(derive_seed(seed, 0))?;
            let mut policy_rng = seeded_rng(derive_seed(seed, 1));
            collect_episode(&mut env, spec, params, &mut policy_rng)
        })
        .collect()
}

/// Generalised advantage estimates and value targets for one episode.
///
/// The episode is treated as terminating: the value after the last slot is 0.
pub fn compute_gae(traj: &Trajectory, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    gae(&traj.rewards(), &traj.values(), gamma, lambda)
}

pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}
