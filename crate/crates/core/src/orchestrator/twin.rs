use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::cache::LfuCache;
use super::events::{edge_actor, EventLog, CLOUD};
use crate::env::{Action, ResourcePattern};
use crate::error::{Error, Result};
use crate::experiment::median;
use crate::meta::{meta_adapt, meta_train_observed, MetaConfig, MetaHistory, PoolSampler};
use crate::ppo::{collect_episode, AgentParams, AgentSpec, PpoConfig, Provenance, Task, TaskDynamics};
use crate::registry::{AttributeVector, CategoryPath, MetaModel, Registry};
use crate::rng::{derive_seed, next_seed, seeded_rng, SimRng};

/// Episodes run to estimate a PLVN's attributes.
pub const PROBE_EPISODES: usize = 10;

/// Share of the final adaptation epochs whose episodes set the baseline.
pub const BASELINE_TAIL: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrainPolicy {
    /// Episodes per monitoring window.
    pub window: usize,
    /// Relative reward drop that counts as degradation.
    pub eta: f64,
    /// Iterations per window for the cloud-side drift alarm.
    pub drift_window: usize,
}

impl Default for RetrainPolicy {
    fn default() -> Self {
        Self {
            window: 20,
            eta: 0.2,
            drift_window: 10,
        }
    }
}

impl RetrainPolicy {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.window < 2 {
            problems.push(format!("retrain window must be at least 2, got {}", self.window));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            problems.push(format!("retrain eta must lie in (0,1), got {}", self.eta));
        }
        if self.drift_window == 0 {
            problems.push("drift_window must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Reward level below which a window counts as degraded:
    /// `baseline - eta * |baseline|`.
    pub fn threshold(&self, baseline: f64) -> f64 {
        baseline - self.eta * baseline.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrainTrigger {
    Degradation,
    CategoryChange,
    DriftAlarm,
}

impl RetrainTrigger {
    pub fn name(self) -> &'static str {
        match self {
            RetrainTrigger::Degradation => "degradation",
            RetrainTrigger::CategoryChange => "category-change",
            RetrainTrigger::DriftAlarm => "drift-alarm",
        }
    }
}

/// Individual model currently serving one INMF on an edge.
#[derive(Debug, Clone, PartialEq)]
pub struct DeployedModel {
    pub params: AgentParams,
    /// Category of the meta model it was adapted from.
    pub source: CategoryPath,
    /// Length of the source node's loss history when fetched.
    pub source_history: usize,
    pub baseline: f64,
    pub version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub reward: f64,
    pub model_version: u64,
}

pub const EPISODE_LOG_HEADER: &str = "episode,reward,model_version";

/// Edge twin of one PLVN: its emulator, meta-model cache and deployed models.
#[derive(Debug, Clone)]
pub struct EdgeDt {
    pub plvn_id: u64,
    /// The PLVN emulator.
    pub task: Task,
    /// Attributes that cannot be measured, e.g. city or road type.
    pub static_attributes: AttributeVector,
    pub attributes: AttributeVector,
    pub category: CategoryPath,
    cache: LfuCache<CategoryPath, (CategoryPath, MetaModel)>,
    models: BTreeMap<String, DeployedModel>,
    window: Vec<f64>,
    episodes: Vec<EpisodeRecord>,
    versions: u64,
    rng: SimRng,
}

impl EdgeDt {
    pub fn new(plvn_id: u64, task: Task, cache_capacity: usize, seed: u64) -> Self {
        Self {
            plvn_id,
            task,
            static_attributes: AttributeVector::new(),
            attributes: AttributeVector::new(),
            category: CategoryPath::root(),
            cache: LfuCache::new(cache_capacity),
            models: BTreeMap::new(),
            window: Vec::new(),
            episodes: Vec::new(),
            versions: 0,
            rng: seeded_rng(seed),
        }
    }

    pub fn cache(&self) -> &LfuCache<CategoryPath, (CategoryPath, MetaModel)> {
        &self.cache
    }

    pub fn model(&self, inmf: &str) -> Option<&DeployedModel> {
        self.models.get(inmf)
    }

    pub fn model_count(&self, inmf: &str) -> usize {
        usize::from(self.models.contains_key(inmf))
    }

    pub fn episodes(&self) -> &[EpisodeRecord] {
        &self.episodes
    }

    /// Replaces the PLVN's resource pattern (a change in the physical network).
    pub fn set_pattern(&mut self, pattern: ResourcePattern) {
        self.task.dynamics = TaskDynamics::Pattern(pattern);
    }

    /// Mean resource, workload and distance over a short all-SP probe, plus
    /// the static attributes.
    pub fn probe_attributes(&mut self) -> Result<AttributeVector> {
        let n = self.task.config.n_pairs;
        let (mut w, mut load, mut dist, mut count) = (0.0, 0.0, 0.0, 0usize);
        for _ in 0..PROBE_EPISODES {
            let mut env = self.task.make_env(next_seed(&mut self.rng))?;
            while !env.is_done() {
                let s = env.state();
                w += s.resource_mhz;
                load += s.workloads.iter().map(|&x| f64::from(x)).sum::<f64>() / n as f64;
                dist += s.distances.iter().sum::<f64>() / n as f64;
                count += 1;
                env.step(&Action::all_sp(n))?;
            }
        }
        let c = count.max(1) as f64;
        let mut attrs = self.static_attributes.clone();
        attrs.set("avg_resources", w / c);
        attrs.set("avg_workload", load / c);
        attrs.set("avg_distance", dist / c);
        self.attributes = attrs.clone();
        Ok(attrs)
    }

    pub fn episodes_csv(&self) -> String {
        let mut out = String::from(EPISODE_LOG_HEADER);
        out.push('\n');
        for e in &self.episodes {
            let _ = writeln!(out, "{},{},{}", e.episode, e.reward, e.model_version);
        }
        out
    }

    fn deploy(&mut self, inmf: &str, mut model: DeployedModel, log: &mut EventLog) {
        self.versions += 1;
        model.version = self.versions;
        let actor = edge_actor(self.plvn_id);
        log.push(
            actor.clone(),
            "deploy",
            json!({"inmf": inmf, "version": model.version, "source": model.source.to_string(), "baseline": model.baseline}),
        );
        if let Some(old) = self.models.insert(inmf.to_string(), model) {
            log.push(actor, "delete", json!({"inmf": inmf, "version": old.version}));
        }
        self.window.clear();
    }
}

/// Cloud twin: the registry plus bookkeeping of edge registrations.
#[derive(Debug, Clone)]
pub struct CloudDt {
    pub registry: Registry,
    pub fetches: u64,
    snapshot_clock: u64,
}

impl CloudDt {
    pub fn new(registry: Registry) -> Self {
        Self {
            registry,
            fetches: 0,
            snapshot_clock: 0,
        }
    }

    /// Registers the schema-relevant part of `attrs`.
    pub fn register(&mut self, plvn_id: u64, attrs: &AttributeVector, log: &mut EventLog) -> Result<CategoryPath> {
        let mut relevant = AttributeVector::new();
        for def in self.registry.schema().attributes() {
            if let Some(v) = attrs.values.get(&def.name) {
                relevant.values.insert(def.name.clone(), v.clone());
            }
        }
        let path = self.registry.register_plvn(plvn_id, &relevant)?;
        log.push(CLOUD, "register", json!({"plvn": plvn_id, "category": path.to_string()}));
        Ok(path)
    }

    /// Least-general meta model for `path`, counted as one fetch.
    pub fn fetch(&mut self, plvn_id: u64, path: &CategoryPath, inmf: &str, log: &mut EventLog) -> Result<(CategoryPath, MetaModel, usize)> {
        let (matched, model) = self.registry.match_path(path, inmf)?;
        let (matched, model) = (matched, model.clone());
        let history = self.registry.node(&matched).map_or(0, |n| n.loss_history.len());
        self.fetches += 1;
        log.push(
            CLOUD,
            "fetch",
            json!({"plvn": plvn_id, "inmf": inmf, "requested": path.to_string(), "matched": matched.to_string()}),
        );
        Ok((matched, model, history))
    }
}

/// Meta-trains the model of `category` over the PLVNs registered under it
/// and installs it at the node.
///
/// Each iteration samples PLVNs uniformly from the node's list; their edge
/// twins supply the emulators. Training starts from the node's current model,
/// else its least-general ancestor's, else a fresh initialisation. After each
/// iteration the node's loss history and fraction snapshot are extended.
#[allow(clippy::too_many_arguments)]
pub fn offline_planning(
    cloud: &mut CloudDt,
    edges: &BTreeMap<u64, EdgeDt>,
    category: &CategoryPath,
    inmf: &str,
    spec: &AgentSpec,
    config: &MetaConfig,
    rng: &mut SimRng,
    log: &mut EventLog,
) -> Result<MetaHistory> {
    cloud.registry.schema().check_path(category)?;
    let node = cloud
        .registry
        .node(category)
        .ok_or_else(|| Error::EmptyCategory(category.to_string()))?;
    if node.plvn_ids.is_empty() {
        return Err(Error::EmptyCategory(category.to_string()));
    }
    let ids: Vec<u64> = node.plvn_ids.iter().copied().collect();
    let pool = ids
        .iter()
        .map(|id| {
            edges
                .get(id)
                .map(|e| e.task.clone())
                .ok_or_else(|| Error::Config(format!("PLVN {id} has no edge twin")))
        })
        .collect::<Result<Vec<Task>>>()?;
    let init = match cloud.registry.match_path(category, inmf) {
        Ok((_, m)) => m.params.clone(),
        Err(Error::NoSuperModel(_)) => spec.init(rng),
        Err(e) => return Err(e),
    };
    log.push(
        CLOUD,
        "dispatch",
        json!({"category": category.to_string(), "inmf": inmf, "plvns": ids, "iterations": config.iterations}),
    );
    let mut sampler = PoolSampler::new(pool)?;
    let registry = &mut cloud.registry;
    let clock = &mut cloud.snapshot_clock;
    let mut observed: Result<()> = Ok(());
    let (meta, history) = meta_train_observed(spec, config, &mut sampler, &init, rng, &mut |record, _| {
        if observed.is_ok() {
            observed = registry
                .record_loss(category, record.mean_adaptation_loss)
                .and_then(|_| registry.record_fraction_snapshot(category, *clock).map(|_| ()));
            *clock += 1;
        }
    })?;
    observed?;
    let sampled: Vec<u64> = sampler.draws.iter().map(|&i| ids[i]).collect();
    cloud.registry.install_model(
        category,
        inmf,
        MetaModel {
            spec: spec.clone(),
            params: meta,
        },
    )?;
    log.push(
        CLOUD,
        "install",
        json!({
            "category": category.to_string(),
            "inmf": inmf,
            "iterations": history.rows.len(),
            "final_loss": history.rows.last().map(|r| r.mean_adaptation_loss),
            "sampled_plvns": sampled,
        }),
    );
    Ok(history)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttachReport {
    pub category: CategoryPath,
    pub matched: CategoryPath,
    pub cache_hit: bool,
    pub log: crate::ppo::TrainingLog,
}

fn obtain_meta(
    cloud: &mut CloudDt,
    edge: &mut EdgeDt,
    inmf: &str,
    refresh: bool,
    log: &mut EventLog,
) -> Result<(CategoryPath, MetaModel, usize, bool)> {
    let path = edge.category.clone();
    if !refresh {
        if let Some((matched, model)) = edge.cache.get(&path).cloned() {
            log.push(
                edge_actor(edge.plvn_id),
                "cache_hit",
                json!({"category": path.to_string(), "matched": matched.to_string()}),
            );
            let history = cloud.registry.node(&matched).map_or(0, |n| n.loss_history.len());
            return Ok((matched, model, history, true));
        }
    }
    let (matched, model, history) = cloud.fetch(edge.plvn_id, &path, inmf, log)?;
    if let Some((evicted, _)) = edge.cache.insert(path.clone(), (matched.clone(), model.clone())) {
        log.push(edge_actor(edge.plvn_id), "evict", json!({"category": evicted.to_string()}));
    }
    Ok((matched, model, history, false))
}

/// Median total reward over every episode of the final [`BASELINE_TAIL`]
/// share of adaptation epochs; NaN without epochs.
pub fn baseline_reward(training: &crate::ppo::TrainingLog) -> f64 {
    let epochs = &training.episode_rewards;
    if epochs.is_empty() {
        return f64::NAN;
    }
    let tail = ((epochs.len() as f64 * BASELINE_TAIL).ceil() as usize).clamp(1, epochs.len());
    let episodes: Vec<f64> = epochs[epochs.len() - tail..].iter().flatten().copied().collect();
    median(&episodes)
}

fn adapt_and_deploy(
    edge: &mut EdgeDt,
    inmf: &str,
    spec: &AgentSpec,
    ppo: &PpoConfig,
    budget_epochs: usize,
    source: (CategoryPath, MetaModel, usize),
    log: &mut EventLog,
) -> Result<crate::ppo::TrainingLog> {
    let (matched, model, source_history) = source;
    let (params, training) = meta_adapt(spec, &model.params, &edge.task, ppo, budget_epochs, &mut edge.rng)?;
    let baseline = baseline_reward(&training);
    log.push(
        edge_actor(edge.plvn_id),
        "adapt",
        json!({"inmf": inmf, "source": matched.to_string(), "epochs": budget_epochs, "baseline": baseline}),
    );
    edge.deploy(
        inmf,
        DeployedModel {
            params,
            source: matched,
            source_history,
            baseline,
            version: 0,
        },
        log,
    );
    Ok(training)
}

/// Probes the PLVN, registers it, obtains the least-general meta model
/// (cache first) and deploys an individual model adapted from it.
#[allow(clippy::too_many_arguments)]
pub fn online_attach(
    cloud: &mut CloudDt,
    edge: &mut EdgeDt,
    inmf: &str,
    spec: &AgentSpec,
    ppo: &PpoConfig,
    budget_epochs: usize,
    log: &mut EventLog,
) -> Result<AttachReport> {
    let attrs = edge.probe_attributes()?;
    edge.category = cloud.register(edge.plvn_id, &attrs, log)?;
    let (matched, model, history, cache_hit) = obtain_meta(cloud, edge, inmf, false, log)?;
    let training = adapt_and_deploy(edge, inmf, spec, ppo, budget_epochs, (matched.clone(), model, history), log)?;
    Ok(AttachReport {
        category: edge.category.clone(),
        matched,
        cache_hit,
        log: training,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainEvent {
    /// Index of the monitored episode that closed the window.
    pub episode: u64,
    pub trigger: RetrainTrigger,
    pub window_median: f64,
    pub baseline: f64,
}

/// Runs `episodes` inference episodes with the deployed model and retrains
/// when a window shows degradation or the cloud flags drift on the source node.
///
/// `on_episode` is called before each episode with the edge's episode count,
/// so callers can script changes to the physical network.
#[allow(clippy::too_many_arguments)]
pub fn monitor_and_retrain(
    cloud: &mut CloudDt,
    edge: &mut EdgeDt,
    inmf: &str,
    spec: &AgentSpec,
    ppo: &PpoConfig,
    policy: &RetrainPolicy,
    budget_epochs: usize,
    episodes: usize,
    log: &mut EventLog,
    on_episode: &mut dyn FnMut(&mut EdgeDt, u64, &mut EventLog),
) -> Result<Vec<RetrainEvent>> {
    policy.validate()?;
    if edge.model(inmf).is_none() {
        return Err(Error::Config(format!("PLVN {} has no deployed {inmf} model", edge.plvn_id)));
    }
    let mut retrains = Vec::new();
    for _ in 0..episodes {
        let episode = edge.episodes.len() as u64;
        on_episode(edge, episode, log);
        let deployed = edge.models[inmf].clone();
        let seed = next_seed(&mut edge.rng);
        let mut env = edge.task.make_env(derive_seed(seed, 0))?;
        let mut policy_rng = seeded_rng(derive_seed(seed, 1));
        let mut traj = collect_episode(&mut env, spec, &deployed.params, &mut policy_rng)?;
        traj.provenance = Provenance::Measured;
        let reward = traj.total_reward();
        edge.episodes.push(EpisodeRecord {
            episode,
            reward,
            model_version: deployed.version,
        });
        edge.window.push(reward);
        if edge.window.len() < policy.window {
            continue;
        }
        let window_median = median(&edge.window);
        edge.window.clear();
        let degraded = window_median < policy.threshold(deployed.baseline);
        let trigger = if degraded {
            let attrs = edge.probe_attributes()?;
            let path = cloud.register(edge.plvn_id, &attrs, log)?;
            if path != edge.category {
                edge.category = path;
                Some(RetrainTrigger::CategoryChange)
            } else {
                Some(RetrainTrigger::Degradation)
            }
        } else {
            let grown = cloud
                .registry
                .node(&deployed.source)
                .is_some_and(|n| n.loss_history.len() > deployed.source_history);
            let alarm = grown
                && cloud
                    .registry
                    .drift_alarm(&deployed.source, policy.drift_window)
                    .is_ok_and(|r| r.alarm());
            alarm.then_some(RetrainTrigger::DriftAlarm)
        };
        let Some(trigger) = trigger else { continue };
        log.push(
            edge_actor(edge.plvn_id),
            "retrain",
            json!({
                "inmf": inmf,
                "trigger": trigger.name(),
                "episode": episode,
                "window_median": window_median,
                "baseline": deployed.baseline,
            }),
        );
        let refresh = trigger == RetrainTrigger::DriftAlarm;
        let (matched, model, history, _) = obtain_meta(cloud, edge, inmf, refresh, log)?;
        adapt_and_deploy(edge, inmf, spec, ppo, budget_epochs, (matched, model, history), log)?;
        retrains.push(RetrainEvent {
            episode,
            trigger,
            window_median,
            baseline: deployed.baseline,
        });
    }
    Ok(retrains)
}
