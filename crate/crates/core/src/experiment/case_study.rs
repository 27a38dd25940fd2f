use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{Command, RunConfig, TaskKind};
use super::metrics::{converged_reward, epochs_to_fraction, median};
use crate::diffcore::{save_params, ParamSidecar};
use crate::env::ResourcePattern;
use crate::error::{Error, Result};
use crate::meta::{meta_adapt, meta_train, transfer_init, MetaHistory, UniformPatternSampler};
use crate::ppo::{train, AgentParams, AgentSpec, Task, TrainingLog};
use crate::rng::{derive_seed, seeded_rng};

/// Fraction of the converged reward used for the convergence-speed metric.
pub const SPEED_FRACTION: f64 = 0.9;

pub const SUMMARY_HEADER: &str = "seed,method,converged_reward,epochs_to_90,initial_entropy";

/// The three curves of the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Method {
    PpoRandom,
    PpoMl,
    PpoTl,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::PpoRandom, Method::PpoMl, Method::PpoTl];

    pub fn file_stem(self) -> &'static str {
        match self {
            Method::PpoRandom => "ppo_random",
            Method::PpoMl => "ppo_ml",
            Method::PpoTl => "ppo_tl",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::PpoRandom => "PPO-random",
            Method::PpoMl => "PPO-ML",
            Method::PpoTl => "PPO-TL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSummary {
    pub converged_reward: f64,
    pub epochs_to_90: Option<usize>,
    pub initial_entropy: f64,
}

impl CurveSummary {
    pub fn of(log: &TrainingLog) -> Self {
        let rewards = log.rewards();
        Self {
            converged_reward: if rewards.is_empty() { f64::NAN } else { converged_reward(&rewards) },
            epochs_to_90: epochs_to_fraction(&rewards, SPEED_FRACTION),
            initial_entropy: log.rows.first().map_or(f64::NAN, |r| r.policy_entropy),
        }
    }
}

/// Everything one seed of a command produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    /// Training logs keyed by file stem.
    pub logs: BTreeMap<&'static str, TrainingLog>,
    pub meta_history: Option<MetaHistory>,
    /// Final parameters keyed by file stem.
    pub models: BTreeMap<&'static str, AgentParams>,
}

impl SeedRun {
    pub fn log(&self, method: Method) -> Option<&TrainingLog> {
        self.logs.get(method.file_stem())
    }
}

pub struct RunOutcome {
    pub runs: BTreeMap<u64, std::result::Result<SeedRun, String>>,
}

impl RunOutcome {
    pub fn failures(&self) -> Vec<(u64, &str)> {
        self.runs
            .iter()
            .filter_map(|(s, r)| r.as_ref().err().map(|e| (*s, e.as_str())))
            .collect()
    }

    pub fn successes(&self) -> impl Iterator<Item = &SeedRun> {
        self.runs.values().filter_map(|r| r.as_ref().ok())
    }

    /// Per-method summaries of the successful seeds.
    pub fn summaries(&self, method: Method) -> Vec<CurveSummary> {
        self.successes().filter_map(|r| r.log(method)).map(CurveSummary::of).collect()
    }
}

fn task(kind: TaskKind, config: &RunConfig, id: u64, seed: u64) -> Result<Task> {
    let pattern = match kind.pattern(config.env.slots)? {
        Some(p) => p,
        None => ResourcePattern::uniform_random(config.env.slots, &mut seeded_rng(derive_seed(seed, 9))),
    };
    Ok(Task::with_pattern(id, config.env.clone(), pattern))
}

/// Runs one seed of `config.command`.
///
/// Every seed derives independent streams for initialisation, meta-training,
/// the source task and the target task. The three target-task runs share
/// their stream, so the curves differ only through their initialisation.
pub fn run_seed(config: &RunConfig, seed: u64) -> Result<SeedRun> {
    let spec = AgentSpec::for_env(&config.env);
    let init = spec.init(&mut seeded_rng(derive_seed(seed, 1)));
    let target = task(config.task, config, 1, seed)?;
    let target_rng = || seeded_rng(derive_seed(seed, 2));
    let mut run = SeedRun {
        seed,
        ..SeedRun::default()
    };
    let wants = |c: Command| config.command == c || config.command == Command::CaseStudy;

    if wants(Command::TrainScratch) {
        let (model, log) = train(&spec, &init, &target, &config.ppo, config.epochs, &mut target_rng())?;
        let stem = if config.command == Command::CaseStudy { Method::PpoRandom.file_stem() } else { "train_scratch" };
        run.logs.insert(stem, log);
        run.models.insert(stem, model);
    }
    if wants(Command::MetaTrain) || wants(Command::MetaAdapt) {
        let mut sampler = UniformPatternSampler {
            config: config.env.clone(),
        };
        let mut rng = seeded_rng(derive_seed(seed, 3));
        let (meta, history) = meta_train(&spec, &config.meta, &mut sampler, &init, &mut rng)?;
        run.meta_history = Some(history);
        if wants(Command::MetaAdapt) {
            let (model, log) = meta_adapt(&spec, &meta, &target, &config.ppo, config.epochs, &mut target_rng())?;
            let stem = if config.command == Command::CaseStudy { Method::PpoMl.file_stem() } else { "meta_adapt" };
            run.logs.insert(stem, log);
            run.models.insert(stem, model);
        }
        run.models.insert("meta", meta);
    }
    if wants(Command::Transfer) {
        let source_task = task(TaskKind::Task2, config, 2, seed)?;
        let mut rng = seeded_rng(derive_seed(seed, 4));
        let (source, source_log) = train(&spec, &init, &source_task, &config.ppo, config.epochs, &mut rng)?;
        let (model, log) = train(&spec, &transfer_init(&source), &target, &config.ppo, config.epochs, &mut target_rng())?;
        let stem = if config.command == Command::CaseStudy { Method::PpoTl.file_stem() } else { "transfer" };
        run.logs.insert("source_task2", source_log);
        run.logs.insert(stem, log);
        run.models.insert("source_task2", source);
        run.models.insert(stem, model);
    }
    Ok(run)
}

/// Runs every seed of a training command. Seeds are independent and run
/// in parallel; a failing seed is recorded and does not stop the others.
pub fn run_training(config: &RunConfig) -> Result<RunOutcome> {
    if matches!(config.command, Command::Orchestrate | Command::Plot) {
        return Err(Error::Config(format!("{} is not a training command", config.command.name())));
    }
    config.validate().map_err(|p| Error::Config(p.join("; ")))?;
    let results: Vec<(u64, std::result::Result<SeedRun, String>)> = config
        .seeds
        .par_iter()
        .map(|&seed| (seed, run_seed(config, seed).map_err(|e| e.to_string())))
        .collect();
    Ok(RunOutcome {
        runs: results.into_iter().collect(),
    })
}

/// The three-way comparison: PPO-random, PPO-ML and PPO-TL on task 1.
pub fn run_case_study(config: &RunConfig) -> Result<RunOutcome> {
    let config = RunConfig {
        command: Command::CaseStudy,
        task: TaskKind::Task1,
        ..config.clone()
    };
    run_training(&config)
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Per-seed rows plus a `median` row per method.
pub fn summary_csv(outcome: &RunOutcome) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    let mut per_method: BTreeMap<&str, Vec<CurveSummary>> = BTreeMap::new();
    for run in outcome.successes() {
        for (stem, log) in &run.logs {
            let s = CurveSummary::of(log);
            let _ = writeln!(
                out,
                "{},{stem},{},{},{}",
                run.seed,
                s.converged_reward,
                fmt_opt(s.epochs_to_90),
                s.initial_entropy
            );
            per_method.entry(stem).or_default().push(s);
        }
    }
    for (stem, rows) in &per_method {
        let conv: Vec<f64> = rows.iter().map(|s| s.converged_reward).collect();
        let speed: Vec<f64> = rows.iter().filter_map(|s| s.epochs_to_90).map(|e| e as f64).collect();
        let ent: Vec<f64> = rows.iter().map(|s| s.initial_entropy).collect();
        let speed = if speed.len() == rows.len() {
            median(&speed).to_string()
        } else {
            "NA".to_string()
        };
        let _ = writeln!(out, "median,{stem},{},{speed},{}", median(&conv), median(&ent));
    }
    out
}

/// Writes per-seed CSVs and models, the summary and the run metadata.
pub fn write_outputs(config: &RunConfig, outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let spec = AgentSpec::for_env(&config.env);
    for run in outcome.successes() {
        let seed_dir = dir.join(format!("seed_{}", run.seed));
        fs::create_dir_all(&seed_dir)?;
        for (stem, log) in &run.logs {
            log.write_csv(&seed_dir.join(format!("{stem}.csv")))?;
        }
        if let Some(h) = &run.meta_history {
            h.write_csv(&seed_dir.join("meta_history.csv"))?;
        }
        for (stem, params) in &run.models {
            let sidecar = ParamSidecar {
                spec: spec.describe(),
                created_at: format!("seed:{}", run.seed),
                tag: stem.to_string(),
            };
            save_params(&seed_dir.join(format!("{stem}.params")), &params.flatten(), &sidecar)?;
        }
    }
    fs::write(dir.join("summary.csv"), summary_csv(outcome))?;
    let failures: BTreeMap<String, &str> = outcome
        .failures()
        .into_iter()
        .map(|(s, e)| (s.to_string(), e))
        .collect();
    let metadata = json!({
        "crate_version": env!("CARGO_PKG_VERSION"),
        "command": config.command.name(),
        "meta_algorithm": config.meta.algorithm.name(),
        "first_order": true,
        "seeds": config.seeds,
        "agent": spec.describe(),
        "config": config,
        "failed_seeds": failures,
    });
    fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&metadata)? + "\n")?;
    Ok(())
}
