use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::env::{EnvConfig, ResourcePattern};
use crate::error::{Error, Result};
use crate::meta::{MetaAlgorithm, MetaConfig};
use crate::orchestrator::RetrainPolicy;
use crate::ppo::{Optimizer, PpoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    TrainScratch,
    MetaTrain,
    MetaAdapt,
    Transfer,
    CaseStudy,
    Orchestrate,
    Plot,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::TrainScratch,
        Command::MetaTrain,
        Command::MetaAdapt,
        Command::Transfer,
        Command::CaseStudy,
        Command::Orchestrate,
        Command::Plot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::TrainScratch => "train-scratch",
            Command::MetaTrain => "meta-train",
            Command::MetaAdapt => "meta-adapt",
            Command::Transfer => "transfer",
            Command::CaseStudy => "case-study",
            Command::Orchestrate => "orchestrate",
            Command::Plot => "plot",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
                Error::Config(format!("unknown command {s:?}, expected one of {names:?}"))
            })
    }
}

/// Resource process of a training task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Constant 5 MHz mean.
    Task1,
    /// Constant 7 MHz mean.
    Task2,
    /// Per-slot mean drawn uniformly from the resource levels.
    Random,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Task1 => "task1",
            TaskKind::Task2 => "task2",
            TaskKind::Random => "random",
        }
    }

    /// Fixed pattern of the task; `None` for the random family.
    pub fn pattern(self, slots: usize) -> Result<Option<ResourcePattern>> {
        match self {
            TaskKind::Task1 => ResourcePattern::constant(5.0, slots).map(Some),
            TaskKind::Task2 => ResourcePattern::constant(7.0, slots).map(Some),
            TaskKind::Random => Ok(None),
        }
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "task1" => Ok(TaskKind::Task1),
            "task2" => Ok(TaskKind::Task2),
            "random" => Ok(TaskKind::Random),
            other => Err(Error::Config(format!("unknown task {other:?}, expected task1, task2 or random"))),
        }
    }
}

/// Run length presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 150 epochs, 150 meta iterations.
    Desk,
    /// 500 epochs, 500 meta iterations.
    Paper,
}

impl Profile {
    pub fn epochs(self) -> usize {
        match self {
            Profile::Desk => 150,
            Profile::Paper => 500,
        }
    }

    pub fn meta_iterations(self) -> usize {
        match self {
            Profile::Desk => 150,
            Profile::Paper => 500,
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile {other:?}, expected desk or paper"))),
        }
    }
}

/// Fully resolved configuration of one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub profile: Profile,
    pub task: TaskKind,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Scenario script for `orchestrate`.
    pub scenario: Option<PathBuf>,
    /// Training-log CSVs for `plot`, one series each.
    pub inputs: Vec<PathBuf>,
    /// Series labels for `plot`; file stems when empty.
    pub labels: Vec<String>,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub meta: MetaConfig,
    pub retrain: RetrainPolicy,
}

impl RunConfig {
    pub fn new(profile: Profile) -> Self {
        Self {
            command: Command::CaseStudy,
            profile,
            task: TaskKind::Task1,
            epochs: profile.epochs(),
            seeds: vec![0, 1, 2, 3, 4],
            out: PathBuf::from("out"),
            scenario: None,
            inputs: Vec::new(),
            labels: Vec::new(),
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            meta: MetaConfig {
                iterations: profile.meta_iterations(),
                ..MetaConfig::default()
            },
            retrain: RetrainPolicy::default(),
        }
    }

    /// Checks ranges across all sections; every problem is reported.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut problems = Vec::new();
        if self.epochs == 0 {
            problems.push("epochs must be at least 1".to_string());
        }
        if self.seeds.is_empty() {
            problems.push("seeds must not be empty".to_string());
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                problems.push(format!("seed {s} listed twice"));
            }
        }
        if self.command == Command::Orchestrate && self.scenario.is_none() {
            problems.push("orchestrate needs a scenario script".to_string());
        }
        if self.command == Command::Plot && self.inputs.is_empty() {
            problems.push("plot needs at least one input CSV".to_string());
        }
        if !self.labels.is_empty() && self.labels.len() != self.inputs.len() {
            problems.push(format!("{} labels for {} inputs", self.labels.len(), self.inputs.len()));
        }
        let sections: [Result<()>; 4] = [
            self.env.validate(),
            self.ppo.validate(),
            self.meta.validate(),
            self.retrain.validate(),
        ];
        for r in sections {
            if let Err(Error::Config(msg)) = r {
                problems.extend(msg.split("; ").map(str::to_string));
            } else if let Err(e) = r {
                problems.push(e.to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

const RUN_KEYS: [&str; 9] = [
    "command", "profile", "task", "epochs", "seeds", "out", "scenario", "inputs", "labels",
];
const META_PREFIX: &str = "meta_";
const RETRAIN_PREFIX: &str = "retrain_";

fn section_keys<T: Serialize>(value: &T) -> Vec<String> {
    match serde_json::to_value(value) {
        Ok(Value::Object(map)) => map.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

/// Every key accepted in a config file.
pub fn known_keys() -> Vec<String> {
    let defaults = RunConfig::new(Profile::Desk);
    let mut keys: Vec<String> = RUN_KEYS.iter().map(|k| k.to_string()).collect();
    keys.extend(section_keys(&defaults.env));
    keys.extend(section_keys(&defaults.ppo));
    keys.extend(section_keys(&defaults.meta).into_iter().map(|k| format!("{META_PREFIX}{k}")));
    keys.extend(section_keys(&defaults.retrain).into_iter().map(|k| format!("{RETRAIN_PREFIX}{k}")));
    keys
}

fn toml_to_json(v: &toml::Value) -> Value {
    match v {
        toml::Value::String(s) => Value::String(s.clone()),
        toml::Value::Integer(i) => Value::from(*i),
        toml::Value::Float(f) => Value::from(*f),
        toml::Value::Boolean(b) => Value::Bool(*b),
        toml::Value::Datetime(d) => Value::String(d.to_string()),
        toml::Value::Array(a) => Value::Array(a.iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => Value::Object(t.iter().map(|(k, v)| (k.clone(), toml_to_json(v))).collect()),
    }
}

fn optimizer_value(v: &Value) -> Value {
    match v.as_str() {
        Some("adam") => serde_json::to_value(Optimizer::adam()).unwrap_or(Value::Null),
        Some("sgd") => serde_json::to_value(Optimizer::Sgd).unwrap_or(Value::Null),
        _ => v.clone(),
    }
}

/// Applies `overrides` to `section`, checking each key on its own so that
/// one bad value does not hide the others.
fn apply_section<T: Serialize + DeserializeOwned>(
    section: &T,
    overrides: &BTreeMap<String, (String, Value)>,
    problems: &mut Vec<String>,
) -> T {
    let Ok(Value::Object(base)) = serde_json::to_value(section) else {
        unreachable!("config sections serialize to objects")
    };
    let mut merged: Map<String, Value> = base.clone();
    for (field, (key, value)) in overrides {
        let mut single = base.clone();
        single.insert(field.clone(), value.clone());
        match serde_json::from_value::<T>(Value::Object(single)) {
            Ok(_) => {
                merged.insert(field.clone(), value.clone());
            }
            Err(e) => problems.push(format!("{key}: {e}")),
        }
    }
    serde_json::from_value(Value::Object(merged)).unwrap_or_else(|_| {
        serde_json::from_value(Value::Object(base)).expect("defaults deserialize")
    })
}

fn take<T: DeserializeOwned>(table: &Map<String, Value>, key: &str, problems: &mut Vec<String>) -> Option<T> {
    let v = table.get(key)?;
    match serde_json::from_value(v.clone()) {
        Ok(x) => Some(x),
        Err(e) => {
            problems.push(format!("{key}: {e}"));
            None
        }
    }
}

/// Resolves a config file's text. `profile` (e.g. from a command-line flag)
/// takes precedence over the file's own `profile` key. Every problem is
/// collected into the returned list.
pub fn resolve_config(text: &str, profile: Option<Profile>) -> std::result::Result<RunConfig, Vec<String>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| vec![format!("syntax: {e}")])?;
    let table: Map<String, Value> = table.iter().map(|(k, v)| (k.clone(), toml_to_json(v))).collect();
    let mut problems = Vec::new();

    let file_profile = table.get("profile").and_then(|v| match v.as_str() {
        Some(s) => Profile::from_str(s).map_err(|e| problems.push(e.to_string())).ok(),
        None => {
            problems.push("profile: expected a string".to_string());
            None
        }
    });
    let mut cfg = RunConfig::new(profile.or(file_profile).unwrap_or(Profile::Desk));
    if let Some(p) = profile {
        cfg.profile = p;
    }

    let defaults = RunConfig::new(cfg.profile);
    let env_keys = section_keys(&defaults.env);
    let ppo_keys = section_keys(&defaults.ppo);
    let meta_keys = section_keys(&defaults.meta);
    let retrain_keys = section_keys(&defaults.retrain);
    let mut env = BTreeMap::new();
    let mut ppo = BTreeMap::new();
    let mut meta = BTreeMap::new();
    let mut retrain = BTreeMap::new();
    for (key, value) in &table {
        if RUN_KEYS.contains(&key.as_str()) {
            continue;
        }
        if env_keys.contains(key) {
            env.insert(key.clone(), (key.clone(), value.clone()));
        } else if ppo_keys.contains(key) {
            let v = if key == "optimizer" { optimizer_value(value) } else { value.clone() };
            ppo.insert(key.clone(), (key.clone(), v));
        } else if let Some(f) = key.strip_prefix(META_PREFIX).filter(|f| meta_keys.iter().any(|k| k == f)) {
            let v = if f == "outer_optimizer" { optimizer_value(value) } else { value.clone() };
            meta.insert(f.to_string(), (key.clone(), v));
        } else if let Some(f) = key.strip_prefix(RETRAIN_PREFIX).filter(|f| retrain_keys.iter().any(|k| k == f)) {
            retrain.insert(f.to_string(), (key.clone(), value.clone()));
        } else {
            problems.push(format!("unknown key {key:?}"));
        }
    }

    if let Some(c) = take::<String>(&table, "command", &mut problems) {
        match Command::from_str(&c) {
            Ok(c) => cfg.command = c,
            Err(e) => problems.push(e.to_string()),
        }
    }
    if let Some(t) = take::<String>(&table, "task", &mut problems) {
        match TaskKind::from_str(&t) {
            Ok(t) => cfg.task = t,
            Err(e) => problems.push(e.to_string()),
        }
    }
    if let Some(e) = take(&table, "epochs", &mut problems) {
        cfg.epochs = e;
    }
    if let Some(s) = take(&table, "seeds", &mut problems) {
        cfg.seeds = s;
    }
    if let Some(o) = take(&table, "out", &mut problems) {
        cfg.out = o;
    }
    if let Some(s) = take(&table, "scenario", &mut problems) {
        cfg.scenario = Some(s);
    }
    if let Some(i) = take(&table, "inputs", &mut problems) {
        cfg.inputs = i;
    }
    if let Some(l) = take(&table, "labels", &mut problems) {
        cfg.labels = l;
    }
    if let Some(alg) = meta.get("algorithm").and_then(|(_, v)| v.as_str()) {
        if let Ok(alg) = MetaAlgorithm::from_str(alg) {
            cfg.meta = MetaConfig {
                iterations: cfg.meta.iterations,
                ..MetaConfig::new(alg)
            };
        }
    }
    cfg.env = apply_section(&cfg.env, &env, &mut problems);
    cfg.ppo = apply_section(&cfg.ppo, &ppo, &mut problems);
    cfg.meta = apply_section(&cfg.meta, &meta, &mut problems);
    cfg.retrain = apply_section(&cfg.retrain, &retrain, &mut problems);

    if let Err(range) = cfg.validate() {
        problems.extend(range);
    }
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(problems)
    }
}

/// Reads and resolves a config file; a missing path means all defaults.
pub fn validate_config(path: Option<&Path>, profile: Option<Profile>) -> std::result::Result<RunConfig, Vec<String>> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| vec![format!("{}: {e}", p.display())])?,
        None => String::new(),
    };
    resolve_config(&text, profile)
}
