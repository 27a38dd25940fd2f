//! Declarative scenario scripts.
//!
//! A script is a TOML file. Besides the run-config keys accepted by
//! [`resolve_config`] it holds:
//!
//! ```toml
//! seed = 7                      # scenario stream (edges, offline planning)
//! inmf = "cp_mode_selection"
//! cache_capacity = 4
//!
//! [[plvn]]
//! id = 1
//! pattern = "constant:7"        # task1 | task2 | uniform | constant:<MHz> | <m1>,<m2>,...
//! attributes = { city = "a" }   # static attributes, optional
//! switch = [{ at_episode = 40, pattern = "constant:5" }]
//!
//! [[stage]]
//! kind = "offline"              # offline | attach | monitor | case_study
//! category = "root"
//! ```
//!
//! `attach` and `monitor` take `plvns` (all when omitted) and `epochs`;
//! `monitor` also takes `episodes`. Switch episodes count monitored
//! episodes of that PLVN. `case_study` runs the three-way comparison with
//! the script's run config, exactly as the command line does.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::json;

use super::events::{edge_actor, EventLog, CLOUD};
use super::twin::{monitor_and_retrain, offline_planning, online_attach, CloudDt, EdgeDt, RetrainEvent};
use crate::env::ResourcePattern;
use crate::error::{Error, Result};
use crate::experiment::{resolve_config, run_case_study, write_outputs, RunConfig, RunOutcome};
use crate::meta::MetaConfig;
use crate::ppo::{AgentSpec, Task};
use crate::registry::{AttributeSchema, AttributeValue, AttributeVector, CategoryPath, Registry};
use crate::rng::{derive_seed, seeded_rng};

const SCRIPT_KEYS: [&str; 6] = ["seed", "inmf", "schema", "cache_capacity", "plvn", "stage"];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchScript {
    pub at_episode: u64,
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlvnScript {
    pub id: u64,
    pub pattern: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, AttributeValue>,
    #[serde(default)]
    pub switch: Vec<SwitchScript>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageScript {
    Offline {
        #[serde(default = "root_name")]
        category: String,
        iterations: Option<usize>,
    },
    Attach {
        plvns: Option<Vec<u64>>,
        epochs: Option<usize>,
    },
    Monitor {
        plvns: Option<Vec<u64>>,
        episodes: usize,
        epochs: Option<usize>,
    },
    CaseStudy,
}

fn root_name() -> String {
    "root".to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScript {
    pub seed: u64,
    pub inmf: String,
    pub schema: String,
    pub cache_capacity: usize,
    pub plvns: Vec<PlvnScript>,
    pub stages: Vec<StageScript>,
    pub config: RunConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptHead {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_inmf")]
    inmf: String,
    #[serde(default = "default_schema")]
    schema: String,
    #[serde(default = "default_capacity")]
    cache_capacity: usize,
    #[serde(default)]
    plvn: Vec<PlvnScript>,
    #[serde(default)]
    stage: Vec<StageScript>,
}

fn default_inmf() -> String {
    "cp_mode_selection".to_string()
}

fn default_schema() -> String {
    "avg_resources".to_string()
}

fn default_capacity() -> usize {
    4
}

fn schema_named(name: &str) -> Result<AttributeSchema> {
    match name {
        "avg_resources" => Ok(AttributeSchema::avg_resources()),
        other => Err(Error::Script(format!("unknown schema {other:?}, expected avg_resources"))),
    }
}

/// Parses `root` or `attr=value/attr=value`.
fn parse_category(text: &str) -> Result<CategoryPath> {
    let text = text.trim();
    if text == "root" || text.is_empty() {
        return Ok(CategoryPath::root());
    }
    let steps = text
        .split('/')
        .map(|step| {
            step.split_once('=')
                .map(|(a, v)| (a.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Script(format!("bad category step {step:?}, expected attr=value")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CategoryPath(steps))
}

/// Resolves a pattern spec. `uniform` draws from `seed`.
fn parse_pattern(spec: &str, slots: usize, seed: u64) -> Result<ResourcePattern> {
    let spec = spec.trim();
    let pattern = match spec {
        "task1" => ResourcePattern::constant(5.0, slots)?,
        "task2" => ResourcePattern::constant(7.0, slots)?,
        "uniform" => ResourcePattern::uniform_random(slots, &mut seeded_rng(seed)),
        _ => match spec.strip_prefix("constant:") {
            Some(level) => {
                let level: f64 = level
                    .trim()
                    .parse()
                    .map_err(|_| Error::Script(format!("bad constant level in {spec:?}")))?;
                ResourcePattern::constant(level, slots)?
            }
            None => ResourcePattern::parse_line(spec)?,
        },
    };
    pattern.check_slots(slots)?;
    Ok(pattern)
}

fn pattern_seed(seed: u64, plvn: u64, switch: usize) -> u64 {
    derive_seed(derive_seed(seed, 100 + plvn), switch as u64)
}

fn run_config_text(table: &toml::Table) -> String {
    let rest: toml::Table = table
        .iter()
        .filter(|(k, _)| !SCRIPT_KEYS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    rest.to_string()
}

impl ScenarioScript {
    /// Parses and validates a script. Every problem found is reported.
    pub fn parse(text: &str) -> std::result::Result<Self, Vec<String>> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| vec![format!("syntax: {e}")])?;
        let mut problems = Vec::new();
        let config = resolve_config(&run_config_text(&table), None).unwrap_or_else(|p| {
            problems.extend(p);
            RunConfig::new(crate::experiment::Profile::Desk)
        });
        let head_table: toml::Table = table
            .iter()
            .filter(|(k, _)| SCRIPT_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let head: ScriptHead = match head_table.try_into() {
            Ok(h) => h,
            Err(e) => {
                problems.push(format!("script: {e}"));
                return Err(problems);
            }
        };
        let script = ScenarioScript {
            seed: head.seed,
            inmf: head.inmf,
            schema: head.schema,
            cache_capacity: head.cache_capacity,
            plvns: head.plvn,
            stages: head.stage,
            config,
        };
        problems.extend(script.problems());
        if problems.is_empty() {
            Ok(script)
        } else {
            Err(problems)
        }
    }

    pub fn from_file(path: &Path) -> std::result::Result<Self, Vec<String>> {
        let text = fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])?;
        Self::parse(&text)
    }

    /// Static checks run before anything executes.
    pub fn problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let schema = match schema_named(&self.schema) {
            Ok(s) => Some(s),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        };
        if self.cache_capacity == 0 {
            problems.push("cache_capacity must be at least 1".to_string());
        }
        if self.inmf.trim().is_empty() {
            problems.push("inmf must not be empty".to_string());
        }
        let slots = self.config.env.slots;
        let mut ids = BTreeSet::new();
        for p in &self.plvns {
            if !ids.insert(p.id) {
                problems.push(format!("plvn {}: duplicate id", p.id));
            }
            if let Err(e) = parse_pattern(&p.pattern, slots, 0) {
                problems.push(format!("plvn {}: pattern {:?}: {e}", p.id, p.pattern));
            }
            let mut at = BTreeSet::new();
            for s in &p.switch {
                if !at.insert(s.at_episode) {
                    problems.push(format!("plvn {}: two switches at episode {}", p.id, s.at_episode));
                }
                if let Err(e) = parse_pattern(&s.pattern, slots, 0) {
                    problems.push(format!("plvn {}: switch pattern {:?}: {e}", p.id, s.pattern));
                }
            }
        }
        let mut root_trained = false;
        let mut attached = BTreeSet::new();
        for (i, stage) in self.stages.iter().enumerate() {
            let where_ = format!("stage {i}");
            let check_ids = |list: &Option<Vec<u64>>, problems: &mut Vec<String>| -> Vec<u64> {
                match list {
                    Some(l) => {
                        for id in l.iter().filter(|id| !ids.contains(id)) {
                            problems.push(format!("{where_}: unknown plvn {id}"));
                        }
                        l.clone()
                    }
                    None => ids.iter().copied().collect(),
                }
            };
            match stage {
                StageScript::Offline { category, iterations } => {
                    match parse_category(category) {
                        Ok(path) => {
                            if let Some(schema) = &schema {
                                if let Err(e) = schema.check_path(&path) {
                                    problems.push(format!("{where_}: {e}"));
                                }
                            }
                            root_trained |= path.is_root();
                        }
                        Err(e) => problems.push(format!("{where_}: {e}")),
                    }
                    if ids.is_empty() {
                        problems.push(format!("{where_}: offline planning needs at least one plvn"));
                    }
                    if *iterations == Some(0) {
                        problems.push(format!("{where_}: iterations must be at least 1"));
                    }
                }
                StageScript::Attach { plvns, epochs } => {
                    if !root_trained {
                        problems.push(format!("{where_}: attach before any offline stage on root"));
                    }
                    if *epochs == Some(0) {
                        problems.push(format!("{where_}: epochs must be at least 1"));
                    }
                    attached.extend(check_ids(plvns, &mut problems));
                }
                StageScript::Monitor { plvns, epochs, .. } => {
                    if *epochs == Some(0) {
                        problems.push(format!("{where_}: epochs must be at least 1"));
                    }
                    for id in check_ids(plvns, &mut problems) {
                        if ids.contains(&id) && !attached.contains(&id) {
                            problems.push(format!("{where_}: plvn {id} is monitored before it is attached"));
                        }
                    }
                }
                StageScript::CaseStudy => {}
            }
        }
        problems
    }
}

/// What a scenario run produced.
pub struct ScenarioOutcome {
    pub log: EventLog,
    pub cloud: CloudDt,
    pub edges: BTreeMap<u64, EdgeDt>,
    pub retrains: Vec<(u64, RetrainEvent)>,
    pub case_study: Option<RunOutcome>,
    pub config: RunConfig,
    pub inmf: String,
}

impl ScenarioOutcome {
    /// Per-PLVN monitored rewards as CSV, keyed by PLVN id.
    pub fn reward_csvs(&self) -> BTreeMap<u64, String> {
        self.edges.iter().map(|(id, e)| (*id, e.episodes_csv())).collect()
    }

    /// Writes `events.jsonl`, `plvn_<id>_rewards.csv`, the registry snapshot
    /// under `registry/` and the case-study outputs under `case_study/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.log.write_jsonl(&dir.join("events.jsonl"))?;
        for (id, csv) in self.reward_csvs() {
            fs::write(dir.join(format!("plvn_{id}_rewards.csv")), csv)?;
        }
        if !self.edges.is_empty() {
            self.cloud.registry.save(&dir.join("registry"), &self.inmf)?;
        }
        if let Some(cs) = &self.case_study {
            write_outputs(&self.config, cs, &dir.join("case_study"))?;
        }
        Ok(())
    }
}

fn select(list: &Option<Vec<u64>>, edges: &BTreeMap<u64, EdgeDt>) -> Vec<u64> {
    list.clone().unwrap_or_else(|| edges.keys().copied().collect())
}

/// Executes a validated script. Edges are created and registered first,
/// then the stages run in order; within a stage PLVNs are visited by id.
pub fn run_scenario(script: &ScenarioScript) -> Result<ScenarioOutcome> {
    let problems = script.problems();
    if !problems.is_empty() {
        return Err(Error::Script(problems.join("; ")));
    }
    let config = &script.config;
    let spec = AgentSpec::for_env(&config.env);
    let mut cloud = CloudDt::new(Registry::new(schema_named(&script.schema)?));
    let mut log = EventLog::new();
    let mut edges = BTreeMap::new();
    let mut switches: BTreeMap<u64, BTreeMap<u64, ResourcePattern>> = BTreeMap::new();
    for p in &script.plvns {
        let pattern = parse_pattern(&p.pattern, config.env.slots, pattern_seed(script.seed, p.id, 0))?;
        let task = Task::with_pattern(p.id, config.env.clone(), pattern);
        let mut edge = EdgeDt::new(p.id, task, script.cache_capacity, derive_seed(script.seed, 1000 + p.id));
        edge.static_attributes = AttributeVector {
            values: p.attributes.clone(),
        };
        let attrs = edge.probe_attributes()?;
        edge.category = cloud.register(p.id, &attrs, &mut log)?;
        let mut sw = BTreeMap::new();
        for (k, s) in p.switch.iter().enumerate() {
            let pat = parse_pattern(&s.pattern, config.env.slots, pattern_seed(script.seed, p.id, k + 1))?;
            sw.insert(s.at_episode, pat);
        }
        switches.insert(p.id, sw);
        edges.insert(p.id, edge);
    }

    let mut offline_rng = seeded_rng(derive_seed(script.seed, 1));
    let mut retrains = Vec::new();
    let mut case_study = None;
    for stage in &script.stages {
        match stage {
            StageScript::Offline { category, iterations } => {
                let path = parse_category(category)?;
                let meta = MetaConfig {
                    iterations: iterations.unwrap_or(config.meta.iterations),
                    ..config.meta.clone()
                };
                offline_planning(&mut cloud, &edges, &path, &script.inmf, &spec, &meta, &mut offline_rng, &mut log)?;
            }
            StageScript::Attach { plvns, epochs } => {
                for id in select(plvns, &edges) {
                    let edge = edges.get_mut(&id).expect("validated");
                    let budget = epochs.unwrap_or(config.epochs);
                    online_attach(&mut cloud, edge, &script.inmf, &spec, &config.ppo, budget, &mut log)?;
                }
            }
            StageScript::Monitor { plvns, episodes, epochs } => {
                for id in select(plvns, &edges) {
                    let edge = edges.get_mut(&id).expect("validated");
                    let sw = &switches[&id];
                    let budget = epochs.unwrap_or(config.epochs);
                    let mut on_episode = |edge: &mut EdgeDt, episode: u64, log: &mut EventLog| {
                        if let Some(p) = sw.get(&episode) {
                            edge.set_pattern(p.clone());
                            log.push(
                                edge_actor(edge.plvn_id),
                                "pattern_switch",
                                json!({"episode": episode, "mean_level": p.mean_level()}),
                            );
                        }
                    };
                    let events = monitor_and_retrain(
                        &mut cloud,
                        edge,
                        &script.inmf,
                        &spec,
                        &config.ppo,
                        &config.retrain,
                        budget,
                        *episodes,
                        &mut log,
                        &mut on_episode,
                    )?;
                    retrains.extend(events.into_iter().map(|e| (id, e)));
                }
            }
            StageScript::CaseStudy => {
                log.push(CLOUD, "case_study", json!({"seeds": config.seeds, "epochs": config.epochs}));
                case_study = Some(run_case_study(config)?);
            }
        }
    }
    Ok(ScenarioOutcome {
        log,
        cloud,
        edges,
        retrains,
        case_study,
        config: config.clone(),
        inmf: script.inmf.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_script_gives_empty_log() {
        let script = ScenarioScript::parse("").unwrap();
        let out = run_scenario(&script).unwrap();
        assert!(out.log.is_empty());
        assert!(out.reward_csvs().is_empty());
    }

    #[test]
    fn categories_parse() {
        assert_eq!(parse_category("root").unwrap(), CategoryPath::root());
        assert_eq!(
            parse_category("avg_resources=low").unwrap(),
            CategoryPath::root().child("avg_resources", "low")
        );
        assert!(parse_category("avg_resources").is_err());
    }

    #[test]
    fn patterns_parse() {
        assert_eq!(parse_pattern("task1", 4, 0).unwrap().means(), &[5.0; 4]);
        assert_eq!(parse_pattern("constant:6", 2, 0).unwrap().means(), &[6.0; 2]);
        assert_eq!(parse_pattern("5,6", 2, 0).unwrap().means(), &[5.0, 6.0]);
        assert!(parse_pattern("5,6", 3, 0).is_err());
        assert!(parse_pattern("constant:x", 3, 0).is_err());
        assert_eq!(parse_pattern("uniform", 9, 3).unwrap(), parse_pattern("uniform", 9, 3).unwrap());
    }

    #[test]
    fn validation_collects_every_problem() {
        let text = r#"
            cache_capacity = 0
            [[plvn]]
            id = 1
            pattern = "bogus"
            [[plvn]]
            id = 1
            pattern = "task1"
            [[stage]]
            kind = "attach"
            plvns = [9]
            [[stage]]
            kind = "monitor"
            plvns = [1]
            episodes = 5
        "#;
        let problems = ScenarioScript::parse(text).unwrap_err();
        let all = problems.join("\n");
        for needle in ["cache_capacity", "duplicate id", "bogus", "attach before", "unknown plvn 9"] {
            assert!(all.contains(needle), "missing {needle:?} in\n{all}");
        }
    }

    #[test]
    fn unknown_keys_and_stage_kinds_rejected() {
        assert!(ScenarioScript::parse("frobnicate = 1").is_err());
        assert!(ScenarioScript::parse("[[stage]]\nkind = \"dance\"").is_err());
    }
}
