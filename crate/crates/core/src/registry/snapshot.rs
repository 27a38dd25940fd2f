use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::drift::DriftThresholds;
use super::schema::{AttributeSchema, CategoryPath};
use super::tree::{CategoryNode, FractionSnapshot, MetaModel, PlvnRecord, Registry};
use crate::diffcore::{load_params, save_params, ParamSidecar};
use crate::error::{Error, Result};
use crate::ppo::{AgentParams, AgentSpec};

pub const SNAPSHOT_FILE: &str = "registry.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub path: CategoryPath,
    pub plvn_ids: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_spec: Option<AgentSpec>,
    pub loss_history: Vec<f64>,
    #[serde(default)]
    pub fraction_snapshots: Vec<FractionSnapshot>,
}

/// On-disk form of a registry for one INMF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrySnapshot {
    pub schema: AttributeSchema,
    pub inmf: String,
    pub clock: u64,
    pub thresholds: DriftThresholds,
    pub nodes: Vec<NodeEntry>,
    pub plvns: Vec<PlvnRecord>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_owned(),
        reason: reason.into(),
    }
}

impl Registry {
    /// Writes `registry.json` plus one parameter file per node model of `inmf`.
    pub fn save(&self, dir: &Path, inmf: &str) -> Result<RegistrySnapshot> {
        std::fs::create_dir_all(dir)?;
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for node in self.nodes.values() {
            let mut entry = NodeEntry {
                path: node.path.clone(),
                plvn_ids: node.plvn_ids.iter().copied().collect(),
                model_file: None,
                model_spec: None,
                loss_history: node.loss_history.clone(),
                fraction_snapshots: node.snapshots.clone(),
            };
            if let Some(m) = node.models.get(inmf) {
                let file = format!("{}.params", node.path.file_stem());
                let sidecar = ParamSidecar {
                    spec: m.spec.describe(),
                    created_at: format!("logical:{}", self.clock),
                    tag: node.path.to_string(),
                };
                save_params(&dir.join(&file), &m.params.flatten(), &sidecar)?;
                entry.model_file = Some(file);
                entry.model_spec = Some(m.spec.clone());
            }
            nodes.push(entry);
        }
        let snap = RegistrySnapshot {
            schema: self.schema.clone(),
            inmf: inmf.to_string(),
            clock: self.clock,
            thresholds: self.thresholds,
            nodes,
            plvns: self.plvns.values().cloned().collect(),
        };
        std::fs::write(dir.join(SNAPSHOT_FILE), serde_json::to_string_pretty(&snap)? + "\n")?;
        Ok(snap)
    }

    /// Reads a directory written by [`Registry::save`]; returns the INMF name too.
    pub fn load(dir: &Path) -> Result<(Registry, String)> {
        let file = dir.join(SNAPSHOT_FILE);
        let snap: RegistrySnapshot =
            serde_json::from_slice(&std::fs::read(&file)?).map_err(|e| format_err(&file, e.to_string()))?;
        let mut nodes = BTreeMap::new();
        for e in snap.nodes {
            snap.schema
                .check_path(&e.path)
                .map_err(|err| format_err(&file, err.to_string()))?;
            let mut models = BTreeMap::new();
            match (&e.model_file, e.model_spec) {
                (Some(name), Some(spec)) => {
                    let (flat, _) = load_params(&dir.join(name))?;
                    let params = AgentParams::unflatten(&spec, &flat)?;
                    models.insert(snap.inmf.clone(), MetaModel { spec, params });
                }
                (None, None) => {}
                _ => return Err(format_err(&file, format!("node {} has a model file without spec", e.path))),
            }
            nodes.insert(
                e.path.clone(),
                CategoryNode {
                    path: e.path,
                    plvn_ids: e.plvn_ids.into_iter().collect(),
                    models,
                    loss_history: e.loss_history,
                    snapshots: e.fraction_snapshots,
                },
            );
        }
        nodes
            .entry(CategoryPath::root())
            .or_insert_with(|| CategoryNode {
                path: CategoryPath::root(),
                ..CategoryNode::default()
            });
        let registry = Registry {
            schema: snap.schema,
            nodes,
            plvns: snap.plvns.into_iter().map(|p| (p.id, p)).collect(),
            thresholds: snap.thresholds,
            clock: snap.clock,
        };
        registry
            .check_ancestor_closure()
            .map_err(|reason| format_err(&file, reason))?;
        Ok((registry, snap.inmf))
    }
}
