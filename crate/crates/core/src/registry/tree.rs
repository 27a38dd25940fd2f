use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::drift::{drift_check, fraction_distance, DriftReport, DriftThresholds, FractionVector};
use super::schema::{AttributeSchema, AttributeVector, CategoryPath};
use crate::error::{Error, Result};
use crate::ppo::{AgentParams, AgentSpec};

/// A trained meta model for one INMF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub spec: AgentSpec,
    pub params: AgentParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionSnapshot {
    pub time: u64,
    pub fractions: FractionVector,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CategoryNode {
    pub path: CategoryPath,
    pub plvn_ids: BTreeSet<u64>,
    /// Meta models keyed by INMF name.
    pub models: BTreeMap<String, MetaModel>,
    pub loss_history: Vec<f64>,
    pub snapshots: Vec<FractionSnapshot>,
}

impl CategoryNode {
    fn new(path: CategoryPath) -> Self {
        Self {
            path,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlvnRecord {
    pub id: u64,
    pub attributes: AttributeVector,
    pub path: CategoryPath,
    /// Registry clock at the last attribute change.
    pub updated_at: u64,
}

/// Category tree over a fixed attribute order with the super model at the root.
///
/// Reads take `&self` and mutations `&mut self`; callers that share a
/// registry across threads wrap it in a `RwLock`.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    pub(super) schema: AttributeSchema,
    pub(super) nodes: BTreeMap<CategoryPath, CategoryNode>,
    pub(super) plvns: BTreeMap<u64, PlvnRecord>,
    pub thresholds: DriftThresholds,
    pub(super) clock: u64,
}

impl Registry {
    pub fn new(schema: AttributeSchema) -> Self {
        let mut nodes = BTreeMap::new();
        nodes.insert(CategoryPath::root(), CategoryNode::new(CategoryPath::root()));
        Self {
            schema,
            nodes,
            plvns: BTreeMap::new(),
            thresholds: DriftThresholds::default(),
            clock: 0,
        }
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn node(&self, path: &CategoryPath) -> Option<&CategoryNode> {
        self.nodes.get(path)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CategoryNode> {
        self.nodes.values()
    }

    pub fn plvn(&self, id: u64) -> Option<&PlvnRecord> {
        self.plvns.get(&id)
    }

    pub fn plvns(&self) -> impl Iterator<Item = &PlvnRecord> {
        self.plvns.values()
    }

    fn node_mut(&mut self, path: &CategoryPath) -> &mut CategoryNode {
        self.nodes
            .entry(path.clone())
            .or_insert_with(|| CategoryNode::new(path.clone()))
    }

    fn existing_mut(&mut self, path: &CategoryPath) -> Result<&mut CategoryNode> {
        self.nodes
            .get_mut(path)
            .ok_or_else(|| Error::UnknownCategory(path.to_string()))
    }

    /// Registers or re-registers a PLVN under the full-depth category of
    /// `attrs`, moving it out of nodes it no longer matches.
    pub fn register_plvn(&mut self, id: u64, attrs: &AttributeVector) -> Result<CategoryPath> {
        let path = self.schema.normalize_discretize(attrs)?;
        if let Some(old) = self.plvns.get(&id) {
            if &old.attributes == attrs {
                return Ok(path);
            }
            let old_path = old.path.clone();
            for p in old_path.ancestors_and_self() {
                if !p.is_prefix_of(&path) {
                    if let Some(n) = self.nodes.get_mut(&p) {
                        n.plvn_ids.remove(&id);
                    }
                }
            }
        }
        for p in path.ancestors_and_self() {
            self.node_mut(&p).plvn_ids.insert(id);
        }
        self.clock += 1;
        self.plvns.insert(
            id,
            PlvnRecord {
                id,
                attributes: attrs.clone(),
                path: path.clone(),
                updated_at: self.clock,
            },
        );
        Ok(path)
    }

    pub fn deregister_plvn(&mut self, id: u64) -> Result<()> {
        let record = self
            .plvns
            .remove(&id)
            .ok_or_else(|| Error::Config(format!("PLVN {id} is not registered")))?;
        for p in record.path.ancestors_and_self() {
            if let Some(n) = self.nodes.get_mut(&p) {
                n.plvn_ids.remove(&id);
            }
        }
        self.clock += 1;
        Ok(())
    }

    pub fn install_model(&mut self, path: &CategoryPath, inmf: &str, model: MetaModel) -> Result<()> {
        self.schema.check_path(path)?;
        model.spec.check(&model.params)?;
        self.node_mut(path).models.insert(inmf.to_string(), model);
        self.clock += 1;
        Ok(())
    }

    pub fn remove_model(&mut self, path: &CategoryPath, inmf: &str) -> Option<MetaModel> {
        self.nodes.get_mut(path)?.models.remove(inmf)
    }

    pub fn model(&self, path: &CategoryPath, inmf: &str) -> Option<&MetaModel> {
        self.nodes.get(path)?.models.get(inmf)
    }

    /// Deepest model-bearing node on `path` for `inmf`, falling back to the root.
    pub fn match_path(&self, path: &CategoryPath, inmf: &str) -> Result<(CategoryPath, &MetaModel)> {
        if self.model(&CategoryPath::root(), inmf).is_none() {
            return Err(Error::NoSuperModel(inmf.to_string()));
        }
        for depth in (0..=path.depth()).rev() {
            let p = path.prefix(depth);
            if let Some(m) = self.model(&p, inmf) {
                return Ok((p, m));
            }
        }
        unreachable!("root model checked above")
    }

    /// Least-general meta model for the known attributes in `attrs`.
    pub fn least_general_match(&self, attrs: &AttributeVector, inmf: &str) -> Result<(CategoryPath, &MetaModel)> {
        let path = self.schema.discretize_known(attrs)?;
        self.match_path(&path, inmf)
    }

    /// Fraction of the node's PLVNs in each child, in canonical value order.
    pub fn subcategory_fraction_vector(&self, path: &CategoryPath) -> Result<FractionVector> {
        let node = self
            .nodes
            .get(path)
            .ok_or_else(|| Error::UnknownCategory(path.to_string()))?;
        if node.plvn_ids.is_empty() {
            return Err(Error::EmptyCategory(path.to_string()));
        }
        let total = node.plvn_ids.len() as f64;
        let children = self.schema.children(path);
        let labels = children.iter().map(|c| c.0[c.depth() - 1].1.clone()).collect();
        let values = children
            .iter()
            .map(|c| self.nodes.get(c).map_or(0, |n| n.plvn_ids.len()) as f64 / total)
            .collect();
        Ok(FractionVector::new(labels, values))
    }

    pub fn record_fraction_snapshot(&mut self, path: &CategoryPath, time: u64) -> Result<FractionVector> {
        let fractions = self.subcategory_fraction_vector(path)?;
        self.existing_mut(path)?.snapshots.push(FractionSnapshot {
            time,
            fractions: fractions.clone(),
        });
        Ok(fractions)
    }

    pub fn record_loss(&mut self, path: &CategoryPath, loss: f64) -> Result<()> {
        self.existing_mut(path)?.loss_history.push(loss);
        Ok(())
    }

    fn snapshot_at(&self, path: &CategoryPath, time: u64) -> Result<&FractionVector> {
        let node = self
            .nodes
            .get(path)
            .ok_or_else(|| Error::UnknownCategory(path.to_string()))?;
        node.snapshots
            .iter()
            .rev()
            .find(|s| s.time == time)
            .map(|s| &s.fractions)
            .ok_or_else(|| Error::Config(format!("no fraction snapshot of {path} at time {time}")))
    }

    /// Distance between the node's fraction snapshots taken at `t1` and `t2`.
    pub fn drift_distance(&self, path: &CategoryPath, t1: u64, t2: u64) -> Result<f64> {
        Ok(fraction_distance(self.snapshot_at(path, t1)?, self.snapshot_at(path, t2)?))
    }

    pub fn drift_alarm(&self, path: &CategoryPath, window: usize) -> Result<DriftReport> {
        let node = self
            .nodes
            .get(path)
            .ok_or_else(|| Error::UnknownCategory(path.to_string()))?;
        let snaps: Vec<FractionVector> = node.snapshots.iter().map(|s| s.fractions.clone()).collect();
        Ok(drift_check(&node.loss_history, &snaps, window, &self.thresholds))
    }

    /// Checks that every child's PLVN set is contained in its parent's and
    /// that the root holds every registered PLVN. Returns the first violation.
    pub fn check_ancestor_closure(&self) -> std::result::Result<(), String> {
        let root = &self.nodes[&CategoryPath::root()];
        let registered: BTreeSet<u64> = self.plvns.keys().copied().collect();
        if root.plvn_ids != registered {
            return Err(format!("root holds {:?}, registered {:?}", root.plvn_ids, registered));
        }
        for node in self.nodes.values().filter(|n| !n.path.is_root()) {
            let parent = node.path.prefix(node.path.depth() - 1);
            let parent_ids = self.nodes.get(&parent).map(|n| &n.plvn_ids);
            if !parent_ids.is_some_and(|p| node.plvn_ids.is_subset(p)) {
                return Err(format!("{} is not contained in {parent}", node.path));
            }
        }
        Ok(())
    }
}
