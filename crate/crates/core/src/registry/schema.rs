use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeKind {
    Categorical {
        vocabulary: Vec<String>,
    },
    Continuous {
        min: f64,
        max: f64,
        bin_count: usize,
        /// Bin names; `bin0`, `bin1`, ... when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl AttributeDef {
    pub fn categorical(name: &str, vocabulary: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: AttributeKind::Categorical {
                vocabulary: vocabulary.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn continuous(name: &str, min: f64, max: f64, bin_count: usize) -> Self {
        Self {
            name: name.to_string(),
            kind: AttributeKind::Continuous {
                min,
                max,
                bin_count,
                labels: None,
            },
        }
    }

    pub fn with_labels(mut self, names: &[&str]) -> Self {
        if let AttributeKind::Continuous { labels, .. } = &mut self.kind {
            *labels = Some(names.iter().map(|s| s.to_string()).collect());
        }
        self
    }

    /// Discrete values of this attribute in canonical order.
    pub fn values(&self) -> Vec<String> {
        match &self.kind {
            AttributeKind::Categorical { vocabulary } => vocabulary.clone(),
            AttributeKind::Continuous {
                bin_count, labels, ..
            } => match labels {
                Some(l) => l.clone(),
                None => (0..*bin_count).map(|i| format!("bin{i}")).collect(),
            },
        }
    }

    fn discretize(&self, value: &AttributeValue) -> Result<String> {
        match (&self.kind, value) {
            (AttributeKind::Categorical { vocabulary }, AttributeValue::Category(v)) => {
                if vocabulary.contains(v) {
                    Ok(v.clone())
                } else {
                    Err(Error::UnknownAttributeValue {
                        attribute: self.name.clone(),
                        value: v.clone(),
                    })
                }
            }
            (AttributeKind::Continuous { min, max, bin_count, .. }, AttributeValue::Number(v)) => {
                if !v.is_finite() {
                    return Err(Error::UnknownAttributeValue {
                        attribute: self.name.clone(),
                        value: v.to_string(),
                    });
                }
                let bin = bin_index(*v, *min, *max, *bin_count);
                Ok(self.values().swap_remove(bin))
            }
            (AttributeKind::Categorical { .. }, AttributeValue::Number(v)) => Err(Error::Schema(format!(
                "attribute {:?} is categorical but got number {v}",
                self.name
            ))),
            (AttributeKind::Continuous { .. }, AttributeValue::Category(v)) => Err(Error::Schema(format!(
                "attribute {:?} is continuous but got category {v:?}",
                self.name
            ))),
        }
    }
}

/// Min-max normalisation clamped to `[0, 1]`, then `min(floor(u * bins), bins - 1)`.
pub fn bin_index(value: f64, min: f64, max: f64, bin_count: usize) -> usize {
    let u = ((value - min) / (max - min)).clamp(0.0, 1.0);
    ((u * bin_count as f64).floor() as usize).min(bin_count - 1)
}

/// Ordered attribute definitions; the order fixes the levels of the category tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr")]
pub struct AttributeSchema {
    attributes: Vec<AttributeDef>,
}

#[derive(Deserialize)]
struct SchemaRepr {
    attributes: Vec<AttributeDef>,
}

impl TryFrom<SchemaRepr> for AttributeSchema {
    type Error = Error;

    fn try_from(repr: SchemaRepr) -> Result<Self> {
        Self::new(repr.attributes)
    }
}

impl AttributeSchema {
    pub fn new(attributes: Vec<AttributeDef>) -> Result<Self> {
        let mut problems = Vec::new();
        for (i, a) in attributes.iter().enumerate() {
            if attributes[..i].iter().any(|b| b.name == a.name) {
                problems.push(format!("duplicate attribute {:?}", a.name));
            }
            match &a.kind {
                AttributeKind::Categorical { vocabulary } => {
                    if vocabulary.is_empty() {
                        problems.push(format!("{:?}: empty vocabulary", a.name));
                    }
                    for (j, v) in vocabulary.iter().enumerate() {
                        if vocabulary[..j].contains(v) {
                            problems.push(format!("{:?}: duplicate value {v:?}", a.name));
                        }
                    }
                }
                AttributeKind::Continuous {
                    min,
                    max,
                    bin_count,
                    labels,
                } => {
                    if !(min.is_finite() && max.is_finite() && min < max) {
                        problems.push(format!("{:?}: need min < max, got [{min}, {max}]", a.name));
                    }
                    if *bin_count < 2 {
                        problems.push(format!("{:?}: bin_count must be at least 2, got {bin_count}", a.name));
                    }
                    if let Some(l) = labels {
                        if l.len() != *bin_count {
                            problems.push(format!("{:?}: {} labels for {bin_count} bins", a.name, l.len()));
                        }
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(Self { attributes })
        } else {
            Err(Error::Schema(problems.join("; ")))
        }
    }

    /// The single-attribute schema used by the experiments: average
    /// resources over [5, 7] MHz in low / medium / high bins.
    pub fn avg_resources() -> Self {
        Self::new(vec![
            AttributeDef::continuous("avg_resources", 5.0, 7.0, 3).with_labels(&["low", "medium", "high"]),
        ])
        .expect("static schema is valid")
    }

    pub fn attributes(&self) -> &[AttributeDef] {
        &self.attributes
    }

    pub fn depth(&self) -> usize {
        self.attributes.len()
    }

    fn check_names(&self, attrs: &AttributeVector) -> Result<()> {
        let unknown: Vec<&str> = attrs
            .values
            .keys()
            .filter(|k| !self.attributes.iter().any(|a| &a.name == *k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema(format!("unknown attributes {unknown:?}")))
        }
    }

    /// Full-depth category of a complete attribute vector.
    pub fn normalize_discretize(&self, attrs: &AttributeVector) -> Result<CategoryPath> {
        self.check_names(attrs)?;
        let missing: Vec<&str> = self
            .attributes
            .iter()
            .filter(|a| !attrs.values.contains_key(&a.name))
            .map(|a| a.name.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Schema(format!("missing attributes {missing:?}")));
        }
        self.discretize_known(attrs)
    }

    /// Category from the known attributes: the path stops at the first
    /// attribute that is absent.
    pub fn discretize_known(&self, attrs: &AttributeVector) -> Result<CategoryPath> {
        self.check_names(attrs)?;
        let mut steps = Vec::new();
        for a in &self.attributes {
            match attrs.values.get(&a.name) {
                Some(v) => steps.push((a.name.clone(), a.discretize(v)?)),
                None => break,
            }
        }
        Ok(CategoryPath(steps))
    }

    /// Checks that `path` is a schema prefix with known values.
    pub fn check_path(&self, path: &CategoryPath) -> Result<()> {
        if path.depth() > self.depth() {
            return Err(Error::UnknownCategory(path.to_string()));
        }
        for ((name, value), def) in path.0.iter().zip(&self.attributes) {
            if name != &def.name || !def.values().contains(value) {
                return Err(Error::UnknownCategory(path.to_string()));
            }
        }
        Ok(())
    }

    /// Canonical children of `path`; empty at full depth.
    pub fn children(&self, path: &CategoryPath) -> Vec<CategoryPath> {
        match self.attributes.get(path.depth()) {
            Some(def) => def.values().into_iter().map(|v| path.child(&def.name, &v)).collect(),
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Number(f64),
    Category(String),
}

impl From<f64> for AttributeValue {
    fn from(v: f64) -> Self {
        AttributeValue::Number(v)
    }
}

impl From<&str> for AttributeValue {
    fn from(v: &str) -> Self {
        AttributeValue::Category(v.to_string())
    }
}

/// Raw attribute values by name; attributes may be missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeVector {
    pub values: BTreeMap<String, AttributeValue>,
}

impl AttributeVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<AttributeValue>) -> Self {
        self.values.insert(name.to_string(), value.into());
        self
    }

    pub fn set(&mut self, name: &str, value: impl Into<AttributeValue>) {
        self.values.insert(name.to_string(), value.into());
    }
}

/// `(attribute, discrete value)` pairs along a prefix of the schema order.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryPath(pub Vec<(String, String)>);

impl CategoryPath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, attribute: &str, value: &str) -> Self {
        let mut steps = self.0.clone();
        steps.push((attribute.to_string(), value.to_string()));
        Self(steps)
    }

    pub fn prefix(&self, depth: usize) -> Self {
        Self(self.0[..depth.min(self.depth())].to_vec())
    }

    /// Root first, `self` last.
    pub fn ancestors_and_self(&self) -> impl Iterator<Item = CategoryPath> + '_ {
        (0..=self.depth()).map(|d| self.prefix(d))
    }

    pub fn is_prefix_of(&self, other: &CategoryPath) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Model file stem: `root` or the lower-cased values joined by dots.
    pub fn file_stem(&self) -> String {
        if self.is_root() {
            return "root".to_string();
        }
        self.0
            .iter()
            .map(|(_, v)| {
                v.to_lowercase()
                    .chars()
                    .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join(".")
    }
}

impl fmt::Display for CategoryPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_root() {
            return f.write_str("root");
        }
        let parts: Vec<String> = self.0.iter().map(|(a, v)| format!("{a}={v}")).collect();
        f.write_str(&parts.join("/"))
    }
}
