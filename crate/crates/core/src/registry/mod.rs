//! Meta-model catalog kept by the cloud twin.
//!
//! Attributes are normalised and binned into a [`CategoryPath`], a prefix of
//! the schema's attribute order. Every node of the resulting tree lists the
//! PLVNs below it and may hold one meta model per INMF; the root holds the
//! super model. Fraction vectors over a node's children and its adaptation
//! loss history feed the drift checks.

mod drift;
mod schema;
mod snapshot;
mod tree;

pub use drift::{drift_check, fraction_distance, DriftReport, DriftThresholds, FractionVector};
pub use schema::{bin_index, AttributeDef, AttributeKind, AttributeSchema, AttributeValue, AttributeVector, CategoryPath};
pub use snapshot::{NodeEntry, RegistrySnapshot, SNAPSHOT_FILE};
pub use tree::{CategoryNode, FractionSnapshot, MetaModel, PlvnRecord, Registry};
