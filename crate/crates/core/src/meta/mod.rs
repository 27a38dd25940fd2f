//! Meta-training across sampled tasks and adaptation from a meta model.
//!
//! Each iteration distributes the current meta model to `I` tasks, adapts it
//! with one plain gradient step per task and averages the returned payloads.
//! Two payload rules are supported: first-order MAML (gradient of the
//! individual loss on a fresh batch, evaluated at the adapted parameters) and
//! Reptile (adapted minus meta parameters, no second batch).

mod config;
mod protocol;
mod sampler;
mod train;

pub use config::{MetaAlgorithm, MetaConfig};
pub use protocol::{
    adaptation_loss_gradient, adaptation_report, individual_loss_and_grad, inner_adapt,
    meta_direction, meta_update, reptile_delta, InnerAdaptation, MetaReport, Payload,
};
pub use sampler::{FixedPatternSampler, PoolSampler, TaskSampler, UniformPatternSampler};
pub use train::{
    meta_adapt, meta_train, meta_train_observed, transfer_init, MetaHistory, MetaIterationRecord,
    META_HISTORY_HEADER,
};
