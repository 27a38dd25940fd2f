//! Proximal policy optimisation with a diagonal Gaussian policy whose samples
//! are thresholded into per-pair cooperation decisions.

mod agent;
mod loss;
mod optim;
mod rollout;
mod train;
mod update;

pub use agent::{
    discretize, sample_action, sample_from_head, AgentParams, AgentSpec, SampledAction,
    COOPERATION_THRESHOLD, HIDDEN_UNITS, INITIAL_LOG_STD, VALUE_SCALE,
};
pub use loss::{
    normalize_advantages, policy_loss_and_grad, prepare_samples, value_loss_and_grad,
    PolicyObjective, Sample,
};
pub use rollout::{
    collect_batch, collect_episode, compute_gae, gae, Provenance, Task, TaskDynamics, Trajectory,
    Transition,
};
pub use train::{evaluate_policy, train, EpochRecord, TrainingLog, TRAINING_LOG_HEADER};
pub use optim::{Optimizer, OptimizerState};
pub use update::{
    ppo_update, ppo_update_with_state, update_on_samples, PpoConfig, TrainerState, UpdateStats,
};
pub(crate) use update::clamp_policy;
