//! Cloud and edge digital twins and the planning / operation loops.
//!
//! Everything runs in-process. Interactions between the twins are written
//! to an [`EventLog`] whose logical clock totally orders them.

mod cache;
mod events;
mod scenario;
mod twin;

pub use cache::LfuCache;
pub use events::{edge_actor, Event, EventLog, CLOUD};
pub use scenario::{run_scenario, PlvnScript, ScenarioOutcome, ScenarioScript, StageScript, SwitchScript};
pub use twin::{
    baseline_reward, monitor_and_retrain, offline_planning, online_attach, AttachReport, CloudDt, DeployedModel, EdgeDt,
    EpisodeRecord, RetrainEvent, RetrainPolicy, RetrainTrigger, BASELINE_TAIL, EPISODE_LOG_HEADER, PROBE_EPISODES,
};
