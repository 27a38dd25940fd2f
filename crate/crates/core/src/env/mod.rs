//! Adaptive cooperative-perception MDP.
//!
//! Each slot the agent picks stand-alone or cooperative perception for every
//! CAV pair. The reward is the normalised computing-energy saving relative to
//! stand-alone mode, with a fixed penalty for cooperative pairs whose feature
//! transfer plus fused computation cannot finish within the slot deadline.

mod config;
mod energy;
mod sim;

pub use config::{EnvConfig, ResourcePattern, RESOURCE_LEVELS};
pub use energy::{
    cp_energy_and_feasibility, pair_gain, reference_energy, sp_energy, sp_frequency,
    spectral_efficiency,
};
pub use sim::{
    brute_force_best_action, immediate_gains, immediate_reward, reset, step,
    write_trajectory_csv, Action, Env, NetworkState, StepOutcome,
};
