//! Digital-twin assisted two-tier learning for vehicular network management.
//!
//! The crate contains a cooperative-perception network simulator ([`env`]), a
//! from-scratch PPO agent ([`ppo`]) on top of a small hand-differentiated MLP
//! ([`diffcore`]), first-order meta-training and adaptation ([`meta`]), the
//! cloud-side hierarchical model catalog ([`registry`]) and the edge/cloud
//! digital-twin loops that tie them together ([`orchestrator`]).
//! [`experiment`] runs the three-way case study and plots its curves.

pub mod diffcore;
pub mod env;
pub mod ppo;
pub mod meta;
pub mod error;
pub mod experiment;
pub mod orchestrator;
pub mod registry;
pub mod rng;

pub use error::{Error, Result};
