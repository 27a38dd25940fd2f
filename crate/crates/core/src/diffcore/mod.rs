//! Numeric substrate: flat parameter vectors, a fixed-topology MLP with a
//! hand-derived backward pass, and diagonal Gaussian policy primitives.
//!
//! Everything here is a pure function of its arguments.

mod gaussian;
mod mlp;
mod param;

pub use gaussian::{
    clamp_log_std, entropy_from_log_std, gaussian_entropy, gaussian_log_prob, GaussianHead,
    LOG_STD_MAX, LOG_STD_MIN,
};
pub use mlp::{backward, backward_into, forward, forward_trace, MlpSpec, Trace};
pub use param::{load_params, save_params, sidecar_path, ParamSidecar, ParamVector};
