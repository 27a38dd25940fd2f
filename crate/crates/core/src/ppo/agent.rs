use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffcore::{
    entropy_from_log_std, forward, gaussian_log_prob, GaussianHead, MlpSpec, ParamVector,
};
use crate::env::{Action, EnvConfig};
use crate::error::{check_len, Result};

pub const HIDDEN_UNITS: usize = 64;
pub const INITIAL_LOG_STD: f64 = -0.5;
/// A raw Gaussian sample above this value selects cooperative perception.
pub const COOPERATION_THRESHOLD: f64 = 0.5;
/// Output multiplier of the value network, so returns of a few tens stay
/// within easy reach of a small-weight linear output layer.
pub const VALUE_SCALE: f64 = 10.0;

/// Shapes of the policy-mean and value networks.
///
/// The policy vector is the mean-network parameters followed by one
/// state-independent log-std per action dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub policy_net: MlpSpec,
    pub value_net: MlpSpec,
    /// `V(s) = value_scale * value_net(s)`.
    pub value_scale: f64,
}

impl AgentSpec {
    pub fn new(state_dim: usize, action_dim: usize, hidden: usize) -> Self {
        Self {
            policy_net: MlpSpec::two_hidden(state_dim, hidden, action_dim),
            value_net: MlpSpec::two_hidden(state_dim, hidden, 1),
            value_scale: VALUE_SCALE,
        }
    }

    pub fn for_env(config: &EnvConfig) -> Self {
        Self::new(config.state_dim(), config.n_pairs, HIDDEN_UNITS)
    }

    pub fn action_dim(&self) -> usize {
        self.policy_net.output_dim()
    }

    pub fn state_dim(&self) -> usize {
        self.policy_net.input_dim()
    }

    pub fn policy_len(&self) -> usize {
        self.policy_net.param_count() + self.action_dim()
    }

    pub fn value_len(&self) -> usize {
        self.value_net.param_count()
    }

    /// Fresh parameters: Glorot weights, zero biases, log-std at `INITIAL_LOG_STD`.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> AgentParams {
        let mut policy = self.policy_net.init(rng).into_inner();
        policy.extend(std::iter::repeat_n(INITIAL_LOG_STD, self.action_dim()));
        let value = self.value_net.init(rng);
        AgentParams {
            policy: ParamVector::new(policy),
            value,
        }
    }

    pub fn check(&self, params: &AgentParams) -> Result<()> {
        check_len("policy parameters", self.policy_len(), params.policy.len())?;
        check_len("value parameters", self.value_len(), params.value.len())
    }

    /// Splits a policy vector into (mean-network params, log-std).
    pub fn split_policy<'a>(&self, policy: &'a ParamVector) -> (&'a [f64], &'a [f64]) {
        policy.as_slice().split_at(self.policy_net.param_count())
    }

    pub fn mean_net_params(&self, policy: &ParamVector) -> ParamVector {
        ParamVector::new(self.split_policy(policy).0.to_vec())
    }

    pub fn head(&self, params: &AgentParams, features: &[f64]) -> Result<GaussianHead> {
        let (net, log_std) = self.split_policy(&params.policy);
        let mean = forward(&self.policy_net, &ParamVector::new(net.to_vec()), features)?;
        GaussianHead::new(mean, log_std.to_vec())
    }

    pub fn value(&self, params: &AgentParams, features: &[f64]) -> Result<f64> {
        Ok(self.value_scale * forward(&self.value_net, &params.value, features)?[0])
    }

    pub fn entropy(&self, params: &AgentParams) -> f64 {
        entropy_from_log_std(self.split_policy(&params.policy).1)
    }

    /// Metadata block for parameter-file sidecars.
    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "policy_net": self.policy_net.layer_sizes(),
            "value_net": self.value_net.layer_sizes(),
            "log_std": self.action_dim(),
            "value_scale": self.value_scale,
            "hidden_activation": "tanh",
            "output_activation": "identity",
        })
    }
}

/// Parameters of one agent (meta model or individual model).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub policy: ParamVector,
    pub value: ParamVector,
}

impl AgentParams {
    pub fn is_finite(&self) -> bool {
        self.policy.is_finite() && self.value.is_finite()
    }

    /// Concatenated `policy ++ value`, the on-disk form.
    pub fn flatten(&self) -> ParamVector {
        let mut v = self.policy.as_slice().to_vec();
        v.extend_from_slice(self.value.as_slice());
        ParamVector::new(v)
    }

    pub fn unflatten(spec: &AgentSpec, flat: &ParamVector) -> Result<Self> {
        check_len(
            "agent parameters",
            spec.policy_len() + spec.value_len(),
            flat.len(),
        )?;
        let (p, v) = flat.as_slice().split_at(spec.policy_len());
        Ok(Self {
            policy: ParamVector::new(p.to_vec()),
            value: ParamVector::new(v.to_vec()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledAction {
    /// Continuous Gaussian draw, one per pair.
    pub raw: Vec<f64>,
    pub action: Action,
    /// Log-density of `raw` under the sampling head.
    pub log_prob: f64,
}

/// Maps raw Gaussian samples to perception modes.
pub fn discretize(raw: &[f64]) -> Action {
    Action {
        modes: raw.iter().map(|&r| r > COOPERATION_THRESHOLD).collect(),
    }
}

pub fn sample_from_head<R: Rng + ?Sized>(head: &GaussianHead, rng: &mut R) -> Result<SampledAction> {
    let raw: Vec<f64> = (0..head.dim())
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            head.mean[i] + head.std(i) * z
        })
        .collect();
    let log_prob = gaussian_log_prob(head, &raw)?;
    Ok(SampledAction {
        action: discretize(&raw),
        raw,
        log_prob,
    })
}

/// Samples a continuous action from the policy and discretises it.
pub fn sample_action<R: Rng + ?Sized>(
    spec: &AgentSpec,
    params: &AgentParams,
    features: &[f64],
    rng: &mut R,
) -> Result<SampledAction> {
    sample_from_head(&spec.head(params, features)?, rng)
}
