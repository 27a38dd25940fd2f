use serde::{Deserialize, Serialize};

use crate::diffcore::ParamVector;
use crate::error::{check_len, Result};

/// Descent rule for the PPO trainer and the meta-training outer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam { .. } => "adam",
        }
    }
}

/// Per-parameter-vector optimizer state (Adam moments and step count).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, len: usize) -> Self {
        let moments = match kind {
            Optimizer::Sgd => 0,
            Optimizer::Adam { .. } => len,
        };
        Self {
            kind,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
            t: 0,
        }
    }

    /// Applies one descent step of size `lr` along `grad` to `params`.
    pub fn step(&mut self, params: &mut ParamVector, lr: f64, grad: &ParamVector) -> Result<()> {
        check_len("optimizer step", params.len(), grad.len())?;
        match self.kind {
            Optimizer::Sgd => params.add_scaled(-lr, grad),
            Optimizer::Adam { beta1, beta2, eps } => {
                check_len("optimizer state", self.m.len(), params.len())?;
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t as i32);
                let c2 = 1.0 - beta2.powi(self.t as i32);
                let p = params.as_mut_slice();
                for (i, g) in grad.as_slice().iter().enumerate() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
                Ok(())
            }
        }
    }
}
