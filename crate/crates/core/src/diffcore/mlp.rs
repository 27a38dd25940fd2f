use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ParamVector;
use crate::error::{check_len, Error, Result};

/// Fully connected network with `tanh` hidden layers and an identity output.
///
/// Parameters are laid out layer by layer: the `n_out x n_in` weight matrix in
/// row-major order followed by the `n_out` biases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least 2 layers, got {}",
                layer_sizes.len()
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config("MLP layer sizes must be positive".into()));
        }
        Ok(Self { layer_sizes })
    }

    /// `input -> hidden x hidden -> output`, the topology used by both agent networks.
    pub fn two_hidden(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            layer_sizes: vec![input, hidden, hidden, output],
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut values = Vec::with_capacity(self.param_count());
        for w in self.layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            values.extend((0..n_in * n_out).map(|_| rng.random_range(-bound..=bound)));
            values.extend(std::iter::repeat_n(0.0, n_out));
        }
        ParamVector::new(values)
    }

    fn check(&self, params: &ParamVector, input: &[f64]) -> Result<()> {
        check_len("mlp parameters", self.param_count(), params.len())?;
        check_len("mlp input", self.input_dim(), input.len())
    }
}

/// Post-activation values of every layer from one forward pass, input included.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.activations.pop().unwrap()
    }
}

pub fn forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    Ok(forward_trace(spec, params, input)?.into_output())
}

pub fn forward_trace(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Trace> {
    spec.check(params, input)?;
    let p = params.as_slice();
    let layers = spec.layer_sizes.len() - 1;
    let mut activations = Vec::with_capacity(layers + 1);
    activations.push(input.to_vec());
    let mut offset = 0;
    for (l, w) in spec.layer_sizes.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let weights = &p[offset..offset + n_in * n_out];
        let biases = &p[offset + n_in * n_out..offset + (n_in + 1) * n_out];
        let x = &activations[l];
        let hidden = l + 1 < layers;
        let out: Vec<f64> = (0..n_out)
            .map(|o| {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let z = row.iter().zip(x).fold(biases[o], |acc, (w, x)| acc + w * x);
                if hidden {
                    z.tanh()
                } else {
                    z
                }
            })
            .collect();
        activations.push(out);
        offset += (n_in + 1) * n_out;
    }
    Ok(Trace { activations })
}

/// Gradient of a loss with respect to the parameters, given the loss gradient
/// at the network output.
pub fn backward(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    output_grad: &[f64],
) -> Result<ParamVector> {
    let trace = forward_trace(spec, params, input)?;
    let mut grad = vec![0.0; spec.param_count()];
    backward_into(spec, params, &trace, output_grad, &mut grad)?;
    Ok(ParamVector::new(grad))
}

/// Accumulates (adds) the parameter gradient for one traced sample into `grad`.
pub fn backward_into(
    spec: &MlpSpec,
    params: &ParamVector,
    trace: &Trace,
    output_grad: &[f64],
    grad: &mut [f64],
) -> Result<()> {
    check_len("mlp output gradient", spec.output_dim(), output_grad.len())?;
    check_len("mlp gradient buffer", spec.param_count(), grad.len())?;
    let p = params.as_slice();
    let sizes = &spec.layer_sizes;
    let mut delta = output_grad.to_vec();
    let mut offset = spec.param_count();
    for l in (0..sizes.len() - 1).rev() {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        offset -= (n_in + 1) * n_out;
        let x = &trace.activations[l];
        {
            let (gw, gb) = grad[offset..offset + (n_in + 1) * n_out].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (g, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                    *g += d * xi;
                }
                gb[o] += d;
            }
        }
        if l > 0 {
            let weights = &p[offset..offset + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (acc, w) in prev.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                    *acc += w * d;
                }
            }
            for (acc, a) in prev.iter_mut().zip(x) {
                *acc *= 1.0 - a * a;
            }
            delta = prev;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    #[test]
    fn param_count_formula() {
        let spec = MlpSpec::two_hidden(7, 64, 3);
        assert_eq!(spec.param_count(), 8 * 64 + 65 * 64 + 65 * 3);
        assert!(MlpSpec::new(vec![3]).is_err());
        assert!(MlpSpec::new(vec![3, 0, 1]).is_err());
    }

    #[test]
    fn zero_params_give_zero_output() {
        let spec = MlpSpec::new(vec![4, 8, 3]).unwrap();
        let params = ParamVector::zeros(spec.param_count());
        let out = forward(&spec, &params, &[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn affine_net_forward_and_backward() {
        let spec = MlpSpec::new(vec![1, 1]).unwrap();
        let params = ParamVector::new(vec![2.0, 1.0]);
        assert_eq!(forward(&spec, &params, &[3.0]).unwrap(), vec![7.0]);
        let g = backward(&spec, &params, &[3.0], &[1.0]).unwrap();
        assert_eq!(g.as_slice(), &[3.0, 1.0]);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradient() {
        let spec = MlpSpec::new(vec![3, 5, 2]).unwrap();
        let params = spec.init(&mut seeded_rng(1));
        let g = backward(&spec, &params, &[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let spec = MlpSpec::new(vec![2, 3, 1]).unwrap();
        let params = ParamVector::zeros(spec.param_count());
        assert!(forward(&spec, &params, &[1.0]).is_err());
        assert!(forward(&spec, &ParamVector::zeros(3), &[1.0, 2.0]).is_err());
        assert!(backward(&spec, &params, &[1.0, 2.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn init_respects_glorot_bounds() {
        let spec = MlpSpec::new(vec![7, 64, 3]).unwrap();
        let p = spec.init(&mut seeded_rng(9));
        let b1 = (6.0f64 / 71.0).sqrt();
        assert!(p.as_slice()[..7 * 64].iter().all(|v| v.abs() <= b1));
        assert!(p.as_slice()[7 * 64..8 * 64].iter().all(|&v| v == 0.0));
    }
}
