use rand::Rng;

use super::{Forward, MlpConfig, NnError};
use crate::autodiff::{Graph, Tensor, Var};

/// Affine layer `x W + b` with `W: [in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    config: MlpConfig,
    layers: Vec<Dense>,
}

impl Mlp {
    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub(super) fn init(config: &MlpConfig, rng: &mut impl Rng) -> Self {
        let w = super::widths(config.input_dim, &config.hidden, config.output_dim);
        let layers = w
            .windows(2)
            .map(|p| {
                let (fan_in, fan_out) = (p[0], p[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-bound..bound)).collect::<Vec<_>>();
                let weight = Tensor::new(vec![fan_in, fan_out], draw(fan_in * fan_out)).expect("shape");
                let bias = Tensor::new(vec![fan_out], draw(fan_out)).expect("shape");
                Dense {
                    weight: weight.with_grad(),
                    bias: bias.with_grad(),
                }
            })
            .collect();
        Self {
            config: config.clone(),
            layers,
        }
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub(super) fn forward(&self, g: &mut Graph, x: Var) -> Result<Forward, NnError> {
        let mut params = Vec::with_capacity(2 * self.layers.len());
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let w = g.param(&layer.weight);
            let b = g.param(&layer.bias);
            params.extend([w, b]);
            let z = g.matmul(h, w)?;
            let z = g.add_bias(z, b)?;
            h = if i < last { self.config.activation.apply(g, z) } else { z };
            if g.check_finite(h, "mlp layer").is_err() {
                return Err(NnError::NonFinite { layer: i });
            }
        }
        Ok(Forward { output: h, params })
    }

    pub(super) fn named_params(&self) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| [(format!("layer{i}.weight"), &l.weight), (format!("layer{i}.bias"), &l.bias)])
            .collect()
    }

    pub(super) fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}
