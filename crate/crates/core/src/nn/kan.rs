use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Forward, KanConfig, NnError};
use crate::autodiff::{Graph, Tensor, Var};
use crate::spline::SplineGrid;

/// One KAN layer. Every edge `(i, o)` carries the univariate function
///
/// ```text
/// phi(x) = base[i, o] * silu(x) + scale[i, o] * sum_j coef[i, o, j] * B_j(x)
/// ```
///
/// where `scale` is fixed to 1 unless a standalone spline scale is enabled.
/// Output neuron `o` sums `phi` over all inputs `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer {
    pub grid: SplineGrid,
    /// `[n_in, n_out, g + d]`
    pub coef: Tensor,
    /// `[n_in, n_out]`
    pub base: Tensor,
    /// `[n_in, n_out]`, present only with a standalone spline scale.
    pub spline_scale: Option<Tensor>,
}

impl KanLayer {
    pub fn n_in(&self) -> usize {
        self.base.shape()[0]
    }

    pub fn n_out(&self) -> usize {
        self.base.shape()[1]
    }

    /// Evaluates the edge function `phi_{i,o}` at a scalar point.
    pub fn edge(&self, i: usize, o: usize, x: f64) -> f64 {
        let nb = self.grid.num_basis();
        let mut b = vec![0.0; nb];
        self.grid.basis_into(x, &mut b);
        let n_out = self.n_out();
        let c = &self.coef.data()[(i * n_out + o) * nb..(i * n_out + o + 1) * nb];
        let spline: f64 = b.iter().zip(c).map(|(b, c)| b * c).sum();
        let scale = self.spline_scale.as_ref().map_or(1.0, |s| s.data()[i * n_out + o]);
        self.base.data()[i * n_out + o] * crate::autodiff::silu(x) + scale * spline
    }

    fn forward(&self, g: &mut Graph, x: Var, params: &mut Vec<Var>) -> Result<Var, NnError> {
        let coef = g.param(&self.coef);
        let base = g.param(&self.base);
        params.extend([coef, base]);
        let coef = match &self.spline_scale {
            Some(s) => {
                let s = g.param(s);
                params.push(s);
                g.edge_scale(coef, s)?
            }
            None => coef,
        };
        let act = g.silu(x);
        let linear = g.matmul(act, base)?;
        let basis = g.spline_basis(x, &self.grid)?;
        let spline = g.edge_contract(basis, coef)?;
        Ok(g.add(linear, spline)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kan {
    config: KanConfig,
    layers: Vec<KanLayer>,
}

impl Kan {
    pub(super) fn init(config: &KanConfig, rng: &mut impl Rng) -> Result<Self, NnError> {
        let (lo, hi) = config.grid_range;
        let grid = SplineGrid::new(config.degree, config.grid_size, lo, hi)?;
        let nb = grid.num_basis();
        let normal = Normal::new(0.0, 0.1 / (nb as f64).sqrt()).expect("positive std");
        let w = super::widths(config.input_dim, &config.hidden, config.output_dim);
        let layers = w
            .windows(2)
            .map(|p| {
                let (n_in, n_out) = (p[0], p[1]);
                let coef: Vec<f64> = (0..n_in * n_out * nb).map(|_| normal.sample(rng)).collect();
                let bound = 1.0 / (n_in as f64).sqrt();
                let base: Vec<f64> = (0..n_in * n_out).map(|_| rng.random_range(-bound..bound)).collect();
                KanLayer {
                    grid: grid.clone(),
                    coef: Tensor::new(vec![n_in, n_out, nb], coef).expect("shape").with_grad(),
                    base: Tensor::new(vec![n_in, n_out], base).expect("shape").with_grad(),
                    spline_scale: config
                        .standalone_spline_scale
                        .then(|| Tensor::new(vec![n_in, n_out], vec![1.0; n_in * n_out]).expect("shape").with_grad()),
                }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    pub fn config(&self) -> &KanConfig {
        &self.config
    }

    pub fn layers(&self) -> &[KanLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [KanLayer] {
        &mut self.layers
    }

    pub(super) fn forward(&self, g: &mut Graph, x: Var) -> Result<Forward, NnError> {
        let mut params = Vec::with_capacity(3 * self.layers.len());
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, h, &mut params)?;
            if g.check_finite(h, "kan layer").is_err() {
                return Err(NnError::NonFinite { layer: i });
            }
        }
        Ok(Forward { output: h, params })
    }

    pub(super) fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.coef"), &l.coef));
            out.push((format!("layer{i}.base"), &l.base));
            if let Some(s) = &l.spline_scale {
                out.push((format!("layer{i}.spline_scale"), s));
            }
        }
        out
    }

    pub(super) fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.coef);
            out.push(&mut l.base);
            if let Some(s) = &mut l.spline_scale {
                out.push(s);
            }
        }
        out
    }
}
