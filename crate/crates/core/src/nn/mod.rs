//! MLP and KAN networks on top of the autodiff tape.
//!
//! Both architectures map a `[batch, p]` input to a `[batch, q]` output with
//! a linear head. Parameters live in [`Tensor`]s owned by the network; a
//! forward pass copies them onto a fresh [`Graph`] and returns the leaf
//! handles in [`Network::params`] order so gradients can be copied back.
//!
//! Parameter counting follows one convention for both the closed form
//! ([`NetworkConfig::param_count`]) and the allocation: an MLP layer has
//! `in * out + out` scalars; a KAN edge has `g + d` spline coefficients and
//! one base weight, plus one spline scale when
//! [`KanConfig::standalone_spline_scale`] is set. KAN layers carry no bias.

mod checkpoint;
mod kan;
mod mlp;

pub use checkpoint::{Checkpoint, Metadata, PreprocessingStats, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use kan::{Kan, KanLayer};
pub use mlp::{Dense, Mlp};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Graph, Tensor, Var};
use crate::spline::SplineError;

#[derive(Debug, Error)]
pub enum NnError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("input has {got} columns, network expects {expected}")]
    InputWidth { expected: usize, got: usize },
    #[error("non-finite activations in layer {layer}")]
    NonFinite { layer: usize },
    #[error("preprocessing: {0}")]
    Preprocess(String),
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse error: {0}")]
    Parse(String),
    #[error("unsupported checkpoint {format} version {version}")]
    Version { format: String, version: u32 },
    #[error("checkpoint section {name}: expected shape {expected:?}, found {found:?}")]
    SectionShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint sections do not match the config: expected {expected:?}, found {found:?}")]
    Sections {
        expected: Vec<String>,
        found: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Mish,
    Silu,
    Identity,
}

impl Activation {
    fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Mish => g.mish(x),
            Activation::Silu => g.silu(x),
            Activation::Identity => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    /// Applied after every hidden layer; the output layer is linear.
    pub activation: Activation,
}

fn default_grid_range() -> (f64, f64) {
    (-0.1, 1.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    /// Polynomial degree of the edge splines.
    pub degree: usize,
    /// Number of grid intervals.
    pub grid_size: usize,
    #[serde(default)]
    pub standalone_spline_scale: bool,
    #[serde(default = "default_grid_range")]
    pub grid_range: (f64, f64),
}

impl KanConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize, degree: usize, grid_size: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden,
            degree,
            grid_size,
            standalone_spline_scale: false,
            grid_range: default_grid_range(),
        }
    }
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden,
            activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case")]
pub enum NetworkConfig {
    Mlp(MlpConfig),
    Kan(KanConfig),
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input);
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

impl NetworkConfig {
    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        match self {
            NetworkConfig::Mlp(c) => widths(c.input_dim, &c.hidden, c.output_dim),
            NetworkConfig::Kan(c) => widths(c.input_dim, &c.hidden, c.output_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.widths()[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths().last().expect("at least two widths")
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.widths().iter().any(|&w| w == 0) {
            return Err(NnError::InvalidConfig("all layer widths must be at least 1".into()));
        }
        if let NetworkConfig::Kan(c) = self {
            if c.degree < 1 {
                return Err(NnError::InvalidConfig("KAN spline degree must be at least 1".into()));
            }
            if c.grid_size < 2 {
                return Err(NnError::InvalidConfig("KAN grid needs at least 2 intervals".into()));
            }
            crate::spline::SplineGrid::new(c.degree, c.grid_size, c.grid_range.0, c.grid_range.1)?;
        }
        Ok(())
    }

    /// Closed-form number of trainable scalars.
    pub fn param_count(&self) -> usize {
        let w = self.widths();
        match self {
            NetworkConfig::Mlp(_) => w.windows(2).map(|p| p[0] * p[1] + p[1]).sum(),
            NetworkConfig::Kan(c) => {
                let edges: usize = w.windows(2).map(|p| p[0] * p[1]).sum();
                let per_edge = c.grid_size + c.degree + 1 + usize::from(c.standalone_spline_scale);
                edges * per_edge
            }
        }
    }

    /// Short human-readable architecture string, e.g. `kan 3-[28x4]-18 d7 g10`.
    pub fn describe(&self) -> String {
        let hidden = |h: &[usize]| {
            if h.is_empty() {
                "[]".to_string()
            } else if h.iter().all(|&x| x == h[0]) {
                format!("[{}x{}]", h[0], h.len())
            } else {
                format!("{h:?}")
            }
        };
        match self {
            NetworkConfig::Mlp(c) => format!(
                "mlp {}-{}-{} {:?}",
                c.input_dim,
                hidden(&c.hidden),
                c.output_dim,
                c.activation
            ),
            NetworkConfig::Kan(c) => format!(
                "kan {}-{}-{} d{} g{}",
                c.input_dim,
                hidden(&c.hidden),
                c.output_dim,
                c.degree,
                c.grid_size
            ),
        }
    }
}

/// Output of a forward pass recorded on a graph.
pub struct Forward {
    pub output: Var,
    /// Leaf handles in [`Network::params`] order.
    pub params: Vec<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Mlp(Mlp),
    Kan(Kan),
}

impl Network {
    /// Randomly initialised network; the same seed gives identical weights.
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match config {
            NetworkConfig::Mlp(c) => Network::Mlp(Mlp::init(c, &mut rng)),
            NetworkConfig::Kan(c) => Network::Kan(Kan::init(c, &mut rng)?),
        })
    }

    pub fn config(&self) -> NetworkConfig {
        match self {
            Network::Mlp(m) => NetworkConfig::Mlp(m.config().clone()),
            Network::Kan(k) => NetworkConfig::Kan(k.config().clone()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.config().input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.config().output_dim()
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Forward, NnError> {
        let cols = g.value(x).shape().get(1).copied().unwrap_or(0);
        if g.value(x).shape().len() != 2 || cols != self.input_dim() {
            return Err(NnError::InputWidth {
                expected: self.input_dim(),
                got: cols,
            });
        }
        match self {
            Network::Mlp(m) => m.forward(g, x),
            Network::Kan(k) => k.forward(g, x),
        }
    }

    /// Inference without gradients, in row chunks.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor, NnError> {
        const CHUNK: usize = 2048;
        if x.shape().len() != 2 || x.cols() != self.input_dim() {
            return Err(NnError::InputWidth {
                expected: self.input_dim(),
                got: x.shape().get(1).copied().unwrap_or(0),
            });
        }
        let (n, q) = (x.rows(), self.output_dim());
        let mut out = Vec::with_capacity(n * q);
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let idx: Vec<usize> = (start..end).collect();
            let mut g = Graph::no_grad();
            let xv = g.constant(x.select_rows(&idx));
            let fwd = self.forward(&mut g, xv)?;
            out.extend_from_slice(g.value(fwd.output).data());
            start = end;
        }
        Ok(Tensor::new(vec![n, q], out)?)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Network::Mlp(m) => m.params_mut(),
            Network::Kan(k) => k.params_mut(),
        }
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        match self {
            Network::Mlp(m) => m.named_params(),
            Network::Kan(k) => k.named_params(),
        }
    }

    /// Number of trainable scalars actually allocated.
    pub fn num_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        crate::autodiff::zero_grad(self.params_mut());
    }

    /// Adds the graph's gradients for `vars` into the parameter buffers.
    pub fn accumulate_grads(&mut self, g: &Graph, vars: &[Var]) -> Result<(), NnError> {
        for (p, &v) in self.params_mut().into_iter().zip(vars) {
            if let Some(gr) = g.grad(v) {
                p.accumulate_grad(gr)?;
            }
        }
        Ok(())
    }

    /// Replaces parameter values from `(name, tensor)` pairs, checking names
    /// and shapes against the current network.
    pub(crate) fn load_named(&mut self, sections: Vec<(String, Tensor)>) -> Result<(), NnError> {
        let expected: Vec<(String, Vec<usize>)> = self
            .named_params()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        let found: Vec<String> = sections.iter().map(|(n, _)| n.clone()).collect();
        if expected.len() != sections.len() || expected.iter().zip(&found).any(|((e, _), f)| e != f) {
            return Err(NnError::Sections {
                expected: expected.into_iter().map(|(n, _)| n).collect(),
                found,
            });
        }
        for ((name, shape), (_, t)) in expected.iter().zip(&sections) {
            if t.shape() != &shape[..] {
                return Err(NnError::SectionShape {
                    name: name.clone(),
                    expected: shape.clone(),
                    found: t.shape().to_vec(),
                });
            }
            if !t.is_finite() {
                return Err(NnError::Parse(format!("section {name} holds non-finite values")));
            }
        }
        for (p, (_, t)) in self.params_mut().into_iter().zip(sections) {
            p.data_mut().copy_from_slice(t.data());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parameter_counts() {
        let mlp = NetworkConfig::Mlp(MlpConfig::new(3, vec![192; 5], 18, Activation::Mish));
        assert_eq!(mlp.param_count(), 152_466);
        let kan = NetworkConfig::Kan(KanConfig::new(3, vec![28; 4], 18, 7, 10));
        assert_eq!(kan.param_count(), 52_920);
        let lin = NetworkConfig::Mlp(MlpConfig::new(3, vec![], 18, Activation::Mish));
        assert_eq!(lin.param_count(), 72);
    }

    #[test]
    fn allocation_matches_closed_form_over_a_grid() {
        for hidden in [vec![], vec![1], vec![4, 2], vec![3, 3, 3]] {
            for (p, q) in [(1, 1), (3, 8), (4, 15)] {
                let m = NetworkConfig::Mlp(MlpConfig::new(p, hidden.clone(), q, Activation::Silu));
                assert_eq!(Network::init(&m, 0).unwrap().num_params(), m.param_count());
                for d in 1..4 {
                    for grid in [2, 5] {
                        for scale in [false, true] {
                            let mut c = KanConfig::new(p, hidden.clone(), q, d, grid);
                            c.standalone_spline_scale = scale;
                            let k = NetworkConfig::Kan(c);
                            assert_eq!(Network::init(&k, 0).unwrap().num_params(), k.param_count());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        let zero = NetworkConfig::Mlp(MlpConfig::new(3, vec![0], 2, Activation::Mish));
        assert!(Network::init(&zero, 0).is_err());
        let flat = NetworkConfig::Kan(KanConfig::new(3, vec![4], 2, 0, 5));
        assert!(Network::init(&flat, 0).is_err());
        let coarse = NetworkConfig::Kan(KanConfig::new(3, vec![4], 2, 3, 1));
        assert!(Network::init(&coarse, 0).is_err());
    }

    #[test]
    fn config_json_is_tagged() {
        let k = NetworkConfig::Kan(KanConfig::new(3, vec![24; 4], 8, 8, 15));
        let s = serde_json::to_string(&k).unwrap();
        assert!(s.contains("\"arch\":\"kan\""));
        assert_eq!(serde_json::from_str::<NetworkConfig>(&s).unwrap(), k);
        let partial = r#"{"arch":"kan","input_dim":3,"output_dim":8,"hidden":[4],"degree":3,"grid_size":5}"#;
        let parsed: NetworkConfig = serde_json::from_str(partial).unwrap();
        assert_eq!(parsed, NetworkConfig::Kan(KanConfig::new(3, vec![4], 8, 3, 5)));
    }

    #[test]
    fn wrong_input_width_is_reported() {
        let net = Network::init(&NetworkConfig::Mlp(MlpConfig::new(3, vec![4], 2, Activation::Mish)), 1).unwrap();
        let err = net.predict(&Tensor::zeros(vec![5, 4])).unwrap_err();
        assert!(matches!(err, NnError::InputWidth { expected: 3, got: 4 }));
    }

    #[test]
    fn describe_is_compact() {
        let k = NetworkConfig::Kan(KanConfig::new(3, vec![28; 4], 18, 7, 10));
        assert_eq!(k.describe(), "kan 3-[28x4]-18 d7 g10");
    }
}
