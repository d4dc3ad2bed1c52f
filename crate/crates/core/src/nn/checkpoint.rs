//! Self-describing JSON checkpoints.
//!
//! Layout (version 1):
//!
//! ```json
//! {
//!   "format": "geokan-checkpoint",
//!   "version": 1,
//!   "config": { "arch": "kan", ... },
//!   "sections": [
//!     { "name": "layer0.coef", "shape": [3, 24, 23],
//!       "encoding": "f64-le-base64", "data": "..." }
//!   ],
//!   "preprocessing": { "input_columns": [...], "output_columns": [...],
//!                      "input": {...}, "output": {...} },
//!   "metadata": { "seed": 0, "epochs": 200, ... }
//! }
//! ```
//!
//! Parameter values are stored as little-endian IEEE-754 doubles, so a
//! round trip is bit-exact. Sections appear in [`Network::named_params`]
//! order and are validated against the config on load.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Network, NetworkConfig, NnError};
use crate::autodiff::Tensor;
use crate::data::{Preprocessor, SplitPlan};

pub const CHECKPOINT_FORMAT: &str = "geokan-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
const ENCODING: &str = "f64-le-base64";

/// Fitted scaling for the network's inputs and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessingStats {
    pub input_columns: Vec<String>,
    pub output_columns: Vec<String>,
    pub input: Preprocessor,
    pub output: Preprocessor,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub epochs: usize,
    #[serde(default)]
    pub dataset_hash: Option<String>,
    #[serde(default)]
    pub case: Option<String>,
    #[serde(default)]
    pub best_epoch: Option<usize>,
    #[serde(default)]
    pub best_val_loss: Option<f64>,
    /// Row partition used for training, when known.
    #[serde(default)]
    pub split: Option<SplitPlan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub preprocessing: Option<PreprocessingStats>,
    pub metadata: Metadata,
}

#[derive(Serialize, Deserialize)]
struct Section {
    name: String,
    shape: Vec<usize>,
    encoding: String,
    data: String,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    config: NetworkConfig,
    sections: Vec<Section>,
    #[serde(default)]
    preprocessing: Option<PreprocessingStats>,
    #[serde(default)]
    metadata: Metadata,
}

fn encode(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

fn decode(name: &str, text: &str) -> Result<Vec<f64>, NnError> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| NnError::Parse(format!("section {name}: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(NnError::Parse(format!("section {name}: {} bytes is not a whole number of f64", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

impl Checkpoint {
    pub fn new(network: Network) -> Self {
        Self {
            network,
            preprocessing: None,
            metadata: Metadata::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let sections = self
            .network
            .named_params()
            .into_iter()
            .map(|(name, t)| Section {
                name,
                shape: t.shape().to_vec(),
                encoding: ENCODING.to_string(),
                data: encode(t.data()),
            })
            .collect();
        let doc = Document {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.network.config(),
            sections,
            preprocessing: self.preprocessing.clone(),
            metadata: self.metadata.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let doc: Document = serde_json::from_str(text).map_err(|e| NnError::Parse(e.to_string()))?;
        if doc.format != CHECKPOINT_FORMAT || doc.version != CHECKPOINT_VERSION {
            return Err(NnError::Version {
                format: doc.format,
                version: doc.version,
            });
        }
        let mut network = Network::init(&doc.config, 0)?;
        let mut sections = Vec::with_capacity(doc.sections.len());
        for s in doc.sections {
            if s.encoding != ENCODING {
                return Err(NnError::Parse(format!("section {}: unknown encoding {}", s.name, s.encoding)));
            }
            let values = decode(&s.name, &s.data)?;
            let t = Tensor::new(s.shape.clone(), values).map_err(|_| NnError::SectionShape {
                name: s.name.clone(),
                expected: s.shape.clone(),
                found: vec![],
            })?;
            sections.push((s.name, t));
        }
        network.load_named(sections)?;
        if let Some(p) = &doc.preprocessing {
            if p.input.len() != network.input_dim() || p.output.len() != network.output_dim() {
                return Err(NnError::Parse(format!(
                    "preprocessing covers {} inputs and {} outputs, network has {} and {}",
                    p.input.len(),
                    p.output.len(),
                    network.input_dim(),
                    network.output_dim()
                )));
            }
        }
        Ok(Self {
            network,
            preprocessing: doc.preprocessing,
            metadata: doc.metadata,
        })
    }

    /// Maps raw inputs to raw outputs: scales the inputs, runs the network
    /// and inverts the output scaling.
    pub fn predict_physical(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let p = self
            .preprocessing
            .as_ref()
            .ok_or_else(|| NnError::Preprocess("checkpoint has no preprocessing statistics".into()))?;
        let xs = p.input.apply(x).map_err(|e| NnError::Preprocess(e.to_string()))?;
        let ys = self.network.predict(&xs)?;
        p.output.invert(&ys).map_err(|e| NnError::Preprocess(e.to_string()))
    }

    /// Writes to a temporary sibling first, then renames over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NnError> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
