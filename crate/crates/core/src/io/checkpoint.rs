//! Versioned, self-describing JSON checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{ModelKind, ModelSpec, Network};
use crate::tensor::ParamStore;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Shapes at a glance; the rebuildable descriptor is [`Checkpoint::model`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: ModelKind,
    pub max_n: usize,
    pub node_ids: bool,
    /// Layer widths from input to output.
    pub dims: Vec<usize>,
    /// GCN kernel count.
    pub kernels: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    /// SHA-256 of the training configuration, hex encoded.
    pub config_digest: String,
    pub source_network: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub architecture: Architecture,
    pub model: ModelSpec,
    pub weights: Vec<WeightTensor>,
    pub metadata: TrainingMetadata,
}

/// Hex SHA-256 of a value's JSON form.
pub fn config_digest<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn architecture(network: &Network) -> Architecture {
    let spec = network.spec();
    let (node_ids, dims, kernels) = match (&spec, network) {
        (ModelSpec::Gcn(c), Network::Gcn(m)) => (c.node_ids, c.dims(), Some(m.kernel_count())),
        (ModelSpec::Mlp(c), _) => {
            let mut d = vec![c.input_dim()];
            d.extend(&c.hidden);
            d.push(c.max_n);
            (false, d, None)
        }
        (ModelSpec::Lstm(c), _) => {
            let mut d = vec![c.step_input_dim()];
            d.extend(std::iter::repeat_n(c.output_width(), c.layers));
            d.push(1);
            (false, d, None)
        }
        _ => unreachable!("spec derived from network"),
    };
    Architecture {
        kind: spec.kind(),
        max_n: spec.max_n(),
        node_ids,
        dims,
        kernels,
    }
}

impl Checkpoint {
    pub fn from_network(network: &Network, metadata: TrainingMetadata) -> Self {
        let params = network.params();
        let weights = params
            .names()
            .iter()
            .zip(params.values())
            .map(|(name, m)| WeightTensor {
                name: name.clone(),
                shape: [m.rows(), m.cols()],
                values: m.to_rows(),
            })
            .collect();
        Self {
            format_version: CHECKPOINT_VERSION,
            architecture: architecture(network),
            model: network.spec(),
            weights,
            metadata,
        }
    }

    /// Rebuilds the network and loads the stored weights.
    pub fn network(&self) -> Result<Network> {
        let mut store = ParamStore::new();
        for w in &self.weights {
            let m = if w.values.is_empty() {
                Matrix::zeros(w.shape[0], w.shape[1])
            } else {
                Matrix::from_rows(&w.values)?
            };
            if m.shape() != (w.shape[0], w.shape[1]) {
                return Err(Error::Shape(format!(
                    "weight {} declares {:?} but holds {:?}",
                    w.name,
                    w.shape,
                    m.shape()
                )));
            }
            store.push(w.name.clone(), m);
        }
        let mut network = Network::new(&self.model, 0)?;
        network.params_mut().load(&store)?;
        Ok(network)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Format("checkpoint has no format_version".into()))?;
        if found != u64::from(CHECKPOINT_VERSION) {
            return Err(Error::Version {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                expected: CHECKPOINT_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
