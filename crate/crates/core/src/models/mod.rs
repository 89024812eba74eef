//! Neural interference estimators: multi-kernel GCN, MLP and bidirectional LSTM.

mod gcn;
mod kernels;
mod lstm;
mod mlp;
mod padding;

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::{BoundParams, ParamStore, Tape, Var};

pub use gcn::{gcn_forward, GcnConfig, GcnModel};
pub use kernels::{build_kernels, rssi_weight, surrogate_rssi, KernelConfig, KernelNorm, KernelSet, RSSI_FULL_WEIGHT_DBM};
pub use lstm::{lstm_forward, LstmConfig, LstmModel};
pub use mlp::{mlp_forward, MlpConfig, MlpModel};
pub use padding::{pad_inputs, PaddedSample};

/// Default model capacity in nodes.
pub const DEFAULT_MAX_N: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Mlp,
    Lstm,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Mlp => "mlp",
            ModelKind::Lstm => "lstm",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Self::Gcn),
            "mlp" => Ok(Self::Mlp),
            "lstm" => Ok(Self::Lstm),
            other => Err(Error::Config(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Architecture descriptor; enough to rebuild an untrained network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Gcn(GcnConfig),
    Mlp(MlpConfig),
    Lstm(LstmConfig),
}

impl ModelSpec {
    /// Full-size default architecture of the given kind.
    pub fn default_for(kind: ModelKind, max_n: usize, node_ids: bool) -> Self {
        match kind {
            ModelKind::Gcn => ModelSpec::Gcn(GcnConfig::new(max_n, node_ids)),
            ModelKind::Mlp => ModelSpec::Mlp(MlpConfig::new(max_n)),
            ModelKind::Lstm => ModelSpec::Lstm(LstmConfig::new(max_n)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Gcn(_) => ModelKind::Gcn,
            ModelSpec::Mlp(_) => ModelKind::Mlp,
            ModelSpec::Lstm(_) => ModelKind::Lstm,
        }
    }

    pub fn max_n(&self) -> usize {
        match self {
            ModelSpec::Gcn(c) => c.max_n,
            ModelSpec::Mlp(c) => c.max_n,
            ModelSpec::Lstm(c) => c.max_n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum PreparedInput {
    Graph { features: Matrix, kernels: Vec<Matrix> },
    Padded { loads: Vec<f64>, adjacency: Matrix },
}

/// A sample converted once into the tensors a particular network consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    n: usize,
    input: PreparedInput,
    targets: Vec<f64>,
    mask: Vec<f64>,
}

impl Prepared {
    /// Real node count.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn mask(&self) -> &[f64] {
        &self.mask
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    Gcn(GcnModel),
    Mlp(MlpModel),
    Lstm(LstmModel),
}

impl Network {
    /// Freshly initialised network; weights are a function of `seed` only.
    pub fn new(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match spec {
            ModelSpec::Gcn(c) => Network::Gcn(GcnModel::new(c.clone(), &mut rng)?),
            ModelSpec::Mlp(c) => Network::Mlp(MlpModel::new(c.clone(), &mut rng)?),
            ModelSpec::Lstm(c) => Network::Lstm(LstmModel::new(c.clone(), &mut rng)?),
        })
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            Network::Gcn(m) => ModelSpec::Gcn(m.config.clone()),
            Network::Mlp(m) => ModelSpec::Mlp(m.config.clone()),
            Network::Lstm(m) => ModelSpec::Lstm(m.config.clone()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.spec().kind()
    }

    pub fn max_n(&self) -> usize {
        match self {
            Network::Gcn(m) => m.config.max_n,
            Network::Mlp(m) => m.config.max_n,
            Network::Lstm(m) => m.config.max_n,
        }
    }

    /// Whether the network reads one-hot node IDs.
    pub fn uses_node_ids(&self) -> bool {
        matches!(self, Network::Gcn(m) if m.config.node_ids)
    }

    pub fn params(&self) -> &ParamStore {
        match self {
            Network::Gcn(m) => &m.params,
            Network::Mlp(m) => &m.params,
            Network::Lstm(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        match self {
            Network::Gcn(m) => &mut m.params,
            Network::Mlp(m) => &mut m.params,
            Network::Lstm(m) => &mut m.params,
        }
    }

    /// Converts a sample into model inputs. `zero_ids` blanks the node-ID
    /// block, for networks other than the one the model was trained on.
    pub fn prepare(&self, sample: &LabeledSample, zero_ids: bool) -> Result<Prepared> {
        sample.validate()?;
        let n = sample.n();
        let max_n = self.max_n();
        if n > max_n {
            return Err(Error::Capacity { n, max_n });
        }
        match self {
            Network::Gcn(m) => {
                let features = gcn_features(sample, &m.config, zero_ids)?;
                let kernels = build_kernels(sample.rssi.as_ref(), &sample.topology, &m.config.kernels)?;
                Ok(Prepared {
                    n,
                    input: PreparedInput::Graph {
                        features,
                        kernels: kernels.into_kernels(),
                    },
                    targets: sample.labels.clone(),
                    mask: vec![1.0; n],
                })
            }
            Network::Mlp(_) | Network::Lstm(_) => {
                let p = pad_inputs(sample, max_n)?;
                Ok(Prepared {
                    n,
                    input: PreparedInput::Padded {
                        loads: p.loads,
                        adjacency: p.adjacency,
                    },
                    targets: p.labels,
                    mask: p.mask,
                })
            }
        }
    }

    pub fn prepare_dataset(&self, dataset: &Dataset, zero_ids: bool) -> Result<Vec<Prepared>> {
        dataset.samples.iter().map(|s| self.prepare(s, zero_ids)).collect()
    }

    /// Shape of the stacked output for a batch: graph models emit one row per
    /// real node, padded models one row per sample.
    fn output_shape(&self, batch: &[&Prepared]) -> (usize, usize) {
        match self {
            Network::Gcn(_) => (batch.iter().map(|p| p.n).sum(), 1),
            _ => (batch.len(), self.max_n()),
        }
    }

    pub(crate) fn batch_targets(&self, batch: &[&Prepared]) -> (Matrix, Matrix) {
        let (r, c) = self.output_shape(batch);
        let targets = batch.iter().flat_map(|p| p.targets.iter().copied()).collect();
        let mask = batch.iter().flat_map(|p| p.mask.iter().copied()).collect();
        (Matrix::from_raw(r, c, targets), Matrix::from_raw(r, c, mask))
    }

    pub(crate) fn forward_prepared<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        batch: &[&Prepared],
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        match self {
            Network::Gcn(m) => {
                let mut rows = Vec::new();
                let mut kernel_count = None;
                for p in batch {
                    let PreparedInput::Graph { features, kernels } = &p.input else {
                        return Err(Error::Config("sample prepared for a different model".into()));
                    };
                    if *kernel_count.get_or_insert(kernels.len()) != kernels.len() {
                        return Err(Error::Shape("mixed kernel counts in batch".into()));
                    }
                    rows.extend_from_slice(features.as_slice());
                }
                let d0 = m.config.input_dim();
                let total: usize = batch.iter().map(|p| p.n).sum();
                let x = tape.constant(Matrix::from_raw(total, d0, rows));
                let k = kernel_count.unwrap_or(0);
                let blocks: Vec<Rc<[Matrix]>> = (0..k)
                    .map(|j| {
                        batch
                            .iter()
                            .map(|p| match &p.input {
                                PreparedInput::Graph { kernels, .. } => kernels[j].clone(),
                                PreparedInput::Padded { .. } => unreachable!(),
                            })
                            .collect::<Vec<_>>()
                            .into()
                    })
                    .collect();
                m.forward_stacked(tape, bound, x, &blocks, true)
            }
            Network::Mlp(m) => {
                let max_n = m.config.max_n;
                let mut data = Vec::with_capacity(batch.len() * m.config.input_dim());
                for p in batch {
                    let (loads, adjacency) = padded(p)?;
                    data.extend(MlpModel::input_row(loads, adjacency, max_n)?);
                }
                let x = tape.constant(Matrix::from_raw(batch.len(), m.config.input_dim(), data));
                m.forward_batch(tape, bound, x, training, rng)
            }
            Network::Lstm(m) => {
                let pairs = batch.iter().map(|p| padded(p)).collect::<Result<Vec<_>>>()?;
                let steps = LstmModel::step_inputs(&pairs, m.config.max_n)?;
                let vars: Vec<Var> = steps.into_iter().map(|s| tape.constant(s)).collect();
                m.forward_batch(tape, bound, &vars, training, rng)
            }
        }
    }

    /// Inference on prepared samples; returns real-node predictions per sample.
    pub fn predict_prepared(&self, samples: &[Prepared]) -> Result<Vec<Vec<f64>>> {
        const CHUNK: usize = 256;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(CHUNK) {
            let refs: Vec<&Prepared> = chunk.iter().collect();
            let mut tape = Tape::new();
            let bound = self.params().bind(&mut tape);
            let y = self.forward_prepared(&mut tape, &bound, &refs, false, &mut rng)?;
            let values = tape.value(y).as_slice();
            let mut offset = 0;
            for p in chunk {
                let width = match self {
                    Network::Gcn(_) => p.n,
                    _ => self.max_n(),
                };
                out.push(values[offset..offset + p.n].to_vec());
                offset += width;
            }
        }
        Ok(out)
    }

    pub fn predict(&self, sample: &LabeledSample, zero_ids: bool) -> Result<Vec<f64>> {
        let p = self.prepare(sample, zero_ids)?;
        Ok(self.predict_prepared(std::slice::from_ref(&p))?.remove(0))
    }
}

fn padded(p: &Prepared) -> Result<(&[f64], &Matrix)> {
    match &p.input {
        PreparedInput::Padded { loads, adjacency } => Ok((loads, adjacency)),
        PreparedInput::Graph { .. } => Err(Error::Config("sample prepared for a different model".into())),
    }
}

fn gcn_features(sample: &LabeledSample, config: &GcnConfig, zero_ids: bool) -> Result<Matrix> {
    let n = sample.n();
    let width = sample.features.cols();
    if !config.node_ids {
        return Ok(Matrix::from_raw(n, 1, sample.loads()));
    }
    let d0 = config.input_dim();
    let mut f = match width {
        1 => {
            let mut f = Matrix::zeros(n, d0);
            for i in 0..n {
                f.set(i, 0, sample.features.get(i, 0));
                f.set(i, 1 + i, 1.0);
            }
            f
        }
        w if w == d0 => sample.features.clone(),
        w => {
            return Err(Error::Shape(format!(
                "features have {w} columns; expected 1 or {d0}"
            )))
        }
    };
    if zero_ids {
        for i in 0..n {
            f.row_mut(i)[1..].fill(0.0);
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn specs(max_n: usize) -> Vec<ModelSpec> {
        let mut g = GcnConfig::new(max_n, true);
        g.hidden = vec![8, 8];
        let mut m = MlpConfig::new(max_n);
        m.hidden = vec![10, 10];
        let mut l = LstmConfig::new(max_n);
        l.units = 3;
        l.layers = 1;
        vec![ModelSpec::Gcn(g), ModelSpec::Mlp(m), ModelSpec::Lstm(l)]
    }

    fn data() -> Dataset {
        generate(&SynthConfig {
            n: 6,
            train_size: 1,
            val_size: 9,
            seed: 11,
            ..SynthConfig::default()
        })
        .unwrap()
        .val
    }

    #[test]
    fn batched_prediction_matches_single_sample_prediction() {
        let d = data();
        for spec in specs(8) {
            let net = Network::new(&spec, 1).unwrap();
            let batch = net.prepare_dataset(&d, false).unwrap();
            let all = net.predict_prepared(&batch).unwrap();
            for (s, b) in d.samples.iter().zip(&all) {
                let single = net.predict(s, false).unwrap();
                assert_eq!(single.len(), s.n());
                for (x, y) in single.iter().zip(b) {
                    assert!((x - y).abs() < 1e-12, "{}", spec.kind());
                }
            }
        }
    }

    #[test]
    fn capacity_is_enforced() {
        let d = data();
        for spec in specs(4) {
            let net = Network::new(&spec, 1).unwrap();
            assert!(matches!(net.prepare(&d.samples[0], false), Err(Error::Capacity { n: 6, max_n: 4 })));
        }
    }

    #[test]
    fn same_seed_same_weights() {
        for spec in specs(6) {
            assert_eq!(Network::new(&spec, 4).unwrap(), Network::new(&spec, 4).unwrap());
            assert_ne!(Network::new(&spec, 4).unwrap(), Network::new(&spec, 5).unwrap());
        }
    }

    #[test]
    fn zeroed_ids_change_only_id_models() {
        let d = data();
        let s = &d.samples[0];
        let gcn = Network::new(&specs(8)[0], 2).unwrap();
        assert_ne!(gcn.predict(s, false).unwrap(), gcn.predict(s, true).unwrap());
        let mlp = Network::new(&specs(8)[1], 2).unwrap();
        assert_eq!(mlp.predict(s, false).unwrap(), mlp.predict(s, true).unwrap());
    }

    #[test]
    fn kind_round_trips_through_strings() {
        for k in [ModelKind::Gcn, ModelKind::Mlp, ModelKind::Lstm] {
            assert_eq!(k.to_string().parse::<ModelKind>().unwrap(), k);
        }
        assert!("cnn".parse::<ModelKind>().is_err());
    }
}
