//! Multi-kernel graph convolution network.
//!
//! Each layer concatenates `T_j H` over all kernels and applies one shared
//! weight matrix: `H' = relu([T_1 H | ... | T_k H] W)`. The last layer is
//! linear and produces one value per node. Layers carry no bias, so nodes with
//! all-zero features and no neighbours stay at zero throughout.

use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernels::{KernelConfig, KernelSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::{glorot_uniform, BoundParams, ParamStore, Tape, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnConfig {
    pub max_n: usize,
    pub node_ids: bool,
    /// Hidden layer widths; the output layer (width 1) is implicit.
    pub hidden: Vec<usize>,
    pub kernels: KernelConfig,
}

impl GcnConfig {
    pub fn new(max_n: usize, node_ids: bool) -> Self {
        Self {
            max_n,
            node_ids,
            hidden: vec![100; 4],
            kernels: KernelConfig::default(),
        }
    }

    pub fn input_dim(&self) -> usize {
        if self.node_ids {
            1 + self.max_n
        } else {
            1
        }
    }

    /// `d(0), d(1), ..., 1`
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(&self.hidden);
        d.push(1);
        d
    }

    pub fn kernel_count(&self) -> usize {
        self.kernels.count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_n == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("GCN dimensions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcnModel {
    pub config: GcnConfig,
    pub params: ParamStore,
}

impl GcnModel {
    pub fn new<R: Rng + ?Sized>(config: GcnConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        Ok(Self::with_kernel_count(config.clone(), config.kernel_count(), rng))
    }

    /// Model whose weights expect `kernel_count` kernels regardless of the
    /// kernel config; used for explicit kernel sets.
    pub fn with_kernel_count<R: Rng + ?Sized>(config: GcnConfig, kernel_count: usize, rng: &mut R) -> Self {
        let dims = config.dims();
        let mut params = ParamStore::new();
        for (l, w) in dims.windows(2).enumerate() {
            params.push(format!("W{l}"), glorot_uniform(kernel_count * w[0], w[1], rng));
        }
        Self { config, params }
    }

    pub fn kernel_count(&self) -> usize {
        self.params.value(0).rows() / self.config.input_dim()
    }

    /// Forward pass over a batch of graphs stacked row-wise. `kernels[j]`
    /// holds kernel `j` of every graph in stacking order.
    pub(crate) fn forward_stacked(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        features: Var,
        kernels: &[Rc<[Matrix]>],
        first_is_identity: bool,
    ) -> Result<Var> {
        let layers = self.params.len();
        if kernels.len() != self.kernel_count() {
            return Err(Error::Dimension {
                expected: self.kernel_count(),
                found: kernels.len(),
            });
        }
        let mut h = features;
        for l in 0..layers {
            let parts = kernels
                .iter()
                .enumerate()
                .map(|(j, blocks)| {
                    if j == 0 && first_is_identity {
                        Ok(h)
                    } else {
                        tape.block_matmul(Rc::clone(blocks), h)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let mixed = tape.concat_columns(&parts)?;
            let out = tape.matmul(mixed, bound.get(l))?;
            h = if l + 1 < layers { tape.relu(out) } else { out };
        }
        Ok(h)
    }

    /// `I = [T_1 H | ... | T_k H]` for one graph.
    pub fn layer_input(kernels: &KernelSet, h: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let x = tape.constant(h.clone());
        let parts = kernels
            .kernels()
            .iter()
            .map(|k| tape.block_matmul(Rc::from(vec![k.clone()]), x))
            .collect::<Result<Vec<_>>>()?;
        let cat = tape.concat_columns(&parts)?;
        Ok(tape.value(cat).clone())
    }

    /// Single-graph inference.
    pub fn forward(&self, kernels: &KernelSet, features: &Matrix) -> Result<Vec<f64>> {
        if features.cols() != self.config.input_dim() {
            return Err(Error::Shape(format!(
                "GCN expects {} feature columns, got {}",
                self.config.input_dim(),
                features.cols()
            )));
        }
        if features.rows() != kernels.n() {
            return Err(Error::Shape(format!(
                "{} feature rows for {}-node kernels",
                features.rows(),
                kernels.n()
            )));
        }
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let x = tape.constant(features.clone());
        let blocks: Vec<Rc<[Matrix]>> = kernels
            .kernels()
            .iter()
            .map(|k| Rc::from(vec![k.clone()]))
            .collect();
        let out = self.forward_stacked(&mut tape, &bound, x, &blocks, false)?;
        Ok(tape.value(out).as_slice().to_vec())
    }
}

/// Free-function form of [`GcnModel::forward`].
pub fn gcn_forward(model: &GcnModel, kernels: &KernelSet, features: &Matrix) -> Result<Vec<f64>> {
    model.forward(kernels, features)
}
