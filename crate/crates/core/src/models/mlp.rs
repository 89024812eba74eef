//! Dense baseline over the padded load vector and flattened adjacency.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{glorot_uniform, BoundParams, Matrix, ParamStore, Tape, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub max_n: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
}

impl MlpConfig {
    pub fn new(max_n: usize) -> Self {
        Self {
            max_n,
            hidden: vec![3000; 3],
            dropout: 0.5,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.max_n + self.max_n * self.max_n
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_n == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("MLP dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub params: ParamStore,
}

impl MlpModel {
    pub fn new<R: Rng + ?Sized>(config: MlpConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut dims = vec![config.input_dim()];
        dims.extend(&config.hidden);
        dims.push(config.max_n);
        let mut params = ParamStore::new();
        for (l, w) in dims.windows(2).enumerate() {
            params.push(format!("W{l}"), glorot_uniform(w[0], w[1], rng));
            params.push(format!("b{l}"), Matrix::zeros(1, w[1]));
        }
        Ok(Self { config, params })
    }

    /// Rows of `input` are `[loads | flattened adjacency]`; output is `batch x max_n`.
    pub(crate) fn forward_batch<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        input: Var,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let layers = self.params.len() / 2;
        let mut h = input;
        for l in 0..layers {
            let z = tape.matmul(h, bound.get(2 * l))?;
            let z = tape.add_row(z, bound.get(2 * l + 1))?;
            h = if l + 1 < layers {
                let a = tape.relu(z);
                tape.dropout(a, self.config.dropout, training, rng)?
            } else {
                z
            };
        }
        Ok(h)
    }

    /// Builds the input row for one padded sample.
    pub fn input_row(loads: &[f64], adjacency: &Matrix, max_n: usize) -> Result<Vec<f64>> {
        if loads.len() != max_n || adjacency.shape() != (max_n, max_n) {
            return Err(Error::Shape(format!(
                "MLP needs inputs padded to {max_n} nodes, got {} loads and {:?} adjacency",
                loads.len(),
                adjacency.shape()
            )));
        }
        let mut row = Vec::with_capacity(max_n + max_n * max_n);
        row.extend_from_slice(loads);
        row.extend_from_slice(adjacency.as_slice());
        Ok(row)
    }

    /// Single padded sample at inference or with dropout active.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        loads: &[f64],
        adjacency: &Matrix,
        training: bool,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let row = Self::input_row(loads, adjacency, self.config.max_n)?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let x = tape.constant(Matrix::from_vec(1, row.len(), row)?);
        let out = self.forward_batch(&mut tape, &bound, x, training, rng)?;
        Ok(tape.value(out).as_slice().to_vec())
    }
}

pub fn mlp_forward<R: Rng + ?Sized>(
    model: &MlpModel,
    loads: &[f64],
    adjacency: &Matrix,
    training: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    model.forward(loads, adjacency, training, rng)
}
