//! Stacked bidirectional LSTM reading one timestep per node.
//!
//! Timestep `i` sees all loads followed by row `i` of the adjacency matrix.
//! Each layer runs a forward and a backward cell over the sequence and
//! concatenates their hidden states per timestep. A shared dense head maps
//! every timestep to that node's estimate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{glorot_uniform, BoundParams, Matrix, ParamStore, Tape, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub max_n: usize,
    /// Hidden units per direction.
    pub units: usize,
    pub layers: usize,
    pub dropout: f64,
}

impl LstmConfig {
    pub fn new(max_n: usize) -> Self {
        Self {
            max_n,
            units: 40,
            layers: 3,
            dropout: 0.5,
        }
    }

    pub fn step_input_dim(&self) -> usize {
        2 * self.max_n
    }

    pub fn output_width(&self) -> usize {
        2 * self.units
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_n == 0 || self.units == 0 || self.layers == 0 {
            return Err(Error::Config("LSTM dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmModel {
    pub config: LstmConfig,
    pub params: ParamStore,
}

// Parameter layout per (layer, direction): Wx, Wh, b; then the head Wd, bd.
const PER_CELL: usize = 3;

impl LstmModel {
    pub fn new<R: Rng + ?Sized>(config: LstmConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let u = config.units;
        let mut params = ParamStore::new();
        for l in 0..config.layers {
            let input = if l == 0 { config.step_input_dim() } else { 2 * u };
            for dir in ["fwd", "bwd"] {
                params.push(format!("L{l}.{dir}.Wx"), glorot_uniform(input, 4 * u, rng));
                params.push(format!("L{l}.{dir}.Wh"), glorot_uniform(u, 4 * u, rng));
                // gate order: input, forget, candidate, output; forget bias starts at 1
                let mut b = Matrix::zeros(1, 4 * u);
                b.as_mut_slice()[u..2 * u].fill(1.0);
                params.push(format!("L{l}.{dir}.b"), b);
            }
        }
        params.push("head.W", glorot_uniform(2 * u, 1, rng));
        params.push("head.b", Matrix::zeros(1, 1));
        Ok(Self { config, params })
    }

    fn cell_params(&self, bound: &BoundParams, layer: usize, backward: bool) -> (Var, Var, Var) {
        let base = (2 * layer + usize::from(backward)) * PER_CELL;
        (bound.get(base), bound.get(base + 1), bound.get(base + 2))
    }

    fn run_direction(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        inputs: &[Var],
        layer: usize,
        backward: bool,
    ) -> Result<Vec<Var>> {
        let u = self.config.units;
        let batch = tape.value(inputs[0]).rows();
        let (wx, wh, b) = self.cell_params(bound, layer, backward);
        let mut h = tape.constant(Matrix::zeros(batch, u));
        let mut c = tape.constant(Matrix::zeros(batch, u));
        let mut outputs = vec![h; inputs.len()];
        let order: Vec<usize> = if backward {
            (0..inputs.len()).rev().collect()
        } else {
            (0..inputs.len()).collect()
        };
        for t in order {
            let zx = tape.matmul(inputs[t], wx)?;
            let zh = tape.matmul(h, wh)?;
            let z = tape.add(zx, zh)?;
            let z = tape.add_row(z, b)?;
            let i = tape.slice_columns(z, 0, u)?;
            let f = tape.slice_columns(z, u, u)?;
            let g = tape.slice_columns(z, 2 * u, u)?;
            let o = tape.slice_columns(z, 3 * u, u)?;
            let i = tape.sigmoid(i);
            let f = tape.sigmoid(f);
            let g = tape.tanh(g);
            let o = tape.sigmoid(o);
            let keep = tape.mul(f, c)?;
            let write = tape.mul(i, g)?;
            c = tape.add(keep, write)?;
            let squashed = tape.tanh(c);
            h = tape.mul(o, squashed)?;
            outputs[t] = h;
        }
        Ok(outputs)
    }

    /// `steps[t]` is the `batch x 2 max_n` input of timestep `t`; returns
    /// `batch x max_n` predictions.
    pub(crate) fn forward_batch<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        steps: &[Var],
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if steps.len() != self.config.max_n {
            return Err(Error::Shape(format!(
                "LSTM expects {} timesteps, got {}",
                self.config.max_n,
                steps.len()
            )));
        }
        let mut seq = steps.to_vec();
        for l in 0..self.config.layers {
            let fwd = self.run_direction(tape, bound, &seq, l, false)?;
            let bwd = self.run_direction(tape, bound, &seq, l, true)?;
            seq = fwd
                .iter()
                .zip(&bwd)
                .map(|(f, b)| {
                    let both = tape.concat_columns(&[*f, *b])?;
                    tape.dropout(both, self.config.dropout, training, rng)
                })
                .collect::<Result<_>>()?;
        }
        let head_w = bound.get(self.params.len() - 2);
        let head_b = bound.get(self.params.len() - 1);
        let per_step = seq
            .iter()
            .map(|h| {
                let y = tape.matmul(*h, head_w)?;
                tape.add_row(y, head_b)
            })
            .collect::<Result<Vec<_>>>()?;
        tape.concat_columns(&per_step)
    }

    /// Timestep inputs for a batch of padded samples.
    pub fn step_inputs(samples: &[(&[f64], &Matrix)], max_n: usize) -> Result<Vec<Matrix>> {
        for (loads, adj) in samples {
            if loads.len() != max_n || adj.shape() != (max_n, max_n) {
                return Err(Error::Shape(format!(
                    "LSTM needs inputs padded to {max_n} nodes, got {} loads and {:?} adjacency",
                    loads.len(),
                    adj.shape()
                )));
            }
        }
        let batch = samples.len();
        Ok((0..max_n)
            .map(|t| {
                let mut data = Vec::with_capacity(batch * 2 * max_n);
                for (loads, adj) in samples {
                    data.extend_from_slice(loads);
                    data.extend_from_slice(adj.row(t));
                }
                Matrix::from_raw(batch, 2 * max_n, data)
            })
            .collect())
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        loads: &[f64],
        adjacency: &Matrix,
        training: bool,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let steps = Self::step_inputs(&[(loads, adjacency)], self.config.max_n)?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let vars: Vec<Var> = steps.into_iter().map(|m| tape.constant(m)).collect();
        let out = self.forward_batch(&mut tape, &bound, &vars, training, rng)?;
        Ok(tape.value(out).as_slice().to_vec())
    }
}

pub fn lstm_forward<R: Rng + ?Sized>(
    model: &LstmModel,
    loads: &[f64],
    adjacency: &Matrix,
    training: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    model.forward(loads, adjacency, training, rng)
}
