use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Named trainable weights, kept off-tape between forward passes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

/// Tape handles for every parameter of a store, in store order.
#[derive(Clone, Debug)]
pub struct BoundParams(Vec<Var>);

impl BoundParams {
    pub fn get(&self, i: usize) -> Var {
        self.0[i]
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter and returns its index.
    pub fn push(&mut self, name: impl Into<String>, value: Matrix) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &Matrix {
        &self.values[i]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.values[i]
    }

    pub fn count_scalars(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    /// Overwrites every value, checking names and shapes line up.
    pub fn load(&mut self, other: &ParamStore) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Format("parameter names differ".into()));
        }
        for (mine, theirs) in self.values.iter().zip(&other.values) {
            if mine.shape() != theirs.shape() {
                return Err(Error::Shape(format!(
                    "parameter shape {:?} vs {:?}",
                    mine.shape(),
                    theirs.shape()
                )));
            }
        }
        self.values.clone_from(&other.values);
        Ok(())
    }

    pub fn fill(&mut self, value: f64) {
        for v in &mut self.values {
            v.as_mut_slice().fill(value);
        }
    }

    /// Puts every parameter on the tape as a gradient-tracking leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        BoundParams(
            self.values
                .iter()
                .map(|v| tape.leaf(v.clone(), true))
                .collect(),
        )
    }

    /// Reads gradients after `tape.backward`; parameters that did not
    /// influence the loss get zeros.
    pub fn gradients(&self, tape: &Tape, bound: &BoundParams) -> Vec<Matrix> {
        self.values
            .iter()
            .zip(bound.vars())
            .map(|(v, var)| {
                tape.grad(*var)
                    .cloned()
                    .unwrap_or_else(|| Matrix::zeros(v.rows(), v.cols()))
            })
            .collect()
    }
}

/// Glorot/Xavier uniform initialisation on `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Matrix::from_raw(fan_in, fan_out, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = glorot_uniform(30, 70, &mut rng);
        let limit = (6.0f64 / 100.0).sqrt();
        assert_eq!(w.shape(), (30, 70));
        assert!(w.as_slice().iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn load_rejects_shape_change() {
        let mut a = ParamStore::new();
        a.push("w", Matrix::zeros(2, 2));
        let mut b = ParamStore::new();
        b.push("w", Matrix::zeros(2, 3));
        assert!(a.load(&b).is_err());
    }
}
