use serde::{Deserialize, Serialize};

use super::{Matrix, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            ..Self::default()
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Adam or plain gradient descent over a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &[Matrix]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Dimension {
                expected: params.len(),
                found: grads.len(),
            });
        }
        for (i, g) in grads.iter().enumerate() {
            if g.shape() != params.value(i).shape() {
                return Err(Error::Shape(format!(
                    "gradient {:?} for parameter {:?}",
                    g.shape(),
                    params.value(i).shape()
                )));
            }
        }
        let lr = self.config.learning_rate;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (i, g) in grads.iter().enumerate() {
                    for (w, g) in params.value_mut(i).as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *w -= lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.first.is_empty() {
                    self.first = params
                        .values()
                        .iter()
                        .map(|v| Matrix::zeros(v.rows(), v.cols()))
                        .collect();
                    self.second = self.first.clone();
                }
                self.steps += 1;
                let OptimizerConfig {
                    beta1,
                    beta2,
                    epsilon,
                    ..
                } = self.config;
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (i, g) in grads.iter().enumerate() {
                    let m = self.first[i].as_mut_slice();
                    let v = self.second[i].as_mut_slice();
                    let w = params.value_mut(i).as_mut_slice();
                    for j in 0..w.len() {
                        let gj = g.as_slice()[j];
                        m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                        v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                        let mh = m[j] / c1;
                        let vh = v[j] / c2;
                        w[j] -= lr * mh / (vh.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
