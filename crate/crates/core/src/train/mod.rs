//! Training loop, evaluation metrics and experiment procedures.

mod experiments;
mod metrics;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, HIGH_LOAD_THRESHOLD};
use crate::error::{Error, Result};
use crate::models::{Network, Prepared};
use crate::tensor::{Optimizer, OptimizerConfig, Tape};

pub use experiments::{
    kernel_ablation, pearson_heatmap, run_k_sweep, transfer_evaluate, AblationResult, Heatmap, HOURS,
};
pub use metrics::{evaluate, evaluate_detailed, evaluate_predictions, MetricsReport, NodeError, Predictor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub oversample_factor: usize,
    pub high_load_threshold: f64,
    /// Stop after this many epochs without validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            oversample_factor: 10,
            high_load_threshold: HIGH_LOAD_THRESHOLD,
            patience: Some(10),
        }
    }
}

impl TrainConfig {
    /// Defaults for the synthetic benchmarks, which have no high-load regime.
    pub fn synthetic() -> Self {
        Self {
            oversample_factor: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if self.oversample_factor == 0 {
            return Err(Error::Config("oversample factor must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.high_load_threshold) {
            return Err(Error::Config(format!(
                "high-load threshold {} outside [0, 1]",
                self.high_load_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Zero-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.val_loss.len()
    }
}

/// High-load samples repeated `factor` times, others once, in seeded random
/// order. A factor of 1 returns the dataset unchanged.
pub fn oversample_high_load(dataset: &Dataset, factor: usize, threshold: f64, seed: u64) -> Result<Dataset> {
    if factor == 0 {
        return Err(Error::Config("oversample factor must be at least 1".into()));
    }
    if factor == 1 {
        return Ok(dataset.clone());
    }
    let mut samples = Vec::new();
    for s in &dataset.samples {
        let copies = if s.is_high_load(threshold) { factor } else { 1 };
        samples.extend(std::iter::repeat_n(s, copies).cloned());
    }
    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Dataset {
        role: dataset.role,
        network_id: dataset.network_id.clone(),
        samples,
    })
}

/// Masked MSE over real nodes, pooled across samples.
pub fn prepared_mse(network: &Network, samples: &[Prepared]) -> Result<f64> {
    let preds = network.predict_prepared(samples)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, y) in samples.iter().zip(&preds) {
        for (a, b) in y.iter().zip(p.targets()) {
            total += (a - b) * (a - b);
        }
        count += p.n();
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(total / count as f64)
}

/// Fits `network` with minibatch gradient descent on masked MSE, restoring the
/// weights of the best validation epoch.
pub fn train(network: &mut Network, train_set: &Dataset, val_set: &Dataset, config: &TrainConfig) -> Result<TrainHistory> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let train_set = oversample_high_load(train_set, config.oversample_factor, config.high_load_threshold, config.seed)?;
    let train_data = network.prepare_dataset(&train_set, false)?;
    let val_data = network.prepare_dataset(val_set, false)?;
    train_prepared(network, &train_data, &val_data, config)
}

/// [`train`] on already prepared samples; no oversampling.
pub fn train_prepared(
    network: &mut Network,
    train_data: &[Prepared],
    val_data: &[Prepared],
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    if train_data.is_empty() || val_data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = Optimizer::new(config.optimizer.clone());
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut history = TrainHistory {
        best_val_loss: f64::INFINITY,
        ..TrainHistory::default()
    };
    let mut best = network.params().clone();
    let mut stale = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut node_sum = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Prepared> = idx.iter().map(|&i| &train_data[i]).collect();
            let mut tape = Tape::new();
            let bound = network.params().bind(&mut tape);
            let pred = network.forward_prepared(&mut tape, &bound, &batch, true, &mut rng)?;
            let (targets, mask) = network.batch_targets(&batch);
            let nodes = mask.sum();
            let target = tape.constant(targets);
            let loss = tape.masked_mse_loss(pred, target, &mask)?;
            let value = tape.scalar(loss);
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            tape.backward(loss)?;
            let grads = network.params().gradients(&tape, &bound);
            optimizer.step(network.params_mut(), &grads)?;
            loss_sum += value * nodes;
            node_sum += nodes;
        }
        let val = prepared_mse(network, val_data)?;
        if !val.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        history.train_loss.push(loss_sum / node_sum);
        history.val_loss.push(val);
        if val < history.best_val_loss {
            history.best_val_loss = val;
            history.best_epoch = epoch;
            best = network.params().clone();
            stale = 0;
        } else {
            stale += 1;
            if config.patience.is_some_and(|p| stale >= p) {
                break;
            }
        }
    }
    network.params_mut().load(&best)?;
    Ok(history)
}
