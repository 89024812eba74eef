use chrono::Timelike;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, evaluate_predictions, MetricsReport, NodeError};
use super::{train, TrainConfig};
use crate::domain::{high_load_filter, Dataset, TelemetrySample, HIGH_LOAD_THRESHOLD};
use crate::error::{Error, Result};
use crate::models::{GcnConfig, ModelSpec, Network};
use crate::stats::{pearson, pearson_p_value};
use crate::synth::{run_k_sweep_with, KSweepRow, SynthConfig};

pub const HOURS: usize = 24;

/// Per-AP, per-hour-of-day correlation between measured and estimated
/// interference. Cells with fewer than three samples or zero variance are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub ap_ids: Vec<String>,
    /// `r[ap][hour]`
    pub r: Vec<Vec<Option<f64>>>,
    pub p_value: Vec<Vec<Option<f64>>>,
    pub count: Vec<Vec<usize>>,
}

pub fn pearson_heatmap<F>(samples: &[TelemetrySample], estimator: F) -> Result<Heatmap>
where
    F: Fn(&TelemetrySample) -> Result<Vec<f64>>,
{
    let mut ap_ids: Vec<String> = Vec::new();
    // cells[ap][hour] = (measured, estimated)
    let mut cells: Vec<Vec<(Vec<f64>, Vec<f64>)>> = Vec::new();
    for s in samples {
        let est = estimator(s)?;
        if est.len() != s.ap_count() {
            return Err(Error::Dimension {
                expected: s.ap_count(),
                found: est.len(),
            });
        }
        let hour = s.timestamp.hour() as usize;
        for (i, id) in s.ap_ids.iter().enumerate() {
            let ap = match ap_ids.iter().position(|x| x == id) {
                Some(p) => p,
                None => {
                    ap_ids.push(id.clone());
                    cells.push(vec![(Vec::new(), Vec::new()); HOURS]);
                    ap_ids.len() - 1
                }
            };
            let cell = &mut cells[ap][hour];
            cell.0.push(s.interference[i]);
            cell.1.push(est[i]);
        }
    }
    let mut heat = Heatmap {
        ap_ids,
        r: Vec::new(),
        p_value: Vec::new(),
        count: Vec::new(),
    };
    for row in &cells {
        let mut r_row = Vec::with_capacity(HOURS);
        let mut p_row = Vec::with_capacity(HOURS);
        let mut c_row = Vec::with_capacity(HOURS);
        for (measured, estimated) in row {
            let m = measured.len();
            let r = if m >= 3 { pearson(measured, estimated) } else { None };
            r_row.push(r);
            p_row.push(r.and_then(|r| pearson_p_value(r, m)));
            c_row.push(m);
        }
        heat.r.push(r_row);
        heat.p_value.push(p_row);
        heat.count.push(c_row);
    }
    Ok(heat)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    /// Identity and RSSI kernels.
    pub mae_two: f64,
    /// Identity, RSSI and adjacency kernels.
    pub mae_three: f64,
    /// `mae_three / mae_two`
    pub ratio: f64,
}

/// Trains two GCNs that differ only in the adjacency kernel and reports their
/// validation MAE over all nodes.
pub fn kernel_ablation(train_set: &Dataset, val_set: &Dataset, gcn: &GcnConfig, config: &TrainConfig) -> Result<AblationResult> {
    for d in [train_set, val_set] {
        if let Some(index) = d.samples.iter().position(|s| s.rssi.is_none()) {
            return Err(Error::MissingRssi { index });
        }
    }
    let mut maes = [0.0; 2];
    for (slot, include) in [false, true].into_iter().enumerate() {
        let mut c = gcn.clone();
        c.kernels.include_adjacency = include;
        let mut net = Network::new(&ModelSpec::Gcn(c), config.seed)?;
        train(&mut net, train_set, val_set, config)?;
        maes[slot] = evaluate(&net, val_set, false)?.mae;
    }
    Ok(AblationResult {
        mae_two: maes[0],
        mae_three: maes[1],
        ratio: maes[1] / maes[0],
    })
}

/// High-load evaluation of a trained network on another network's data. The
/// node-ID block is zeroed unless the dataset comes from `source_network`.
pub fn transfer_evaluate(network: &Network, source_network: Option<&str>, dataset: &Dataset) -> Result<(MetricsReport, Vec<NodeError>)> {
    let n = dataset.max_nodes();
    if n > network.max_n() {
        return Err(Error::Capacity {
            n,
            max_n: network.max_n(),
        });
    }
    let foreign = dataset.network_id.as_deref() != source_network;
    let data = high_load_filter(dataset, HIGH_LOAD_THRESHOLD);
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let prepared = network.prepare_dataset(&data, foreign)?;
    let predictions = network.predict_prepared(&prepared)?;
    evaluate_predictions(&data, &predictions)
}

/// Validation MSE of `spec` trained from scratch for every `(k, repetition)`.
/// Repetition `r` seeds data, weights and training with `seed + r`.
pub fn run_k_sweep(
    spec: &ModelSpec,
    k_values: &[usize],
    repetitions: usize,
    base: &SynthConfig,
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<KSweepRow>> {
    run_k_sweep_with(k_values, repetitions, base, seed, |_, rep, exp| {
        let rep_seed = seed.wrapping_add(rep as u64);
        let mut net = Network::new(spec, rep_seed)?;
        let cfg = TrainConfig {
            seed: rep_seed,
            ..config.clone()
        };
        Ok(train(&mut net, &exp.train, &exp.val, &cfg)?.best_val_loss)
    })
}
