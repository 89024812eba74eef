//! What-if scenarios: hypothetical loads and RSSI (or adjacency) for a set of APs.

use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use crate::baselines::{simple_sum, uniform_superposition};
use crate::domain::{derive_adjacency, symmetrize_rssi, LabeledSample, LoadVector, Topology, CCA_THRESHOLD_DBM};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Defaults to `ap0, ap1, ...`.
    #[serde(default)]
    pub ap_ids: Option<Vec<String>>,
    pub loads: Vec<f64>,
    /// Directed RSSI in dBm, rows = hearing AP.
    #[serde(default)]
    pub rssi: Option<Vec<Vec<f64>>>,
    /// 0/1 matrix, used when `rssi` is absent.
    #[serde(default)]
    pub adjacency: Option<Vec<Vec<u8>>>,
    #[serde(default = "default_threshold")]
    pub threshold_dbm: f64,
    /// Network the scenario describes; node IDs are zeroed when it differs
    /// from the checkpoint's source network.
    #[serde(default)]
    pub network_id: Option<String>,
}

fn default_threshold() -> f64 {
    CCA_THRESHOLD_DBM
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhatIfRow {
    pub ap_id: String,
    pub load: f64,
    pub model: f64,
    pub simple_sum: f64,
    pub uniform_superposition: f64,
}

impl Scenario {
    pub fn to_sample(&self) -> Result<LabeledSample> {
        let n = self.loads.len();
        if n == 0 {
            return Err(Error::Format("scenario has no APs".into()));
        }
        if let Some(x) = self.loads.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Format(format!("load {x} outside [0, 1]")));
        }
        if self.ap_ids.as_ref().is_some_and(|ids| ids.len() != n) {
            return Err(Error::Format("ap_ids and loads differ in length".into()));
        }
        let square = |rows: usize, cols: &[usize]| rows == n && cols.iter().all(|&c| c == n);
        let (topology, rssi) = match (&self.rssi, &self.adjacency) {
            (Some(r), _) => {
                if !square(r.len(), &r.iter().map(Vec::len).collect::<Vec<_>>()) {
                    return Err(Error::Format(format!("rssi must be {n}x{n}")));
                }
                let m = Matrix::from_rows(r)?;
                if m.as_slice().iter().any(|v| !(-100.0..=0.0).contains(v)) {
                    return Err(Error::Format("rssi values must lie in [-100, 0] dBm".into()));
                }
                let sym = symmetrize_rssi(&m);
                (derive_adjacency(&sym, self.threshold_dbm), Some(sym))
            }
            (None, Some(a)) => {
                if !square(a.len(), &a.iter().map(Vec::len).collect::<Vec<_>>()) {
                    return Err(Error::Format(format!("adjacency must be {n}x{n}")));
                }
                let rows: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|&x| f64::from(x)).collect()).collect();
                (Topology::from_matrix(&Matrix::from_rows(&rows)?)?, None)
            }
            (None, None) => return Err(Error::Format("scenario needs rssi or adjacency".into())),
        };
        Ok(LabeledSample {
            features: Matrix::from_vec(n, 1, self.loads.clone())?,
            topology,
            rssi,
            labels: vec![0.0; n],
        })
    }

    fn ids(&self) -> Vec<String> {
        self.ap_ids
            .clone()
            .unwrap_or_else(|| (0..self.loads.len()).map(|i| format!("ap{i}")).collect())
    }
}

/// Model estimate per AP next to both closed-form baselines.
pub fn whatif_predict(checkpoint: &Checkpoint, scenario: &Scenario) -> Result<Vec<WhatIfRow>> {
    let sample = scenario.to_sample()?;
    let network = checkpoint.network()?;
    if sample.n() > network.max_n() {
        return Err(Error::Capacity {
            n: sample.n(),
            max_n: network.max_n(),
        });
    }
    let foreign = scenario.network_id != checkpoint.metadata.source_network;
    let model = network.predict(&sample, foreign)?;
    let loads = LoadVector(scenario.loads.clone());
    let ss = simple_sum(&loads, &sample.topology, true)?.estimates;
    let us = uniform_superposition(&loads, &sample.topology)?.estimates;
    Ok(scenario
        .ids()
        .into_iter()
        .enumerate()
        .map(|(i, ap_id)| WhatIfRow {
            ap_id,
            load: scenario.loads[i],
            model: model[i],
            simple_sum: ss[i],
            uniform_superposition: us[i],
        })
        .collect())
}
