//! Telemetry data model: loads, RSSI topology and labelled samples.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Lowest RSSI value reported by the APs; also stands in for missing pairs.
pub const RSSI_SENTINEL_DBM: f64 = -100.0;
/// Canonical clear-channel-assessment threshold.
pub const CCA_THRESHOLD_DBM: f64 = -82.0;
/// Typical energy-detection threshold, upper end of threshold sweeps.
pub const ENERGY_DETECT_DBM: f64 = -62.0;
/// Default high-load cutoff on groundtruth interference.
pub const HIGH_LOAD_THRESHOLD: f64 = 0.10;

/// One 10-minute snapshot of a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub network_id: String,
    pub timestamp: DateTime<Utc>,
    /// AP identifiers in index order.
    pub ap_ids: Vec<String>,
    pub tx_time: Vec<f64>,
    pub rx_time: Vec<f64>,
    pub interference: Vec<f64>,
    /// Directed RSSI: entry `(a, b)` is the RSSI of `b` heard at `a`.
    pub rssi: Matrix,
}

impl TelemetrySample {
    pub fn ap_count(&self) -> usize {
        self.ap_ids.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ap_count();
        for (name, v) in [
            ("tx_time", &self.tx_time),
            ("rx_time", &self.rx_time),
            ("interference", &self.interference),
        ] {
            if v.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: v.len(),
                });
            }
            if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::Format(format!("{name} value {x} outside [0, 1]")));
            }
        }
        if self.rssi.shape() != (n, n) {
            return Err(Error::Shape(format!("rssi {:?} for {n} APs", self.rssi.shape())));
        }
        if let Some(x) = self
            .rssi
            .as_slice()
            .iter()
            .find(|x| !(RSSI_SENTINEL_DBM..=0.0).contains(*x))
        {
            return Err(Error::Format(format!("rssi value {x} outside [-100, 0]")));
        }
        Ok(())
    }

    /// Labelled view at a given neighbour threshold. Features are the load column only.
    pub fn to_labeled(&self, threshold_dbm: f64) -> LabeledSample {
        let rssi = symmetrize_rssi(&self.rssi);
        let topology = derive_adjacency(&rssi, threshold_dbm);
        let loads = load_from_telemetry(self);
        LabeledSample {
            features: Matrix::from_raw(loads.len(), 1, loads.0),
            topology,
            rssi: Some(rssi),
            labels: self.interference.clone(),
        }
    }
}

/// Per-AP airtime load in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadVector(pub Vec<f64>);

impl LoadVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for LoadVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Symmetric, self-loop-free AP adjacency.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    n: usize,
    adjacency: Vec<bool>,
}

impl Topology {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![false; n * n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut t = Self::empty(n);
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Dimension {
                    expected: n,
                    found: a.max(b) + 1,
                });
            }
            t.set_edge(a, b, true);
        }
        Ok(t)
    }

    /// Reads a 0/1 (or boolean-like) matrix. Must be symmetric; the diagonal is ignored.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        let n = m.rows();
        if m.cols() != n {
            return Err(Error::Shape(format!("adjacency {:?} is not square", m.shape())));
        }
        if !m.is_symmetric(0.0) {
            return Err(Error::Format("adjacency matrix is not symmetric".into()));
        }
        let mut t = Self::empty(n);
        for a in 0..n {
            for b in a + 1..n {
                if m.get(a, b) != 0.0 {
                    t.set_edge(a, b, true);
                }
            }
        }
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sets an undirected edge; self-loops are ignored.
    pub fn set_edge(&mut self, a: usize, b: usize, present: bool) {
        if a == b {
            return;
        }
        self.adjacency[a * self.n + b] = present;
        self.adjacency[b * self.n + a] = present;
    }

    #[inline]
    pub fn is_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a * self.n + b]
    }

    pub fn neighbors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&b| self.is_edge(a, b))
    }

    pub fn degree(&self, a: usize) -> usize {
        self.neighbors(a).count()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|e| **e).count() / 2
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_raw(
            self.n,
            self.n,
            self.adjacency.iter().map(|&e| f64::from(u8::from(e))).collect(),
        )
    }

    /// Relabels nodes so that node `i` becomes node `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let mut t = Self::empty(self.n);
        for a in 0..self.n {
            for b in self.neighbors(a) {
                t.set_edge(perm[a], perm[b], true);
            }
        }
        t
    }

    /// Same graph with isolated nodes appended up to `n` total.
    pub fn pad_to(&self, n: usize) -> Self {
        let mut t = Self::empty(n.max(self.n));
        for a in 0..self.n {
            for b in self.neighbors(a) {
                t.set_edge(a, b, true);
            }
        }
        t
    }
}

/// Training/evaluation sample: node features, topology and per-node labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    /// `n x d`; column 0 is the load, an optional one-hot node-ID block follows.
    pub features: Matrix,
    pub topology: Topology,
    /// Symmetric RSSI in dBm, when known.
    pub rssi: Option<Matrix>,
    pub labels: Vec<f64>,
}

impl LabeledSample {
    pub fn n(&self) -> usize {
        self.topology.n()
    }

    pub fn loads(&self) -> Vec<f64> {
        (0..self.features.rows()).map(|r| self.features.get(r, 0)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.features.rows() != n || self.features.cols() == 0 {
            return Err(Error::Shape(format!(
                "features {:?} for {n} nodes",
                self.features.shape()
            )));
        }
        if self.labels.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: self.labels.len(),
            });
        }
        if let Some(r) = &self.rssi {
            if r.shape() != (n, n) {
                return Err(Error::Shape(format!("rssi {:?} for {n} nodes", r.shape())));
            }
        }
        Ok(())
    }

    /// True when any node's groundtruth interference reaches `threshold`.
    pub fn is_high_load(&self, threshold: f64) -> bool {
        self.labels.iter().any(|&l| l >= threshold)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetRole {
    #[default]
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub role: DatasetRole,
    /// Network the samples come from, when they come from a single one.
    #[serde(default)]
    pub network_id: Option<String>,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(role: DatasetRole, samples: Vec<LabeledSample>) -> Self {
        Self {
            role,
            network_id: None,
            samples,
        }
    }

    pub fn with_network(mut self, id: impl Into<String>) -> Self {
        self.network_id = Some(id.into());
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max_nodes(&self) -> usize {
        self.samples.iter().map(LabeledSample::n).max().unwrap_or(0)
    }

    /// Labelled samples from telemetry snapshots at the given neighbour threshold.
    pub fn from_telemetry(role: DatasetRole, samples: &[TelemetrySample], threshold_dbm: f64) -> Self {
        let network_id = samples.first().map(|s| s.network_id.clone()).filter(|first| {
            samples.iter().all(|s| &s.network_id == first)
        });
        Self {
            role,
            network_id,
            samples: samples.iter().map(|s| s.to_labeled(threshold_dbm)).collect(),
        }
    }
}

/// `loads[a] = min(1, tx[a] + rx[a])`.
pub fn load_from_telemetry(sample: &TelemetrySample) -> LoadVector {
    LoadVector(
        sample
            .tx_time
            .iter()
            .zip(&sample.rx_time)
            .map(|(tx, rx)| (tx + rx).min(1.0))
            .collect(),
    )
}

/// Averages both directions of each pair. A sentinel paired with a real
/// measurement yields the real measurement.
pub fn symmetrize_rssi(rssi: &Matrix) -> Matrix {
    let n = rssi.rows();
    let mut out = Matrix::filled(n, n, RSSI_SENTINEL_DBM);
    for a in 0..n {
        for b in a + 1..n {
            let (x, y) = (rssi.get(a, b), rssi.get(b, a));
            let v = match (x <= RSSI_SENTINEL_DBM, y <= RSSI_SENTINEL_DBM) {
                (true, true) => RSSI_SENTINEL_DBM,
                (true, false) => y,
                (false, true) => x,
                (false, false) => 0.5 * (x + y),
            };
            out.set(a, b, v);
            out.set(b, a, v);
        }
    }
    out
}

/// Neighbours are distinct AP pairs whose RSSI reaches `threshold_dbm`.
pub fn derive_adjacency(rssi: &Matrix, threshold_dbm: f64) -> Topology {
    let n = rssi.rows();
    let mut t = Topology::empty(n);
    for a in 0..n {
        for b in a + 1..n {
            if rssi.get(a, b) >= threshold_dbm {
                t.set_edge(a, b, true);
            }
        }
    }
    t
}

/// Fraction of snapshots in which each AP pair is a neighbour.
pub fn neighborhood_probability(samples: &[TelemetrySample], threshold_dbm: f64) -> Result<Matrix> {
    let first = samples.first().ok_or(Error::EmptyDataset)?;
    let n = first.ap_count();
    let mut counts = Matrix::zeros(n, n);
    for s in samples {
        if s.ap_count() != n {
            return Err(Error::Dimension {
                expected: n,
                found: s.ap_count(),
            });
        }
        let topo = derive_adjacency(&symmetrize_rssi(&s.rssi), threshold_dbm);
        for a in 0..n {
            for b in topo.neighbors(a) {
                counts.set(a, b, counts.get(a, b) + 1.0);
            }
        }
    }
    let total = samples.len() as f64;
    Ok(counts.map(|c| c / total))
}

/// Keeps the snapshots in which at least one node's label reaches `threshold`.
pub fn high_load_filter(dataset: &Dataset, threshold: f64) -> Dataset {
    Dataset {
        role: dataset.role,
        network_id: dataset.network_id.clone(),
        samples: dataset
            .samples
            .iter()
            .filter(|s| s.is_high_load(threshold))
            .cloned()
            .collect(),
    }
}
