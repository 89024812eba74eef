//! Closed-form interference estimators and a slot-level Monte Carlo oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{derive_adjacency, load_from_telemetry, symmetrize_rssi, LoadVector, TelemetrySample, Topology};
use crate::error::{Error, Result};
use crate::stats::Percentiles;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    SimpleSum,
    UniformSuperposition,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::SimpleSum => "simple-sum",
            BaselineKind::UniformSuperposition => "uniform-superposition",
        }
    }

    /// Clipped estimate for a load vector on a topology.
    pub fn estimate(self, loads: &LoadVector, topo: &Topology) -> Result<BaselineEstimate> {
        match self {
            BaselineKind::SimpleSum => simple_sum(loads, topo, true),
            BaselineKind::UniformSuperposition => uniform_superposition(loads, topo),
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple-sum" | "ss" => Ok(Self::SimpleSum),
            "uniform-superposition" | "superposition" | "us" => Ok(Self::UniformSuperposition),
            other => Err(Error::Config(format!("unknown baseline '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineEstimate {
    pub kind: BaselineKind,
    pub estimates: Vec<f64>,
}

fn check_dims(loads: &LoadVector, topo: &Topology) -> Result<()> {
    if loads.len() != topo.n() {
        return Err(Error::Dimension {
            expected: topo.n(),
            found: loads.len(),
        });
    }
    Ok(())
}

/// Sum of neighbour loads, optionally clipped to 1.
pub fn simple_sum(loads: &LoadVector, topo: &Topology, clip: bool) -> Result<BaselineEstimate> {
    check_dims(loads, topo)?;
    let l = loads.as_slice();
    let estimates = (0..topo.n())
        .map(|a| {
            let s: f64 = topo.neighbors(a).map(|b| l[b]).sum();
            if clip {
                s.min(1.0)
            } else {
                s
            }
        })
        .collect();
    Ok(BaselineEstimate {
        kind: BaselineKind::SimpleSum,
        estimates,
    })
}

/// Probability that at least one neighbour is on air when each neighbour's
/// airtime is placed independently and uniformly: `1 - prod(1 - l_b)`.
/// Evaluated as the running union `u + l_b (1 - u)` over neighbours in index
/// order, which never rounds above the simple sum taken in the same order.
pub fn uniform_superposition(loads: &LoadVector, topo: &Topology) -> Result<BaselineEstimate> {
    check_dims(loads, topo)?;
    let l = loads.as_slice();
    if let Some(x) = l.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Format(format!("load {x} outside [0, 1]")));
    }
    let estimates = (0..topo.n())
        .map(|a| topo.neighbors(a).fold(0.0, |u, b| u + l[b] * (1.0 - u)))
        .collect();
    Ok(BaselineEstimate {
        kind: BaselineKind::UniformSuperposition,
        estimates,
    })
}

/// Splits the period into `slots` slots; each neighbour occupies each slot
/// independently with probability equal to its load. Returns the fraction of
/// slots with at least one occupant.
pub fn monte_carlo_superposition(neighbor_loads: &[f64], slots: u64, seed: u64) -> f64 {
    if neighbor_loads.is_empty() || slots == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let busy = (0..slots)
        .filter(|_| neighbor_loads.iter().any(|&l| rng.random::<f64>() < l))
        .count();
    busy as f64 / slots as f64
}

/// Error percentiles of an estimator at one neighbour threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold_dbm: f64,
    pub count: usize,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

/// `-100, -98, ..., -62` dBm.
pub fn default_sweep_thresholds() -> Vec<f64> {
    (0..20).map(|i| -100.0 + 2.0 * f64::from(i)).collect()
}

/// For each threshold: derive neighbours, estimate, and summarise the signed
/// per-node errors `estimate - measured` across all snapshots.
pub fn threshold_sweep<F>(samples: &[TelemetrySample], thresholds: &[f64], estimator: F) -> Result<Vec<ThresholdRow>>
where
    F: Fn(&TelemetrySample, &LoadVector, &Topology) -> Result<Vec<f64>>,
{
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(t) = thresholds.iter().find(|t| !(-100.0..=-40.0).contains(*t)) {
        return Err(Error::Config(format!("threshold {t} dBm outside [-100, -40]")));
    }
    let prepared: Vec<_> = samples
        .iter()
        .map(|s| (symmetrize_rssi(&s.rssi), load_from_telemetry(s)))
        .collect();
    thresholds
        .iter()
        .map(|&thr| {
            let mut errors = Vec::new();
            for (s, (rssi, loads)) in samples.iter().zip(&prepared) {
                let topo = derive_adjacency(rssi, thr);
                let est = estimator(s, loads, &topo)?;
                if est.len() != s.ap_count() {
                    return Err(Error::Dimension {
                        expected: s.ap_count(),
                        found: est.len(),
                    });
                }
                errors.extend(est.iter().zip(&s.interference).map(|(e, m)| e - m));
            }
            let p = Percentiles::of(&errors)?;
            Ok(ThresholdRow {
                threshold_dbm: thr,
                count: errors.len(),
                p5: p.p5,
                p25: p.p25,
                p50: p.p50,
                p75: p.p75,
                p95: p.p95,
            })
        })
        .collect()
}
