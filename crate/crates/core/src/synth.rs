//! Synthetic benchmark: random topologies, uniform loads, simple-sum and
//! single-failure labels, and the k-fixed-topologies experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, DatasetRole, LabeledSample, Topology, CCA_THRESHOLD_DBM};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stats;

pub const LOAD_MIN: f64 = 0.01;
pub const LOAD_MAX: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKind {
    SimpleSum,
    SingleFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub p: f64,
    pub k: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub label_kind: LabelKind,
    pub failure_index: usize,
    /// Append a one-hot node-ID block of width `max_n` to the features.
    pub node_ids: bool,
    /// ID block width; defaults to `n`.
    #[serde(default)]
    pub max_n: Option<usize>,
    /// Attach jittered RSSI matrices (edges above the CCA threshold, others below).
    #[serde(default)]
    pub noisy_rssi: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 10,
            p: 0.2,
            k: 1,
            train_size: 6000,
            val_size: 2000,
            label_kind: LabelKind::SimpleSum,
            failure_index: 0,
            node_ids: false,
            max_n: None,
            noisy_rssi: false,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn id_width(&self) -> usize {
        self.max_n.unwrap_or(self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!("edge probability {} outside [0, 1]", self.p)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.label_kind == LabelKind::SingleFailure && self.failure_index >= self.n {
            return Err(Error::Config(format!(
                "failure index {} for {} nodes",
                self.failure_index, self.n
            )));
        }
        if self.id_width() < self.n {
            return Err(Error::Capacity {
                n: self.n,
                max_n: self.id_width(),
            });
        }
        Ok(())
    }
}

/// `G(n, p)`: each unordered pair independently with probability `p`.
pub fn gen_erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Topology {
    let mut t = Topology::empty(n);
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                t.set_edge(a, b, true);
            }
        }
    }
    t
}

/// I.i.d. uniform loads on `[0.01, 1]`.
pub fn gen_loads<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(LOAD_MIN..=LOAD_MAX)).collect()
}

/// Unclipped neighbour-load sums.
pub fn label_simple_sum(loads: &[f64], topo: &Topology) -> Vec<f64> {
    (0..topo.n())
        .map(|a| topo.neighbors(a).map(|b| loads[b]).sum())
        .collect()
}

/// Simple-sum labels with the failing node pinned to 0. The failing node's
/// load still counts towards its neighbours.
pub fn label_single_failure(loads: &[f64], topo: &Topology, failure_index: usize) -> Vec<f64> {
    let mut labels = label_simple_sum(loads, topo);
    labels[failure_index] = 0.0;
    labels
}

/// Appends a one-hot ID block of width `max_n`.
pub fn augment_node_ids(features: &Matrix, max_n: usize) -> Result<Matrix> {
    let n = features.rows();
    if n > max_n {
        return Err(Error::Capacity { n, max_n });
    }
    let d = features.cols();
    let mut out = Matrix::zeros(n, d + max_n);
    for i in 0..n {
        out.row_mut(i)[..d].copy_from_slice(features.row(i));
        out.set(i, d + i, 1.0);
    }
    Ok(out)
}

/// RSSI consistent with `topo` at the CCA threshold: neighbours at
/// `-82 + U(0, 10)` dBm, other pairs at `-82 - U(0, 10)` dBm.
pub fn noisy_rssi<R: Rng + ?Sized>(topo: &Topology, rng: &mut R) -> Matrix {
    let n = topo.n();
    let mut m = Matrix::filled(n, n, -100.0);
    for a in 0..n {
        for b in a + 1..n {
            let jitter = rng.random_range(0.0..10.0);
            let v = if topo.is_edge(a, b) {
                CCA_THRESHOLD_DBM + jitter
            } else {
                CCA_THRESHOLD_DBM - jitter
            };
            m.set(a, b, v);
            m.set(b, a, v);
        }
    }
    m
}

fn make_sample<R: Rng + ?Sized>(config: &SynthConfig, topo: Topology, rng: &mut R) -> Result<LabeledSample> {
    let loads = gen_loads(config.n, rng);
    let labels = match config.label_kind {
        LabelKind::SimpleSum => label_simple_sum(&loads, &topo),
        LabelKind::SingleFailure => label_single_failure(&loads, &topo, config.failure_index),
    };
    let mut features = Matrix::from_raw(config.n, 1, loads);
    if config.node_ids {
        features = augment_node_ids(&features, config.id_width())?;
    }
    let rssi = config.noisy_rssi.then(|| noisy_rssi(&topo, rng));
    Ok(LabeledSample {
        features,
        topology: topo,
        rssi,
        labels,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct KTopologyExperiment {
    pub train: Dataset,
    pub val: Dataset,
    pub fixed_topologies: Vec<Topology>,
}

/// Draws `k` topologies once; training samples pick one uniformly with fresh
/// loads, validation samples use fresh `G(n, p)` draws.
pub fn build_k_topology_experiment<R: Rng + ?Sized>(config: &SynthConfig, rng: &mut R) -> Result<KTopologyExperiment> {
    config.validate()?;
    let fixed: Vec<Topology> = (0..config.k).map(|_| gen_erdos_renyi(config.n, config.p, rng)).collect();
    let train = (0..config.train_size)
        .map(|_| {
            let topo = fixed[rng.random_range(0..fixed.len())].clone();
            make_sample(config, topo, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let val = (0..config.val_size)
        .map(|_| {
            let topo = gen_erdos_renyi(config.n, config.p, rng);
            make_sample(config, topo, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KTopologyExperiment {
        train: Dataset::new(DatasetRole::Train, train),
        val: Dataset::new(DatasetRole::Val, val),
        fixed_topologies: fixed,
    })
}

/// Experiment for `config` seeded from `config.seed`.
pub fn generate(config: &SynthConfig) -> Result<KTopologyExperiment> {
    build_k_topology_experiment(config, &mut ChaCha8Rng::seed_from_u64(config.seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k: usize,
    pub repetitions: usize,
    pub mean_mse: f64,
    pub std_mse: f64,
}

/// Runs `evaluate` on a fresh experiment for every `(k, repetition)` and
/// summarises the returned scores. Repetition `r` uses seed `seed + r`, so
/// different `k` values share their random streams.
pub fn run_k_sweep_with<F>(
    k_values: &[usize],
    repetitions: usize,
    base: &SynthConfig,
    seed: u64,
    mut evaluate: F,
) -> Result<Vec<KSweepRow>>
where
    F: FnMut(usize, usize, &KTopologyExperiment) -> Result<f64>,
{
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    k_values
        .iter()
        .map(|&k| {
            let scores = (0..repetitions)
                .map(|rep| {
                    let config = SynthConfig {
                        k,
                        seed: seed.wrapping_add(rep as u64),
                        ..base.clone()
                    };
                    let exp = generate(&config)?;
                    evaluate(k, rep, &exp)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(KSweepRow {
                k,
                repetitions,
                mean_mse: stats::mean(&scores),
                std_mse: stats::std_dev(&scores),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(gen_erdos_renyi(8, 0.0, &mut rng).edge_count(), 0);
        assert_eq!(gen_erdos_renyi(8, 1.0, &mut rng).edge_count(), 28);
    }

    #[test]
    fn er_mean_edge_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 10_000;
        let total: usize = (0..draws).map(|_| gen_erdos_renyi(10, 0.2, &mut rng).edge_count()).sum();
        let mean = total as f64 / draws as f64;
        assert!((mean - 9.0).abs() < 0.3, "mean edges {mean}");
    }

    #[test]
    fn er_symmetric_without_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let t = gen_erdos_renyi(12, 0.3, &mut rng);
            for a in 0..12 {
                assert!(!t.is_edge(a, a));
                for b in 0..12 {
                    assert_eq!(t.is_edge(a, b), t.is_edge(b, a));
                }
            }
        }
    }

    #[test]
    fn loads_range_mean_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = gen_loads(100_000, &mut rng);
        assert!(v.iter().all(|x| (LOAD_MIN..=LOAD_MAX).contains(x)));
        let mean = stats::mean(&v);
        assert!((mean - 0.505).abs() < 0.01, "{mean}");
        let a = gen_loads(10, &mut ChaCha8Rng::seed_from_u64(9));
        let b = gen_loads(10, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    fn path3() -> Topology {
        Topology::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn simple_sum_labels() {
        assert_eq!(label_simple_sum(&[0.7], &Topology::empty(1)), vec![0.0]);
        assert!(close(&label_simple_sum(&[0.1, 0.2, 0.3], &path3()), &[0.2, 0.4, 0.2]));
        let clique = Topology::from_edges(2, &[(0, 1)]).unwrap();
        assert!(close(&label_simple_sum(&[0.4, 0.7], &clique), &[0.7, 0.4]));
    }

    #[test]
    fn single_failure_labels() {
        assert!(close(&label_single_failure(&[0.1, 0.2, 0.3], &path3(), 2), &[0.2, 0.4, 0.0]));
        let t = Topology::from_edges(3, &[(0, 1)]).unwrap();
        let loads = [0.3, 0.6, 0.9];
        assert_eq!(label_single_failure(&loads, &t, 2), label_simple_sum(&loads, &t));
        let clique = Topology::from_edges(2, &[(0, 1)]).unwrap();
        assert!(close(&label_single_failure(&[0.4, 0.7], &clique, 1), &[0.7, 0.0]));
    }

    #[test]
    fn node_id_block() {
        let f = Matrix::column(&[0.1, 0.2, 0.3]).unwrap();
        let a = augment_node_ids(&f, 3).unwrap();
        assert_eq!(a.row(1), &[0.2, 0.0, 1.0, 0.0]);
        let one = augment_node_ids(&Matrix::column(&[0.5]).unwrap(), 1).unwrap();
        assert_eq!(one.row(0), &[0.5, 1.0]);
        let wide = augment_node_ids(&f, 5).unwrap();
        assert_eq!(wide.cols(), 6);
        assert_eq!(wide.row(2), &[0.3, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(augment_node_ids(&f, 2).is_err());
    }

    #[test]
    fn experiment_shapes() {
        let cfg = SynthConfig {
            k: 1,
            seed: 5,
            ..SynthConfig::default()
        };
        let exp = generate(&cfg).unwrap();
        assert_eq!((exp.train.len(), exp.val.len()), (6000, 2000));
        let first = &exp.train.samples[0].topology;
        assert!(exp.train.samples.iter().all(|s| &s.topology == first));
    }

    #[test]
    fn distinct_training_topologies_bounded_by_k() {
        let cfg = SynthConfig {
            k: 4,
            train_size: 500,
            val_size: 10,
            seed: 6,
            ..SynthConfig::default()
        };
        let exp = generate(&cfg).unwrap();
        let distinct: std::collections::HashSet<_> = exp.train.samples.iter().map(|s| s.topology.clone()).collect();
        assert!(distinct.len() <= 4);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            k: 3,
            train_size: 50,
            val_size: 20,
            node_ids: true,
            noisy_rssi: true,
            seed: 7,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    }

    #[test]
    fn failure_node_always_zero() {
        let cfg = SynthConfig {
            k: 5,
            train_size: 200,
            val_size: 200,
            label_kind: LabelKind::SingleFailure,
            failure_index: 3,
            seed: 8,
            ..SynthConfig::default()
        };
        let exp = generate(&cfg).unwrap();
        for s in exp.train.samples.iter().chain(&exp.val.samples) {
            assert_eq!(s.labels[3], 0.0);
        }
    }

    #[test]
    fn noisy_rssi_separates_at_cca() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t = gen_erdos_renyi(10, 0.3, &mut rng);
        let r = noisy_rssi(&t, &mut rng);
        assert_eq!(crate::domain::derive_adjacency(&r, CCA_THRESHOLD_DBM), t);
    }

    #[test]
    fn zero_model_sweep_equals_mean_squared_labels() {
        let base = SynthConfig {
            train_size: 10,
            val_size: 300,
            ..SynthConfig::default()
        };
        let mut expected = Vec::new();
        let rows = run_k_sweep_with(&[1, 3], 2, &base, 11, |_, _, exp| {
            let sq: Vec<f64> = exp.val.samples.iter().flat_map(|s| s.labels.iter().map(|l| l * l)).collect();
            let zero_mse = stats::mean(&sq);
            expected.push(zero_mse);
            Ok(zero_mse)
        })
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].mean_mse - stats::mean(&expected[..2])).abs() < 1e-15);
        assert!(rows.iter().all(|r| r.repetitions == 2));
    }

    #[test]
    fn rejects_bad_config() {
        let bad = [
            SynthConfig { p: 1.5, ..SynthConfig::default() },
            SynthConfig { k: 0, ..SynthConfig::default() },
            SynthConfig {
                label_kind: LabelKind::SingleFailure,
                failure_index: 10,
                ..SynthConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }
}
