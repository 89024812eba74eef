use serde::{Deserialize, Serialize};

use crate::baselines::BaselineKind;
use crate::domain::{high_load_filter, Dataset, LoadVector, HIGH_LOAD_THRESHOLD};
use crate::error::{Error, Result};
use crate::models::Network;
use crate::stats::{self, Percentiles};

/// Anything that produces per-node estimates for every sample of a dataset.
pub trait Predictor {
    fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<Vec<f64>>>;
}

impl Predictor for Network {
    fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
        let prepared = self.prepare_dataset(dataset, false)?;
        self.predict_prepared(&prepared)
    }
}

impl Predictor for BaselineKind {
    fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
        dataset
            .samples
            .iter()
            .map(|s| Ok(self.estimate(&LoadVector(s.loads()), &s.topology)?.estimates))
            .collect()
    }
}

/// Absolute-error summary pooled over every real node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub mse: f64,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    /// Node-level errors pooled.
    pub count: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeError {
    pub sample: usize,
    pub node: usize,
    pub label: f64,
    pub prediction: f64,
    pub abs_error: f64,
}

/// Report from predictions aligned with `dataset.samples`.
pub fn evaluate_predictions(dataset: &Dataset, predictions: &[Vec<f64>]) -> Result<(MetricsReport, Vec<NodeError>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if predictions.len() != dataset.len() {
        return Err(Error::Dimension {
            expected: dataset.len(),
            found: predictions.len(),
        });
    }
    let mut errors = Vec::new();
    for (i, (s, p)) in dataset.samples.iter().zip(predictions).enumerate() {
        if p.len() != s.labels.len() {
            return Err(Error::Dimension {
                expected: s.labels.len(),
                found: p.len(),
            });
        }
        errors.extend(s.labels.iter().zip(p).enumerate().map(|(node, (&label, &prediction))| NodeError {
            sample: i,
            node,
            label,
            prediction,
            abs_error: (prediction - label).abs(),
        }));
    }
    let abs: Vec<f64> = errors.iter().map(|e| e.abs_error).collect();
    let pct = Percentiles::of(&abs)?;
    let report = MetricsReport {
        mae: stats::mean(&abs),
        mse: abs.iter().map(|e| e * e).sum::<f64>() / abs.len() as f64,
        p5: pct.p5,
        p25: pct.p25,
        p50: pct.p50,
        p75: pct.p75,
        p95: pct.p95,
        count: abs.len(),
        samples: dataset.len(),
    };
    Ok((report, errors))
}

/// Metrics plus the per-node errors they were computed from.
pub fn evaluate_detailed<P: Predictor + ?Sized>(
    predictor: &P,
    dataset: &Dataset,
    high_load_only: bool,
) -> Result<(MetricsReport, Vec<NodeError>)> {
    let filtered;
    let data = if high_load_only {
        filtered = high_load_filter(dataset, HIGH_LOAD_THRESHOLD);
        &filtered
    } else {
        dataset
    };
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let predictions = predictor.predict_dataset(data)?;
    evaluate_predictions(data, &predictions)
}

pub fn evaluate<P: Predictor + ?Sized>(predictor: &P, dataset: &Dataset, high_load_only: bool) -> Result<MetricsReport> {
    Ok(evaluate_detailed(predictor, dataset, high_load_only)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::monte_carlo_superposition;
    use crate::domain::{DatasetRole, LabeledSample, Topology};
    use crate::matrix::Matrix;
    use crate::synth::gen_erdos_renyi;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixed(Vec<Vec<f64>>);

    impl Predictor for Fixed {
        fn predict_dataset(&self, _: &Dataset) -> Result<Vec<Vec<f64>>> {
            Ok(self.0.clone())
        }
    }

    fn ds(labels: Vec<Vec<f64>>) -> Dataset {
        Dataset::new(
            DatasetRole::Test,
            labels
                .into_iter()
                .map(|l| LabeledSample {
                    features: Matrix::filled(l.len(), 1, 0.3),
                    topology: Topology::empty(l.len()),
                    rssi: None,
                    labels: l,
                })
                .collect(),
        )
    }

    #[test]
    fn perfect_predictions() {
        let d = ds(vec![vec![0.2, 0.5], vec![0.3]]);
        let r = evaluate(&Fixed(vec![vec![0.2, 0.5], vec![0.3]]), &d, false).unwrap();
        assert_eq!((r.mae, r.mse, r.p5, r.p50, r.p95), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!((r.count, r.samples), (3, 2));
    }

    #[test]
    fn hand_mae() {
        let d = ds(vec![vec![0.5, 0.5]]);
        let r = evaluate(&Fixed(vec![vec![0.6, 0.2]]), &d, false).unwrap();
        assert!((r.mae - 0.2).abs() < 1e-15);
        assert!((r.mse - 0.05).abs() < 1e-15);
        assert!(r.p5 <= r.p25 && r.p25 <= r.p50 && r.p50 <= r.p75 && r.p75 <= r.p95);
    }

    #[test]
    fn high_load_filter_applies() {
        let d = ds(vec![vec![0.5, 0.0], vec![0.01, 0.02]]);
        let r = evaluate(&Fixed(vec![vec![0.5, 0.0]]), &d, true).unwrap();
        assert_eq!(r.samples, 1);
        let low = ds(vec![vec![0.01]]);
        assert!(matches!(evaluate(&Fixed(vec![]), &low, true), Err(Error::EmptyDataset)));
    }

    #[test]
    fn mae_rederivable_from_dump() {
        let d = ds(vec![vec![0.1, 0.7, 0.3], vec![0.9, 0.4]]);
        let p = Fixed(vec![vec![0.15, 0.5, 0.33], vec![0.1, 0.41]]);
        let (r, dump) = evaluate_detailed(&p, &d, false).unwrap();
        let mut sum = 0.0;
        for e in &dump {
            sum += (e.prediction - e.label).abs();
        }
        assert!((sum / dump.len() as f64 - r.mae).abs() < 1e-12);
    }

    #[test]
    fn superposition_beats_simple_sum_on_slot_oracle_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let samples = (0..40)
            .map(|i| {
                let topo = gen_erdos_renyi(8, 0.4, &mut rng);
                let loads: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..0.6)).collect();
                let labels = (0..8)
                    .map(|a| {
                        let nl: Vec<f64> = topo.neighbors(a).map(|b| loads[b]).collect();
                        monte_carlo_superposition(&nl, 20_000, i * 8 + a as u64)
                    })
                    .collect();
                LabeledSample {
                    features: Matrix::from_vec(8, 1, loads).unwrap(),
                    topology: topo,
                    rssi: None,
                    labels,
                }
            })
            .collect();
        let d = Dataset::new(DatasetRole::Test, samples);
        let ss = evaluate(&BaselineKind::SimpleSum, &d, false).unwrap();
        let us = evaluate(&BaselineKind::UniformSuperposition, &d, false).unwrap();
        assert!(us.mae <= ss.mae, "{} > {}", us.mae, ss.mae);
    }
}
