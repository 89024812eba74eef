use crate::domain::LabeledSample;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A sample zero-padded to a fixed model capacity.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedSample {
    /// Real node count.
    pub n: usize,
    pub loads: Vec<f64>,
    pub adjacency: Matrix,
    /// `max_n x (1 + max_n)`: load column followed by the one-hot ID block.
    pub features: Matrix,
    pub labels: Vec<f64>,
    /// 1 for real nodes, 0 for padding.
    pub mask: Vec<f64>,
}

/// Pads loads, adjacency, labels and ID block up to `max_n` nodes.
pub fn pad_inputs(sample: &LabeledSample, max_n: usize) -> Result<PaddedSample> {
    let n = sample.n();
    if n > max_n {
        return Err(Error::Capacity { n, max_n });
    }
    let mut loads = sample.loads();
    loads.resize(max_n, 0.0);
    let mut labels = sample.labels.clone();
    labels.resize(max_n, 0.0);
    let mask = (0..max_n).map(|i| if i < n { 1.0 } else { 0.0 }).collect();
    let mut features = Matrix::zeros(max_n, 1 + max_n);
    for (i, l) in loads.iter().enumerate().take(n) {
        features.set(i, 0, *l);
        features.set(i, 1 + i, 1.0);
    }
    Ok(PaddedSample {
        n,
        loads,
        adjacency: sample.topology.to_matrix().pad_to(max_n, max_n, 0.0),
        features,
        labels,
        mask,
    })
}
