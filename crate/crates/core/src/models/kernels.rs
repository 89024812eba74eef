//! Propagation kernels for the multi-kernel graph convolution.

use serde::{Deserialize, Serialize};

use crate::domain::{Topology, RSSI_SENTINEL_DBM};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// RSSI at or above which a link gets full propagation weight.
pub const RSSI_FULL_WEIGHT_DBM: f64 = -40.0;

/// How the self-connected RSSI and adjacency kernels are scaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelNorm {
    /// `M + I` as is. Neighbour sums stay linearly recoverable, so a single
    /// convolution can represent the simple-sum estimator exactly.
    #[default]
    SelfLoops,
    /// `D^-1/2 (M + I) D^-1/2`.
    Symmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Adds the thresholded adjacency kernel after identity and RSSI.
    pub include_adjacency: bool,
    #[serde(default)]
    pub normalization: KernelNorm,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            include_adjacency: true,
            normalization: KernelNorm::SelfLoops,
        }
    }
}

impl KernelConfig {
    pub fn count(&self) -> usize {
        if self.include_adjacency {
            3
        } else {
            2
        }
    }
}

/// Ordered kernels `[identity, rssi, (adjacency)]`, all `n x n`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSet {
    kernels: Vec<Matrix>,
}

impl KernelSet {
    /// Wraps explicit kernels. The first one is applied as given, so callers
    /// may pass any square matrices of equal size.
    pub fn from_matrices(kernels: Vec<Matrix>) -> Result<Self> {
        let n = kernels.first().map_or(0, Matrix::rows);
        if kernels.is_empty() || kernels.iter().any(|k| k.shape() != (n, n)) {
            return Err(Error::Shape("kernels must be non-empty and n x n".into()));
        }
        Ok(Self { kernels })
    }

    pub fn count(&self) -> usize {
        self.kernels.len()
    }

    pub fn n(&self) -> usize {
        self.kernels[0].rows()
    }

    pub fn kernels(&self) -> &[Matrix] {
        &self.kernels
    }

    pub fn into_kernels(self) -> Vec<Matrix> {
        self.kernels
    }

    /// Conjugates every kernel by a node relabelling: `P K P^T`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let kernels = self
            .kernels
            .iter()
            .map(|k| {
                let mut out = Matrix::zeros(n, n);
                for a in 0..n {
                    for b in 0..n {
                        out.set(perm[a], perm[b], k.get(a, b));
                    }
                }
                out
            })
            .collect();
        Self { kernels }
    }
}

/// Affine map of `[-100, -40]` dBm onto `[0, 1]`, clamped.
pub fn rssi_weight(dbm: f64) -> f64 {
    ((dbm - RSSI_SENTINEL_DBM) / (RSSI_FULL_WEIGHT_DBM - RSSI_SENTINEL_DBM)).clamp(0.0, 1.0)
}

/// Stand-in RSSI for samples without measurements: neighbours at full
/// weight, everyone else at the sentinel.
pub fn surrogate_rssi(topo: &Topology) -> Matrix {
    let n = topo.n();
    let mut m = Matrix::filled(n, n, RSSI_SENTINEL_DBM);
    for a in 0..n {
        for b in topo.neighbors(a) {
            m.set(a, b, RSSI_FULL_WEIGHT_DBM);
        }
    }
    m
}

fn normalize(mut m: Matrix, norm: KernelNorm) -> Matrix {
    let n = m.rows();
    for i in 0..n {
        m.set(i, i, 1.0);
    }
    match norm {
        KernelNorm::SelfLoops => m,
        KernelNorm::Symmetric => {
            let inv_sqrt: Vec<f64> = (0..n).map(|r| 1.0 / m.row(r).iter().sum::<f64>().sqrt()).collect();
            for a in 0..n {
                for b in 0..n {
                    m.set(a, b, m.get(a, b) * inv_sqrt[a] * inv_sqrt[b]);
                }
            }
            m
        }
    }
}

pub fn build_kernels(rssi: Option<&Matrix>, topo: &Topology, config: &KernelConfig) -> Result<KernelSet> {
    let n = topo.n();
    let surrogate;
    let rssi = match rssi {
        Some(r) => {
            if r.shape() != (n, n) {
                return Err(Error::Shape(format!("rssi {:?} for {n} nodes", r.shape())));
            }
            if !r.is_symmetric(1e-9) {
                return Err(Error::Format("rssi matrix is not symmetric".into()));
            }
            r
        }
        None => {
            surrogate = surrogate_rssi(topo);
            &surrogate
        }
    };
    let mut kernels = Vec::with_capacity(config.count());
    kernels.push(Matrix::identity(n));
    kernels.push(normalize(rssi.map(rssi_weight), config.normalization));
    if config.include_adjacency {
        kernels.push(normalize(topo.to_matrix(), config.normalization));
    }
    Ok(KernelSet { kernels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_mapping() {
        assert_eq!(rssi_weight(-100.0), 0.0);
        assert_eq!(rssi_weight(-70.0), 0.5);
        assert_eq!(rssi_weight(-40.0), 1.0);
        assert_eq!(rssi_weight(-20.0), 1.0);
    }

    #[test]
    fn two_clique_symmetric() {
        let t = Topology::from_edges(2, &[(0, 1)]).unwrap();
        let cfg = KernelConfig {
            include_adjacency: true,
            normalization: KernelNorm::Symmetric,
        };
        let k = build_kernels(None, &t, &cfg).unwrap();
        assert!(k.kernels()[2].as_slice().iter().all(|v| (v - 0.5).abs() < 1e-15));
        assert_eq!(k.kernels()[0], Matrix::identity(2));
    }

    #[test]
    fn self_loop_kernel_is_adjacency_plus_identity() {
        let t = Topology::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let k = build_kernels(None, &t, &KernelConfig::default()).unwrap();
        let mut expected = t.to_matrix();
        for i in 0..3 {
            expected.set(i, i, 1.0);
        }
        assert_eq!(k.kernels()[2], expected);
        // surrogate RSSI reproduces the adjacency
        assert_eq!(k.kernels()[1], expected);
    }

    #[test]
    fn kernel_count_follows_flag() {
        let t = Topology::empty(4);
        let mut cfg = KernelConfig::default();
        assert_eq!(build_kernels(None, &t, &cfg).unwrap().count(), 3);
        cfg.include_adjacency = false;
        assert_eq!(build_kernels(None, &t, &cfg).unwrap().count(), 2);
    }

    #[test]
    fn rejects_asymmetric_rssi() {
        let t = Topology::empty(2);
        let r = Matrix::from_rows(&[vec![-100.0, -60.0], vec![-80.0, -100.0]]).unwrap();
        assert!(build_kernels(Some(&r), &t, &KernelConfig::default()).is_err());
    }

    #[test]
    fn rssi_kernel_has_unit_diagonal_before_normalisation() {
        let t = Topology::empty(2);
        let r = Matrix::from_rows(&[vec![-100.0, -70.0], vec![-70.0, -100.0]]).unwrap();
        let k = build_kernels(Some(&r), &t, &KernelConfig::default()).unwrap();
        assert_eq!(k.kernels()[1].as_slice(), &[1.0, 0.5, 0.5, 1.0]);
    }
}
