//! Airtime interference estimation for WLAN access points.
//!
//! Given each AP's own airtime load and the pairwise RSSI between APs, estimate
//! the share of time each AP must defer to its neighbours. The crate provides
//! the closed-form simple-sum and uniform-superposition estimators, a small
//! reverse-mode autodiff engine, three neural estimators (multi-kernel GCN,
//! MLP, bidirectional LSTM), a synthetic benchmark generator and the file
//! formats used by the `airtime` command-line tool.

pub mod baselines;
pub mod domain;
pub mod error;
pub mod io;
pub mod matrix;
pub mod models;
pub mod stats;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, ParseErrorKind, Result};
pub use matrix::Matrix;
