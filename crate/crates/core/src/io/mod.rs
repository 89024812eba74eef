//! File formats: telemetry CSV, datasets, checkpoints, reports and what-if scenarios.

mod checkpoint;
mod reports;
mod telemetry;
mod whatif;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::domain::Dataset;
use crate::error::Result;

pub use checkpoint::{config_digest, Architecture, Checkpoint, TrainingMetadata, WeightTensor, CHECKPOINT_VERSION};
pub use reports::{write_csv, write_heatmap_csv, write_history_csv, HistoryRow};
pub use telemetry::{distinct_aps, parse_telemetry, split_at, write_telemetry, RSSI_HEADER, TELEMETRY_HEADER};
pub use whatif::{whatif_predict, Scenario, WhatIfRow};

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    write_json(path, dataset)
}

/// Reads a dataset and validates every sample.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let d: Dataset = read_json(path)?;
    for s in &d.samples {
        s.validate()?;
    }
    Ok(d)
}
