use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::train::{Heatmap, TrainHistory, HOURS};

/// One CSV row per item, header from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

pub fn write_history_csv(path: &Path, history: &TrainHistory) -> Result<()> {
    let rows: Vec<HistoryRow> = history
        .train_loss
        .iter()
        .zip(&history.val_loss)
        .enumerate()
        .map(|(epoch, (&train_loss, &val_loss))| HistoryRow {
            epoch,
            train_loss,
            val_loss,
        })
        .collect();
    write_csv(path, &rows)
}

#[derive(Serialize)]
struct HeatmapRow<'a> {
    ap_id: &'a str,
    hour: usize,
    count: usize,
    r: Option<f64>,
    p_value: Option<f64>,
}

/// Long format: one row per (AP, hour); undefined cells leave `r` and `p_value` empty.
pub fn write_heatmap_csv(path: &Path, heatmap: &Heatmap) -> Result<()> {
    let mut rows = Vec::with_capacity(heatmap.ap_ids.len() * HOURS);
    for (a, id) in heatmap.ap_ids.iter().enumerate() {
        for hour in 0..HOURS {
            rows.push(HeatmapRow {
                ap_id: id,
                hour,
                count: heatmap.count[a][hour],
                r: heatmap.r[a][hour],
                p_value: heatmap.p_value[a][hour],
            });
        }
    }
    write_csv(path, &rows)
}
