//! Telemetry and RSSI CSV ingestion.
//!
//! Telemetry: `network_id,timestamp,ap_id,tx_time,rx_time,interference`, one
//! row per AP and snapshot. RSSI: `network_id,timestamp,src_ap,dst_ap,rssi_dbm`,
//! where `rssi_dbm` is `src_ap` as heard by `dst_ap`. Timestamps are RFC 3339
//! in UTC. A snapshot's APs are the APs with a telemetry row at that
//! timestamp, ordered by first appearance in the network. Pairs without an
//! RSSI row get the −100 dBm sentinel.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};

use crate::domain::{TelemetrySample, RSSI_SENTINEL_DBM};
use crate::error::{Error, ParseErrorKind, Result};
use crate::matrix::Matrix;

pub const TELEMETRY_HEADER: [&str; 6] = ["network_id", "timestamp", "ap_id", "tx_time", "rx_time", "interference"];
pub const RSSI_HEADER: [&str; 5] = ["network_id", "timestamp", "src_ap", "dst_ap", "rssi_dbm"];

struct Rows {
    path: PathBuf,
    records: Vec<(u64, csv::StringRecord)>,
}

fn err(path: &Path, line: u64, kind: ParseErrorKind, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        kind,
        message: message.into(),
    }
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Rows> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut records = Vec::new();
    let mut seen_header = false;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(path, line, ParseErrorKind::Malformed, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if !seen_header {
            if rec.iter().ne(header.iter().copied()) {
                return Err(err(
                    path,
                    line,
                    ParseErrorKind::Malformed,
                    format!("expected header '{}'", header.join(",")),
                ));
            }
            seen_header = true;
            continue;
        }
        if rec.len() != header.len() {
            return Err(err(
                path,
                line,
                ParseErrorKind::Malformed,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        records.push((line, rec));
    }
    if !seen_header {
        return Err(err(path, 1, ParseErrorKind::Malformed, "missing header"));
    }
    Ok(Rows {
        path: path.to_path_buf(),
        records,
    })
}

fn timestamp(path: &Path, line: u64, field: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(field)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| err(path, line, ParseErrorKind::Malformed, format!("timestamp '{field}': {e}")))
}

fn number(path: &Path, line: u64, name: &str, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| err(path, line, ParseErrorKind::Malformed, format!("{name} '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(err(path, line, ParseErrorKind::Malformed, format!("{name} '{field}' is not finite")));
    }
    Ok(v)
}

fn non_empty<'a>(path: &Path, line: u64, name: &str, field: &'a str) -> Result<&'a str> {
    if field.is_empty() {
        return Err(err(path, line, ParseErrorKind::Malformed, format!("empty {name}")));
    }
    Ok(field)
}

#[derive(Default)]
struct Snapshot {
    aps: BTreeMap<usize, [f64; 3]>,
    rssi: HashMap<(usize, usize), f64>,
}

#[derive(Default)]
struct Network {
    ap_order: Vec<String>,
    ap_index: HashMap<String, usize>,
    snapshots: BTreeMap<DateTime<Utc>, Snapshot>,
}

/// Parses telemetry files and optional RSSI files into snapshots sorted by
/// network then timestamp.
pub fn parse_telemetry<P: AsRef<Path>, Q: AsRef<Path>>(telemetry: &[P], rssi: &[Q]) -> Result<Vec<TelemetrySample>> {
    let mut networks: BTreeMap<String, Network> = BTreeMap::new();
    for path in telemetry {
        let rows = read_rows(path.as_ref(), &TELEMETRY_HEADER)?;
        let p = rows.path.as_path();
        for (line, rec) in &rows.records {
            let line = *line;
            let net_id = non_empty(p, line, "network_id", &rec[0])?;
            let ts = timestamp(p, line, &rec[1])?;
            let ap = non_empty(p, line, "ap_id", &rec[2])?;
            let mut values = [0.0; 3];
            for (slot, (name, field)) in values.iter_mut().zip(TELEMETRY_HEADER[3..].iter().zip(rec.iter().skip(3))) {
                let v = number(p, line, name, field)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(err(p, line, ParseErrorKind::OutOfRange, format!("{name} = {v} outside [0, 1]")));
                }
                *slot = v;
            }
            let net = networks.entry(net_id.to_string()).or_default();
            let next = net.ap_order.len();
            let idx = *net.ap_index.entry(ap.to_string()).or_insert(next);
            if idx == next {
                net.ap_order.push(ap.to_string());
            }
            let snap = net.snapshots.entry(ts).or_default();
            if snap.aps.insert(idx, values).is_some() {
                return Err(err(
                    p,
                    line,
                    ParseErrorKind::Duplicate,
                    format!("second row for AP '{ap}' at {}", rec[1].trim()),
                ));
            }
        }
    }

    for path in rssi {
        let rows = read_rows(path.as_ref(), &RSSI_HEADER)?;
        let p = rows.path.as_path();
        for (line, rec) in &rows.records {
            let line = *line;
            let net_id = non_empty(p, line, "network_id", &rec[0])?;
            let ts = timestamp(p, line, &rec[1])?;
            let src = non_empty(p, line, "src_ap", &rec[2])?;
            let dst = non_empty(p, line, "dst_ap", &rec[3])?;
            let v = number(p, line, "rssi_dbm", &rec[4])?;
            if !(RSSI_SENTINEL_DBM..=0.0).contains(&v) {
                return Err(err(p, line, ParseErrorKind::OutOfRange, format!("rssi_dbm = {v} outside [-100, 0]")));
            }
            if src == dst {
                return Err(err(p, line, ParseErrorKind::Malformed, format!("RSSI of AP '{src}' with itself")));
            }
            let Some(net) = networks.get_mut(net_id) else {
                return Err(err(p, line, ParseErrorKind::UnknownAp, format!("no telemetry for network '{net_id}'")));
            };
            let (ap_index, snapshots) = (&net.ap_index, &mut net.snapshots);
            let snap = snapshots.get_mut(&ts);
            let lookup = |id: &str| {
                ap_index
                    .get(id)
                    .copied()
                    .filter(|i| snap.as_ref().is_some_and(|s| s.aps.contains_key(i)))
            };
            let (Some(s), Some(d)) = (lookup(src), lookup(dst)) else {
                let missing = if lookup(src).is_none() { src } else { dst };
                return Err(err(
                    p,
                    line,
                    ParseErrorKind::UnknownAp,
                    format!("AP '{missing}' has no telemetry at {}", rec[1].trim()),
                ));
            };
            let snap = snap.expect("lookup succeeded");
            if snap.rssi.insert((d, s), v).is_some() {
                return Err(err(
                    p,
                    line,
                    ParseErrorKind::Duplicate,
                    format!("second RSSI row for {src} -> {dst} at {}", rec[1].trim()),
                ));
            }
        }
    }

    let mut out = Vec::new();
    for (net_id, net) in networks {
        for (ts, snap) in net.snapshots {
            let members: Vec<usize> = snap.aps.keys().copied().collect();
            let local: HashMap<usize, usize> = members.iter().enumerate().map(|(l, &g)| (g, l)).collect();
            let n = members.len();
            let mut rssi = Matrix::filled(n, n, RSSI_SENTINEL_DBM);
            for (&(hearer, source), &v) in &snap.rssi {
                rssi.set(local[&hearer], local[&source], v);
            }
            let col = |k: usize| members.iter().map(|g| snap.aps[g][k]).collect::<Vec<_>>();
            out.push(TelemetrySample {
                network_id: net_id.clone(),
                timestamp: ts,
                ap_ids: members.iter().map(|&g| net.ap_order[g].clone()).collect(),
                tx_time: col(0),
                rx_time: col(1),
                interference: col(2),
                rssi,
            });
        }
    }
    Ok(out)
}

/// Splits snapshots at `boundary`: strictly earlier ones go to the first part.
pub fn split_at(samples: Vec<TelemetrySample>, boundary: DateTime<Utc>) -> (Vec<TelemetrySample>, Vec<TelemetrySample>) {
    samples.into_iter().partition(|s| s.timestamp < boundary)
}

/// Writes snapshots back in the two CSV schemas. RSSI rows are emitted only
/// for non-sentinel entries.
pub fn write_telemetry(samples: &[TelemetrySample], telemetry: &Path, rssi: &Path) -> Result<()> {
    let mut t = csv::Writer::from_path(telemetry)?;
    t.write_record(TELEMETRY_HEADER)?;
    let mut r = csv::Writer::from_path(rssi)?;
    r.write_record(RSSI_HEADER)?;
    for s in samples {
        let ts = s.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        for i in 0..s.ap_count() {
            t.write_record([
                s.network_id.as_str(),
                &ts,
                &s.ap_ids[i],
                &s.tx_time[i].to_string(),
                &s.rx_time[i].to_string(),
                &s.interference[i].to_string(),
            ])?;
        }
        for dst in 0..s.ap_count() {
            for src in 0..s.ap_count() {
                let v = s.rssi.get(dst, src);
                if src != dst && v > RSSI_SENTINEL_DBM {
                    r.write_record([s.network_id.as_str(), &ts, &s.ap_ids[src], &s.ap_ids[dst], &v.to_string()])?;
                }
            }
        }
    }
    t.flush()?;
    r.flush()?;
    Ok(())
}

/// Distinct AP ids across snapshots, in first-seen order.
pub fn distinct_aps(samples: &[TelemetrySample]) -> Vec<String> {
    let mut seen = HashSet::new();
    samples
        .iter()
        .flat_map(|s| s.ap_ids.iter())
        .filter(|id| seen.insert(id.as_str()))
        .cloned()
        .collect()
}
