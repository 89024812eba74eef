use std::fs;
use std::path::{Path, PathBuf};

use airtime::baselines::{default_sweep_thresholds, threshold_sweep, BaselineKind};
use airtime::domain::{Dataset, DatasetRole, TelemetrySample};
use airtime::io::{
    config_digest, load_dataset, parse_telemetry, read_json, save_dataset, split_at, whatif_predict, write_csv,
    write_heatmap_csv, write_history_csv, write_json, Checkpoint, Scenario, TrainingMetadata,
};
use airtime::models::{GcnConfig, KernelNorm, ModelSpec, Network};
use airtime::synth::generate;
use airtime::train::{
    evaluate_detailed, kernel_ablation, pearson_heatmap, run_k_sweep, train, transfer_evaluate, TrainConfig,
};
use airtime::{Error, Result};
use serde::Serialize;

use crate::args::{
    AblateArgs, EvalArgs, HeatmapArgs, Norm, PredictArgs, SweepKArgs, SweepThresholdArgs, SynthGenArgs, TrainArgs,
};

fn out_dir(dir: &Path) -> Result<&Path> {
    fs::create_dir_all(dir)?;
    Ok(dir)
}

fn telemetry(paths: &[PathBuf], rssi: &[PathBuf]) -> Result<Vec<TelemetrySample>> {
    let samples = parse_telemetry(paths, rssi)?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(samples)
}

pub fn synth_gen(a: &SynthGenArgs) -> Result<()> {
    let config = a.synth.config(a.k, a.seed);
    let exp = generate(&config)?;
    let dir = out_dir(&a.out)?;
    save_dataset(&dir.join("train.json"), &exp.train)?;
    save_dataset(&dir.join("val.json"), &exp.val)?;
    write_json(&dir.join("topologies.json"), &exp.fixed_topologies)?;
    write_json(&dir.join("synth_config.json"), &config)?;
    println!(
        "wrote {} training and {} validation samples over {} topologies to {}",
        exp.train.len(),
        exp.val.len(),
        exp.fixed_topologies.len(),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    epochs_run: usize,
    best_epoch: usize,
    best_val_loss: f64,
    model: &'a ModelSpec,
    config: &'a TrainConfig,
}

pub fn train_cmd(a: &TrainArgs) -> Result<()> {
    let (train_set, val_set, default_oversample) = match (&a.train, &a.val, a.split) {
        (Some(t), Some(v), _) => (load_dataset(t)?, load_dataset(v)?, 1),
        (None, _, Some(split)) if !a.telemetry.is_empty() => {
            let (before, after) = split_at(telemetry(&a.telemetry, &a.rssi)?, split);
            (
                Dataset::from_telemetry(DatasetRole::Train, &before, a.threshold),
                Dataset::from_telemetry(DatasetRole::Val, &after, a.threshold),
                10,
            )
        }
        _ => return Err(Error::Config("give --train and --val, or --telemetry with --split".into())),
    };
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let max_n = train_set.max_nodes().max(val_set.max_nodes());
    let spec = a.model.spec(max_n, a.node_ids);
    let config = a.training.config(a.seed, default_oversample);
    let mut network = Network::new(&spec, a.seed)?;
    let history = train(&mut network, &train_set, &val_set, &config)?;
    let metadata = TrainingMetadata {
        seed: a.seed,
        config_digest: config_digest(&(&spec, &config))?,
        source_network: train_set.network_id.clone(),
    };
    let dir = out_dir(&a.out)?;
    Checkpoint::from_network(&network, metadata).save(&dir.join("checkpoint.json"))?;
    write_history_csv(&dir.join("history.csv"), &history)?;
    write_json(
        &dir.join("train_summary.json"),
        &TrainSummary {
            epochs_run: history.epochs_run(),
            best_epoch: history.best_epoch,
            best_val_loss: history.best_val_loss,
            model: &spec,
            config: &config,
        },
    )?;
    println!(
        "{} epochs, best validation MSE {:.6e} at epoch {}",
        history.epochs_run(),
        history.best_val_loss,
        history.best_epoch
    );
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let dataset = match &a.data {
        Some(p) => load_dataset(p)?,
        None => Dataset::from_telemetry(DatasetRole::Test, &telemetry(&a.telemetry, &a.rssi)?, a.threshold),
    };
    let (report, errors) = match (&a.checkpoint, a.baseline) {
        (Some(path), _) => {
            let checkpoint = Checkpoint::load(path)?;
            let network = checkpoint.network()?;
            if a.transfer {
                transfer_evaluate(&network, checkpoint.metadata.source_network.as_deref(), &dataset)?
            } else {
                evaluate_detailed(&network, &dataset, a.high_load_only)?
            }
        }
        (None, Some(kind)) => evaluate_detailed(&kind, &dataset, a.high_load_only)?,
        (None, None) => return Err(Error::Config("give --checkpoint or --baseline".into())),
    };
    let dir = out_dir(&a.out)?;
    write_json(&dir.join("metrics.json"), &report)?;
    write_csv(&dir.join("node_errors.csv"), &errors)?;
    println!(
        "MAE {:.6} MSE {:.6e} over {} node estimates in {} samples",
        report.mae, report.mse, report.count, report.samples
    );
    Ok(())
}

pub fn sweep_k(a: &SweepKArgs) -> Result<()> {
    let base = a.synth.config(1, a.seed);
    let features_n = base.id_width();
    let spec = a.model.spec(features_n.max(a.synth.n), a.synth.node_ids);
    let config = a.training.config(a.seed, 1);
    let rows = run_k_sweep(&spec, &a.k_values, a.reps, &base, &config, a.seed)?;
    let dir = out_dir(&a.out)?;
    write_csv(&dir.join("sweep_k.csv"), &rows)?;
    for r in &rows {
        println!("k={:<4} mean MSE {:.6e} (std {:.3e})", r.k, r.mean_mse, r.std_mse);
    }
    Ok(())
}

pub fn sweep_threshold(a: &SweepThresholdArgs) -> Result<()> {
    let samples = telemetry(&a.input.telemetry, &a.input.rssi)?;
    let thresholds = a.thresholds.clone().unwrap_or_else(default_sweep_thresholds);
    let kind = a.estimator;
    let rows = threshold_sweep(&samples, &thresholds, |_, loads, topo| Ok(kind.estimate(loads, topo)?.estimates))?;
    let dir = out_dir(&a.out)?;
    write_csv(&dir.join("threshold_sweep.csv"), &rows)?;
    for r in &rows {
        println!("{:>6.1} dBm  median error {:+.4}", r.threshold_dbm, r.p50);
    }
    Ok(())
}

#[derive(Serialize)]
struct AblationRow {
    run: u64,
    seed: u64,
    mae_two: f64,
    mae_three: f64,
    ratio: f64,
}

pub fn ablate_kernels(a: &AblateArgs) -> Result<()> {
    if a.runs == 0 {
        return Err(Error::Config("--runs must be at least 1".into()));
    }
    let train_set = load_dataset(&a.train)?;
    let val_set = load_dataset(&a.val)?;
    let mut gcn = GcnConfig::new(a.max_n.unwrap_or(train_set.max_nodes().max(val_set.max_nodes())), a.node_ids);
    if let Some(h) = &a.hidden {
        gcn.hidden.clone_from(h);
    }
    gcn.kernels.normalization = match a.kernel_norm {
        Norm::SelfLoops => KernelNorm::SelfLoops,
        Norm::Symmetric => KernelNorm::Symmetric,
    };
    let mut rows = Vec::new();
    for run in 0..a.runs {
        let seed = a.seed.wrapping_add(run);
        let r = kernel_ablation(&train_set, &val_set, &gcn, &a.training.config(seed, 1))?;
        println!("run {run}: MAE 2 kernels {:.6}, 3 kernels {:.6}", r.mae_two, r.mae_three);
        rows.push(AblationRow {
            run,
            seed,
            mae_two: r.mae_two,
            mae_three: r.mae_three,
            ratio: r.ratio,
        });
    }
    write_csv(&out_dir(&a.out)?.join("ablation.csv"), &rows)
}

pub fn heatmap(a: &HeatmapArgs) -> Result<()> {
    let samples = telemetry(&a.input.telemetry, &a.input.rssi)?;
    let heat = match &a.checkpoint {
        Some(path) => {
            let checkpoint = Checkpoint::load(path)?;
            let network = checkpoint.network()?;
            let source = checkpoint.metadata.source_network;
            pearson_heatmap(&samples, |s| {
                let foreign = source.as_deref() != Some(s.network_id.as_str());
                network.predict(&s.to_labeled(a.threshold), foreign)
            })?
        }
        None => {
            let kind: BaselineKind = a.estimator;
            pearson_heatmap(&samples, |s| {
                let l = s.to_labeled(a.threshold);
                Ok(kind.estimate(&airtime::domain::LoadVector(l.loads()), &l.topology)?.estimates)
            })?
        }
    };
    write_heatmap_csv(&out_dir(&a.out)?.join("heatmap.csv"), &heat)?;
    let defined = heat.r.iter().flatten().filter(|c| c.is_some()).count();
    println!("{} APs, {defined} defined cells", heat.ap_ids.len());
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let checkpoint = Checkpoint::load(&a.checkpoint)?;
    let scenario: Scenario = read_json(&a.scenario)?;
    let rows = whatif_predict(&checkpoint, &scenario)?;
    println!("{:<12} {:>8} {:>10} {:>10} {:>14}", "ap_id", "load", "model", "simple_sum", "superposition");
    for r in &rows {
        println!(
            "{:<12} {:>8.4} {:>10.4} {:>10.4} {:>14.4}",
            r.ap_id, r.load, r.model, r.simple_sum, r.uniform_superposition
        );
    }
    if let Some(dir) = &a.out {
        write_csv(&out_dir(dir)?.join("whatif.csv"), &rows)?;
    }
    Ok(())
}
