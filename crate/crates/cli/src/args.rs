use std::path::PathBuf;

use airtime::baselines::BaselineKind;
use airtime::domain::CCA_THRESHOLD_DBM;
use airtime::models::{GcnConfig, KernelNorm, LstmConfig, MlpConfig, ModelKind, ModelSpec};
use airtime::synth::{LabelKind, SynthConfig};
use airtime::tensor::OptimizerConfig;
use airtime::train::TrainConfig;
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "airtime", version, about = "Estimate WLAN airtime interference from load and RSSI")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic k-topology benchmark (train.json, val.json).
    SynthGen(SynthGenArgs),
    /// Train a model and write checkpoint.json and history.csv.
    Train(TrainArgs),
    /// Evaluate a checkpoint or baseline; writes metrics.json and node_errors.csv.
    Eval(EvalArgs),
    /// Validation MSE against the number of training topologies k.
    SweepK(SweepKArgs),
    /// Baseline error percentiles against the neighbour RSSI threshold.
    SweepThreshold(SweepThresholdArgs),
    /// Compare 2-kernel and 3-kernel GCNs on datasets with RSSI.
    AblateKernels(AblateArgs),
    /// Per-AP, per-hour correlation between measured and estimated interference.
    Heatmap(HeatmapArgs),
    /// What-if estimates for a scenario file, next to both baselines.
    Predict(PredictArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Label {
    SimpleSum,
    SingleFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Norm {
    SelfLoops,
    Symmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Opt {
    Adam,
    Sgd,
}

/// Synthetic benchmark shape, everything except k.
#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    /// Nodes per topology.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Edge probability of G(n, p).
    #[arg(long, default_value_t = 0.2)]
    pub p: f64,
    #[arg(long, default_value_t = 6000)]
    pub train_size: usize,
    #[arg(long, default_value_t = 2000)]
    pub val_size: usize,
    #[arg(long, value_enum, default_value_t = Label::SimpleSum)]
    pub label: Label,
    /// Node whose label is forced to zero with --label single-failure.
    #[arg(long, default_value_t = 0)]
    pub failure_index: usize,
    /// Append one-hot node IDs to the features.
    #[arg(long)]
    pub node_ids: bool,
    /// Width of the node-ID block (defaults to n).
    #[arg(long)]
    pub id_width: Option<usize>,
    /// Attach jittered RSSI matrices.
    #[arg(long)]
    pub noisy_rssi: bool,
}

impl SynthArgs {
    pub fn config(&self, k: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            n: self.n,
            p: self.p,
            k,
            train_size: self.train_size,
            val_size: self.val_size,
            label_kind: match self.label {
                Label::SimpleSum => LabelKind::SimpleSum,
                Label::SingleFailure => LabelKind::SingleFailure,
            },
            failure_index: self.failure_index,
            node_ids: self.node_ids,
            max_n: self.id_width,
            noisy_rssi: self.noisy_rssi,
            seed,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value = "gcn")]
    pub model: ModelKind,
    /// Model capacity in nodes (defaults to the largest network in the data).
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Hidden widths, comma separated. For the LSTM: units per direction, one entry per layer.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// GCN: leave out the thresholded adjacency kernel.
    #[arg(long)]
    pub no_adjacency_kernel: bool,
    #[arg(long, value_enum, default_value_t = Norm::SelfLoops)]
    pub kernel_norm: Norm,
    /// MLP/LSTM dropout rate.
    #[arg(long)]
    pub dropout: Option<f64>,
}

impl ModelArgs {
    pub fn spec(&self, max_n: usize, node_ids: bool) -> ModelSpec {
        let max_n = self.max_n.unwrap_or(max_n);
        match self.model {
            ModelKind::Gcn => {
                let mut c = GcnConfig::new(max_n, node_ids);
                if let Some(h) = &self.hidden {
                    c.hidden.clone_from(h);
                }
                c.kernels.include_adjacency = !self.no_adjacency_kernel;
                c.kernels.normalization = match self.kernel_norm {
                    Norm::SelfLoops => KernelNorm::SelfLoops,
                    Norm::Symmetric => KernelNorm::Symmetric,
                };
                ModelSpec::Gcn(c)
            }
            ModelKind::Mlp => {
                let mut c = MlpConfig::new(max_n);
                if let Some(h) = &self.hidden {
                    c.hidden.clone_from(h);
                }
                if let Some(d) = self.dropout {
                    c.dropout = d;
                }
                ModelSpec::Mlp(c)
            }
            ModelKind::Lstm => {
                let mut c = LstmConfig::new(max_n);
                if let Some(h) = self.hidden.as_ref().filter(|h| !h.is_empty()) {
                    c.units = h[0];
                    c.layers = h.len();
                }
                if let Some(d) = self.dropout {
                    c.dropout = d;
                }
                ModelSpec::Lstm(c)
            }
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = Opt::Adam)]
    pub optimizer: Opt,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Copies of each high-load sample (default 10 for telemetry, 1 for synthetic data).
    #[arg(long)]
    pub oversample: Option<usize>,
}

impl TrainingArgs {
    pub fn config(&self, seed: u64, default_oversample: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: match self.optimizer {
                Opt::Adam => OptimizerConfig::adam(self.lr),
                Opt::Sgd => OptimizerConfig::sgd(self.lr),
            },
            seed,
            oversample_factor: self.oversample.unwrap_or(default_oversample),
            patience: (self.patience > 0).then_some(self.patience),
            ..TrainConfig::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct TelemetryArgs {
    /// Telemetry CSV files (network_id,timestamp,ap_id,tx_time,rx_time,interference).
    #[arg(long, required = true, num_args = 1..)]
    pub telemetry: Vec<PathBuf>,
    /// RSSI CSV files (network_id,timestamp,src_ap,dst_ap,rssi_dbm).
    #[arg(long, num_args = 1..)]
    pub rssi: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthGenArgs {
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Number of fixed training topologies.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training dataset (JSON from synth-gen).
    #[arg(long, requires = "val", conflicts_with = "telemetry")]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Telemetry CSV files; snapshots before --split train, the rest validate.
    #[arg(long, num_args = 1.., requires = "split")]
    pub telemetry: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub rssi: Vec<PathBuf>,
    /// ISO-8601 UTC boundary between training and validation snapshots.
    #[arg(long)]
    pub split: Option<DateTime<Utc>>,
    /// Neighbour threshold in dBm for telemetry input.
    #[arg(long, default_value_t = CCA_THRESHOLD_DBM, allow_hyphen_values = true)]
    pub threshold: f64,
    /// Append one-hot node IDs (GCN).
    #[arg(long)]
    pub node_ids: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub baseline: Option<BaselineKind>,
    /// Dataset JSON.
    #[arg(long, conflicts_with = "telemetry", required_unless_present = "telemetry")]
    pub data: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub telemetry: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub rssi: Vec<PathBuf>,
    #[arg(long, default_value_t = CCA_THRESHOLD_DBM, allow_hyphen_values = true)]
    pub threshold: f64,
    /// Only samples with some label at or above 10% airtime.
    #[arg(long)]
    pub high_load_only: bool,
    /// Transfer evaluation: high-load samples, node IDs zeroed for foreign networks.
    #[arg(long, requires = "checkpoint")]
    pub transfer: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepKArgs {
    #[command(flatten)]
    pub synth: SynthArgs,
    #[arg(long = "k", value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
    pub k_values: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    pub reps: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepThresholdArgs {
    #[command(flatten)]
    pub input: TelemetryArgs,
    #[arg(long, default_value = "simple-sum")]
    pub estimator: BaselineKind,
    /// Thresholds in dBm (default -100, -98, ..., -62).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub node_ids: bool,
    #[arg(long)]
    pub max_n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = Norm::SelfLoops)]
    pub kernel_norm: Norm,
    /// Independent runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct HeatmapArgs {
    #[command(flatten)]
    pub input: TelemetryArgs,
    /// Baseline estimator; ignored when --checkpoint is given.
    #[arg(long, default_value = "simple-sum")]
    pub estimator: BaselineKind,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = CCA_THRESHOLD_DBM, allow_hyphen_values = true)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Scenario JSON: loads plus rssi or adjacency.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Directory for whatif.csv; the table is printed either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
