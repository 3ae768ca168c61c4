use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hybrid_ids::featsel::Method;
use hybrid_ids::pipeline::RunConfig;
use hybrid_ids::Result;

#[derive(Debug, Parser)]
#[command(name = "hybrid-ids", version, about = "IndRNN -> LSTM flow forecasting with residual anomaly flags")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode and normalize a flow-record CSV into a run directory.
    Prep(RunArgs),
    /// Rank features on the training rows and keep the top k.
    Select(RunArgs),
    /// Train the network; writes checkpoint, loss curve and threshold.
    Train(RunArgs),
    /// Test-split MAE/RMSE for the network and the persistence forecast.
    Eval(RunArgs),
    /// Stream CSV records through the trained detector, one JSON verdict per line.
    Detect(DetectArgs),
    /// Compare analytic and finite-difference gradients on a small network.
    Gradcheck(GradcheckArgs),
    /// Select, train and evaluate once per selection method; writes sweep.csv.
    Sweep(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration. Defaults to <out>/config.json when present.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace artifacts that already exist in the run directory.
    #[arg(long)]
    pub overwrite: bool,

    /// Input CSV of flow records.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// The input's first line holds column names.
    #[arg(long)]
    pub has_header: bool,
    /// Column to forecast.
    #[arg(long)]
    pub target: Option<String>,
    /// Columns to drop, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub exclude: Option<Vec<String>>,
    #[arg(long)]
    pub window_length: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// none, filter, wrapper, embedded or autoencoder.
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub k: Option<usize>,
    /// IndRNN layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub indrnn_widths: Option<Vec<usize>>,
    #[arg(long)]
    pub lstm_width: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub k_sigma: Option<f64>,
    /// Record measured seconds per epoch in loss.csv (breaks byte-identical reruns).
    #[arg(long)]
    pub wall_time: bool,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Records to score: a CSV path, or - for standard input.
    #[arg(long, default_value = "-")]
    pub input: String,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 4)]
    pub features: usize,
    #[arg(long, default_value_t = 8)]
    pub window_length: usize,
    #[arg(long, value_delimiter = ',', default_value = "6")]
    pub indrnn_widths: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub lstm_width: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds to check, starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Debug aid: double the analytic gradient of this tensor (e.g. lstm.w_f).
    #[arg(long)]
    pub corrupt: Option<String>,
}

impl RunArgs {
    /// Applies flag overrides on top of `config`.
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(v) = &self.out {
            config.out = Some(v.clone());
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = &self.data {
            config.data = Some(v.clone());
        }
        if self.has_header {
            config.has_header = true;
        }
        if let Some(v) = &self.target {
            config.target = v.clone();
        }
        if let Some(v) = &self.exclude {
            config.exclude = v.iter().filter(|s| !s.is_empty()).cloned().collect();
        }
        if let Some(v) = self.window_length {
            config.window_length = v;
        }
        if let Some(v) = self.train_fraction {
            config.train_fraction = v;
        }
        if let Some(v) = self.method {
            config.selection.method = v;
        }
        if let Some(v) = self.k {
            config.selection.k = v;
        }
        if let Some(v) = &self.indrnn_widths {
            config.architecture.indrnn_widths = v.clone();
        }
        if let Some(v) = self.lstm_width {
            config.architecture.lstm_width = v;
        }
        if let Some(v) = self.epochs {
            config.train.epochs = v;
        }
        if let Some(v) = self.batch_size {
            config.train.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            config.train.learning_rate = v;
        }
        if let Some(v) = self.k_sigma {
            config.k_sigma = v;
        }
        if self.wall_time {
            config.record_wall_time = true;
        }
    }

    /// Base config (explicit file, else the run directory's config.json,
    /// else defaults), then flags, then validation.
    pub fn resolve(&self) -> Result<RunConfig> {
        let from_dir = self.out.as_ref().map(|d| d.join(crate::rundir::CONFIG));
        let base = match (&self.config, from_dir) {
            (Some(path), _) => Some(path.clone()),
            (None, Some(path)) if path.exists() => Some(path),
            _ => None,
        };
        let mut config = match base {
            Some(path) => crate::rundir::read_json(&path).map_err(|e| match e {
                hybrid_ids::Error::Data { message, .. } => hybrid_ids::Error::Config(message),
                other => other,
            })?,
            None => RunConfig::default(),
        };
        self.apply(&mut config);
        config.validate()?;
        if config.out.is_none() {
            return Err(hybrid_ids::Error::Config("--out (or \"out\" in the config) is required".into()));
        }
        Ok(config)
    }
}
