use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, backward, clip_gradients, AdamConfig, AdamState};
use crate::dataio::WindowedDataset;
use crate::nn::{HybridNetwork, NetworkDocument};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub grad_clip_norm: f64,
    pub seed: u64,
    /// Chronological tail of the training samples held out for validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            grad_clip_norm: 5.0,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::config(msg.to_owned()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0 && self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0)
        {
            return bad("adam betas must lie in (0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        if !(self.grad_clip_norm > 0.0) {
            return bad("grad_clip_norm must be positive");
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 0.5]");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

/// Per-epoch loss curves.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    /// `None` when no validation samples were held out.
    pub val_loss: Vec<Option<f64>>,
    pub epoch_seconds: Vec<f64>,
    pub final_checksum: String,
}

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }

    /// `epoch,train_loss,val_loss,seconds`, one row per epoch (1-based).
    /// With `wall_time` off the seconds column is written as 0 so the file is
    /// a pure function of data and config.
    pub fn to_csv(&self, wall_time: bool) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,seconds\n");
        for e in 0..self.epochs() {
            let val = self.val_loss[e].map(|v| v.to_string()).unwrap_or_default();
            let secs = if wall_time { self.epoch_seconds[e] } else { 0.0 };
            out.push_str(&format!("{},{},{},{}\n", e + 1, self.train_loss[e], val, secs));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub seconds: f64,
}

/// Network plus optimizer state, as written to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub network: NetworkDocument,
    pub optimizer: AdamState,
}

/// Epoch-at-a-time training driver. [`train`] runs it for `config.epochs`.
pub struct Trainer {
    net: HybridNetwork,
    config: TrainConfig,
    state: AdamState,
    rng: ChaCha8Rng,
    train: WindowedDataset,
    val: Option<WindowedDataset>,
    report: TrainReport,
}

impl Trainer {
    pub fn new(net: HybridNetwork, dataset: &WindowedDataset, config: TrainConfig) -> Result<Self> {
        Self::resume(net, None, dataset, config)
    }

    /// Continues from saved optimizer state, or a fresh one when `None`.
    pub fn resume(
        net: HybridNetwork,
        state: Option<AdamState>,
        dataset: &WindowedDataset,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        if dataset.is_empty() {
            return Err(Error::data(None, "training dataset is empty"));
        }
        if dataset.features() != net.input_width() {
            return Err(Error::shape(format!(
                "dataset has {} features, network expects {}",
                dataset.features(),
                net.input_width()
            )));
        }
        let n_val = (config.validation_fraction * dataset.len() as f64).floor() as usize;
        let n_train = dataset.len() - n_val;
        if n_train == 0 {
            return Err(Error::data(None, "validation split leaves no training samples"));
        }
        let train = dataset.slice(0..n_train)?;
        let val = if n_val > 0 {
            Some(dataset.slice(n_train..dataset.len())?)
        } else {
            None
        };
        let state = match state {
            Some(s) if s.first_moment.len() != net.params().len() => {
                return Err(Error::shape("optimizer state does not match the network"))
            }
            Some(s) => s,
            None => AdamState::new(&net),
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            report: TrainReport {
                final_checksum: net.checksum(),
                ..TrainReport::default()
            },
            net,
            config,
            state,
            train,
            val,
        })
    }

    pub fn network(&self) -> &HybridNetwork {
        &self.net
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    pub fn optimizer_state(&self) -> &AdamState {
        &self.state
    }

    /// One pass over the training samples in seed-shuffled mini-batches.
    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        let started = Instant::now();
        let epoch = self.report.epochs() + 1;
        let adam = self.config.adam();
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(self.config.batch_size) {
            let mut idx = chunk.to_vec();
            idx.sort_unstable();
            let batch: Vec<(&[f64], f64)> = idx
                .iter()
                .map(|&i| (self.train.window(i), self.train.target(i)))
                .collect();
            let (grads, loss) = backward(&self.net, &batch).map_err(|e| match e {
                Error::NonFinite { .. } => Error::Diverged { epoch },
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            weighted += loss * batch.len() as f64;
            let grads = clip_gradients(grads, self.config.grad_clip_norm);
            adam_step(&mut self.net, &grads, &mut self.state, &adam)?;
        }
        let train_loss = weighted / self.train.len() as f64;
        let val_loss = match &self.val {
            Some(val) => Some(dataset_mse(&self.net, val).map_err(|_| Error::Diverged { epoch })?),
            None => None,
        };
        if val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        let seconds = started.elapsed().as_secs_f64();
        self.report.train_loss.push(train_loss);
        self.report.val_loss.push(val_loss);
        self.report.epoch_seconds.push(seconds);
        self.report.final_checksum = self.net.checksum();
        Ok(EpochStats {
            epoch,
            train_loss,
            val_loss,
            seconds,
        })
    }

    pub fn into_parts(self) -> (HybridNetwork, TrainReport, AdamState) {
        (self.net, self.report, self.state)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            network: self.net.to_document(),
            optimizer: self.state.clone(),
        }
    }
}

fn dataset_mse(net: &HybridNetwork, ds: &WindowedDataset) -> Result<f64> {
    let mut sum = 0.0;
    for (w, y) in ds.iter() {
        let r = net.forward(w)? - y;
        sum += r * r;
    }
    Ok(sum / ds.len() as f64)
}

/// Trains for `config.epochs` epochs. Bit-deterministic in
/// `(net, dataset, config)`.
pub fn train(
    net: HybridNetwork,
    dataset: &WindowedDataset,
    config: &TrainConfig,
) -> Result<(HybridNetwork, TrainReport)> {
    let mut trainer = Trainer::new(net, dataset, config.clone())?;
    for _ in 0..config.epochs {
        let stats = trainer.run_epoch()?;
        log::debug!(
            "epoch {} train {:.6e} val {:?}",
            stats.epoch,
            stats.train_loss,
            stats.val_loss
        );
    }
    let (net, report, _) = trainer.into_parts();
    Ok((net, report))
}
