//! End-to-end stages shared by the command-line tool and the tests:
//! prepare, select, train, evaluate.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dataio::{
    self, make_windows, split_chronological, EncodingSpec, FeatureMatrix, NormalizationParams, RawTable, SplitSpec,
    WindowedDataset,
};
use crate::detect::{
    evaluate, persistence_baseline, predict_all, MetricsReport, RecordTransform, ThresholdModel, DEFAULT_K_SIGMA,
};
use crate::featsel::{self, Method, SelectionReport};
use crate::nn::{default_u_max, init_network, Activation, Architecture, HybridNetwork};
use crate::train::{TrainConfig, TrainReport, Trainer};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub method: Method,
    /// Features kept, the target included. Values above the feature count
    /// keep everything.
    pub k: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            method: Method::None,
            k: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub indrnn_widths: Vec<usize>,
    pub lstm_width: usize,
    pub activation: Activation,
    pub candidate_tanh: bool,
    /// Recurrent weight bound; `None` means `2^(1/L)`.
    pub u_max: Option<f64>,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            indrnn_widths: vec![64, 64],
            lstm_width: 64,
            activation: Activation::Relu,
            candidate_tanh: false,
            u_max: None,
        }
    }
}

impl ArchitectureConfig {
    pub fn resolve(&self, input_width: usize, window_length: usize) -> Architecture {
        Architecture {
            input_width,
            indrnn_widths: self.indrnn_widths.clone(),
            lstm_width: self.lstm_width,
            activation: self.activation,
            candidate_tanh: self.candidate_tanh,
            u_max: self.u_max.unwrap_or_else(|| default_u_max(window_length)),
        }
    }
}

/// Every knob of a run. `seed` drives initialization, shuffling and the
/// randomized selectors; it overrides `train.seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub has_header: bool,
    pub target: String,
    /// Columns dropped before encoding. Names that do not occur are ignored.
    pub exclude: Vec<String>,
    pub window_length: usize,
    pub train_fraction: f64,
    pub selection: SelectionConfig,
    pub architecture: ArchitectureConfig,
    pub train: TrainConfig,
    pub k_sigma: f64,
    pub seed: u64,
    /// Write measured epoch times into the loss CSV instead of zeros.
    pub record_wall_time: bool,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            has_header: false,
            target: dataio::nslkdd::DEFAULT_TARGET.to_owned(),
            exclude: vec![
                dataio::nslkdd::LABEL_COLUMN.to_owned(),
                dataio::nslkdd::DIFFICULTY_COLUMN.to_owned(),
            ],
            window_length: dataio::DEFAULT_WINDOW_LENGTH,
            train_fraction: dataio::DEFAULT_TRAIN_FRACTION,
            selection: SelectionConfig::default(),
            architecture: ArchitectureConfig::default(),
            train: TrainConfig::default(),
            k_sigma: DEFAULT_K_SIGMA,
            seed: 0,
            record_wall_time: false,
            out: None,
        }
    }
}

impl RunConfig {
    /// Checks everything that can be checked without reading data, and
    /// copies `seed` into `train.seed`.
    pub fn validate(&mut self) -> Result<()> {
        self.train.seed = self.seed;
        if self.target.is_empty() {
            return Err(Error::config("target column name is empty"));
        }
        if self.exclude.contains(&self.target) {
            return Err(Error::config(format!("target '{}' is also excluded", self.target)));
        }
        if self.window_length == 0 {
            return Err(Error::config("window_length must be at least 1"));
        }
        SplitSpec::new(self.train_fraction)?;
        if self.selection.k == 0 {
            return Err(Error::config("selection k must be at least 1"));
        }
        if !(self.k_sigma > 0.0 && self.k_sigma.is_finite()) {
            return Err(Error::config("k_sigma must be positive"));
        }
        self.architecture.resolve(1, self.window_length).validate()?;
        self.train.validate()
    }
}

/// Encoded, normalized data with the fitted transforms.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub encoding: EncodingSpec,
    pub normalization: NormalizationParams,
    /// All rows, normalized, every feature.
    pub matrix: FeatureMatrix,
    pub window_length: usize,
    pub train_fraction: f64,
}

/// Summary of a prepared data set, stored next to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedInfo {
    pub rows: usize,
    pub features: usize,
    pub feature_names: Vec<String>,
    pub target_feature: usize,
    pub window_length: usize,
    pub train_fraction: f64,
    pub samples: usize,
    pub train_samples: usize,
    /// Rows `[0, fit_rows)` fitted the encoding and normalization.
    pub fit_rows: usize,
}

fn train_samples(rows: usize, window_length: usize, train_fraction: f64) -> Result<usize> {
    let samples = rows.saturating_sub(window_length);
    let n_train = SplitSpec::new(train_fraction)?.train_count(samples);
    if n_train == 0 || n_train == samples {
        return Err(Error::data(
            None,
            format!("{rows} rows with window {window_length} leave no train/test split"),
        ));
    }
    Ok(n_train)
}

/// Encodes and normalizes `table`. The encoding and normalization see only
/// the rows that training windows touch.
pub fn prepare(table: &RawTable, config: &RunConfig) -> Result<Prepared> {
    let target = table
        .column_index(&config.target)
        .ok_or_else(|| Error::config(format!("no column named '{}'", config.target)))?;
    let excluded: Vec<usize> = config.exclude.iter().filter_map(|n| table.column_index(n)).collect();
    let n_train = train_samples(table.row_count(), config.window_length, config.train_fraction)?;
    let fit_rows = n_train + config.window_length;

    let head = RawTable {
        column_names: table.column_names.clone(),
        rows: table.rows[..fit_rows].to_vec(),
        lines: table.lines[..fit_rows].to_vec(),
    };
    let encoding = EncodingSpec::fit_excluding(&head, target, &excluded)?;
    let encoded = encoding.apply(table)?;
    let normalization = NormalizationParams::fit(&encoded.slice_rows(0, fit_rows)?)?;
    let matrix = normalization.apply(&encoded)?;
    Ok(Prepared {
        encoding,
        normalization,
        matrix,
        window_length: config.window_length,
        train_fraction: config.train_fraction,
    })
}

impl Prepared {
    pub fn info(&self) -> PreparedInfo {
        let rows = self.matrix.rows();
        let samples = rows.saturating_sub(self.window_length);
        let train = SplitSpec {
            train_fraction: self.train_fraction,
        }
        .train_count(samples);
        PreparedInfo {
            rows,
            features: self.matrix.cols(),
            feature_names: self.matrix.feature_names().to_vec(),
            target_feature: self.matrix.target_index(),
            window_length: self.window_length,
            train_fraction: self.train_fraction,
            samples,
            train_samples: train,
            fit_rows: train + self.window_length,
        }
    }

    /// Feature rows and next-step targets drawn from the fit rows, for the
    /// selectors: row `t` is paired with the target at `t + 1`.
    pub fn selection_data(&self) -> Result<(FeatureMatrix, Vec<f64>)> {
        let fit_rows = self.info().fit_rows;
        let x = self.matrix.slice_rows(0, fit_rows - 1)?;
        let t = self.matrix.target_index();
        let y = (1..fit_rows).map(|r| self.matrix.get(r, t)).collect();
        Ok((x, y))
    }

    /// Train and test windows over the chosen feature columns.
    pub fn datasets(&self, selected: &[usize]) -> Result<(WindowedDataset, WindowedDataset)> {
        let sliced = self.matrix.select_columns(selected)?;
        let windows = make_windows(&sliced, self.window_length)?;
        split_chronological(&windows, SplitSpec::new(self.train_fraction)?)
    }

    pub fn transform(&self, selected: &[usize]) -> Result<RecordTransform> {
        RecordTransform::new(self.encoding.clone(), self.normalization.clone(), selected.to_vec())
    }

    /// `max - min` of the target over the fit rows; multiplies normalized
    /// errors back into raw units.
    pub fn target_range(&self) -> f64 {
        self.normalization.range(self.matrix.target_index())
    }
}

/// Runs the configured selector on the fit rows. `k` is capped at the
/// feature count.
pub fn select_features(prepared: &Prepared, config: &RunConfig) -> Result<SelectionReport> {
    select_with(prepared, config.selection.method, config.selection.k, config.seed)
}

pub fn select_with(prepared: &Prepared, method: Method, k: usize, seed: u64) -> Result<SelectionReport> {
    let (x, y) = prepared.selection_data()?;
    let k = k.min(x.cols());
    featsel::select(method, &x, &y, k, seed)
}

pub fn build_network(config: &RunConfig, input_width: usize) -> Result<HybridNetwork> {
    let arch = config.architecture.resolve(input_width, config.window_length);
    arch.validate()?;
    init_network(&arch, config.seed)
}

/// Trained model, its curves and the residual threshold.
#[derive(Clone, Debug)]
pub struct Trained {
    pub network: HybridNetwork,
    pub report: TrainReport,
    pub checkpoint: crate::train::Checkpoint,
    pub threshold: ThresholdModel,
}

pub fn train_model(config: &RunConfig, train_set: &WindowedDataset) -> Result<Trained> {
    let net = build_network(config, train_set.features())?;
    let mut trainer = Trainer::new(net, train_set, config.train.clone())?;
    for _ in 0..config.train.epochs {
        let stats = trainer.run_epoch()?;
        log::info!(
            "epoch {} train_loss {:.6e} val_loss {}",
            stats.epoch,
            stats.train_loss,
            stats.val_loss.map_or("-".to_owned(), |v| format!("{v:.6e}"))
        );
    }
    let checkpoint = trainer.checkpoint();
    let (network, report, _) = trainer.into_parts();
    let threshold = fit_residual_threshold(&network, train_set, config.k_sigma)?;
    Ok(Trained {
        network,
        report,
        checkpoint,
        threshold,
    })
}

pub fn fit_residual_threshold(net: &HybridNetwork, train_set: &WindowedDataset, k_sigma: f64) -> Result<ThresholdModel> {
    let predictions = predict_all(net, train_set)?;
    let errors: Vec<f64> = predictions
        .iter()
        .zip(train_set.targets())
        .map(|(p, t)| (p - t).abs())
        .collect();
    ThresholdModel::fit(&errors, k_sigma)
}

/// Test-split metrics for the network and the persistence forecast, in
/// normalized and raw units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub hybrid: MetricsReport,
    pub persistence: MetricsReport,
    pub raw_units: RawMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawMetrics {
    pub target_range: f64,
    pub hybrid: MetricsReport,
    pub persistence: MetricsReport,
}

pub fn evaluate_model(net: &HybridNetwork, test_set: &WindowedDataset, target_range: f64) -> Result<Evaluation> {
    let hybrid = evaluate(net, test_set)?;
    let persistence = persistence_baseline(test_set)?;
    Ok(Evaluation {
        hybrid,
        persistence,
        raw_units: RawMetrics {
            target_range,
            hybrid: hybrid.scaled(target_range),
            persistence: persistence.scaled(target_range),
        },
    })
}

/// One line of the method comparison table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub model: &'static str,
    pub method: Method,
    pub features: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mae_raw: f64,
    pub rmse_raw: f64,
}

/// Selects, trains and evaluates once per selection method. Rows come out
/// grouped by model (`hybrid` first, then `persistence`), each group in
/// [`Method::ALL`] order.
pub fn sweep(prepared: &Prepared, config: &RunConfig) -> Result<Vec<SweepRow>> {
    let mut hybrid = Vec::new();
    let mut persistence = Vec::new();
    for method in Method::ALL {
        let report = select_with(prepared, method, config.selection.k, config.seed)?;
        let (train_set, test_set) = prepared.datasets(&report.selected)?;
        let trained = train_model(config, &train_set)?;
        let eval = evaluate_model(&trained.network, &test_set, prepared.target_range())?;
        let row = |model, m: &MetricsReport, raw: &MetricsReport| SweepRow {
            model,
            method,
            features: report.selected.len(),
            mae: m.mae,
            rmse: m.rmse,
            mae_raw: raw.mae,
            rmse_raw: raw.rmse,
        };
        hybrid.push(row("hybrid", &eval.hybrid, &eval.raw_units.hybrid));
        persistence.push(row("persistence", &eval.persistence, &eval.raw_units.persistence));
    }
    hybrid.extend(persistence);
    Ok(hybrid)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("model,method,features,mae,rmse,mae_raw,rmse_raw\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.model, r.method, r.features, r.mae, r.rmse, r.mae_raw, r.rmse_raw
        ));
    }
    out
}

/// Matrix as CSV with a header of feature names. Values use the shortest
/// representation that reads back to the same bits.
pub fn matrix_to_csv(matrix: &FeatureMatrix) -> String {
    let mut out = matrix.feature_names().join(",");
    out.push('\n');
    for r in 0..matrix.rows() {
        let row: Vec<String> = matrix.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_table(table: &RawTable, target_index: usize) -> Result<FeatureMatrix> {
    let mut values = Vec::with_capacity(table.row_count() * table.width());
    for (row, &line) in table.rows.iter().zip(&table.lines) {
        for cell in row {
            values.push(
                cell.as_number()
                    .ok_or_else(|| Error::data(Some(line), "prepared data must be numeric"))?,
            );
        }
    }
    FeatureMatrix::new(values, table.row_count(), table.column_names.clone(), target_index)
}

/// Rebuilds a [`Prepared`] from its stored parts.
pub fn restore_prepared(
    encoding: EncodingSpec,
    normalization: NormalizationParams,
    matrix: FeatureMatrix,
    info: &PreparedInfo,
) -> Result<Prepared> {
    if matrix.cols() != normalization.features() || matrix.cols() != encoding.feature_columns.len() {
        return Err(Error::shape("prepared artifacts disagree on the feature count"));
    }
    let names: BTreeSet<&String> = matrix.feature_names().iter().collect();
    if names.len() != matrix.cols() {
        return Err(Error::data(None, "duplicate feature names in prepared data"));
    }
    Ok(Prepared {
        encoding,
        normalization,
        matrix,
        window_length: info.window_length,
        train_fraction: info.train_fraction,
    })
}
