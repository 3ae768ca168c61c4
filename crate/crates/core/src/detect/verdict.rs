use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::predict_all;
use super::threshold::ThresholdModel;
use crate::dataio::{Cell, EncodingSpec, NormalizationParams, WindowedDataset};
use crate::nn::HybridNetwork;
use crate::{Error, Result};

/// Outcome for one forecast record. `step` is the 0-based position, in the
/// original record sequence, of the record whose target was forecast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyVerdict {
    pub step: usize,
    pub predicted: f64,
    pub actual: f64,
    pub abs_error: f64,
    pub threshold: f64,
    pub is_anomaly: bool,
    pub latency_micros: u64,
}

impl AnomalyVerdict {
    fn new(step: usize, predicted: f64, actual: f64, threshold: &ThresholdModel, latency_micros: u64) -> Self {
        let abs_error = (predicted - actual).abs();
        Self {
            step,
            predicted,
            actual,
            abs_error,
            threshold: threshold.threshold,
            is_anomaly: threshold.is_anomaly(abs_error),
            latency_micros,
        }
    }

    /// Equality on everything except the timing field.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.step == other.step
            && self.predicted.to_bits() == other.predicted.to_bits()
            && self.actual.to_bits() == other.actual.to_bits()
            && self.abs_error.to_bits() == other.abs_error.to_bits()
            && self.threshold.to_bits() == other.threshold.to_bits()
            && self.is_anomaly == other.is_anomaly
    }
}

/// One verdict per sample. Latency is reported as zero since the forecasts
/// are computed together.
pub fn detect_batch(
    net: &HybridNetwork,
    threshold: &ThresholdModel,
    dataset: &WindowedDataset,
) -> Result<Vec<AnomalyVerdict>> {
    let predictions = predict_all(net, dataset)?;
    Ok(predictions
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let step = dataset.sample_index(i) + dataset.window_length();
            AnomalyVerdict::new(step, p, dataset.target(i), threshold, 0)
        })
        .collect())
}

/// Raw record to model input: categorical encoding, normalization, then the
/// selected feature columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordTransform {
    pub encoding: EncodingSpec,
    pub normalization: NormalizationParams,
    pub selected: Vec<usize>,
}

impl RecordTransform {
    pub fn new(encoding: EncodingSpec, normalization: NormalizationParams, selected: Vec<usize>) -> Result<Self> {
        let f = encoding.feature_columns.len();
        if normalization.features() != f {
            return Err(Error::shape(format!(
                "normalizer covers {} features, encoding produces {f}",
                normalization.features()
            )));
        }
        if selected.iter().any(|&c| c >= f) {
            return Err(Error::shape(format!("selected feature out of range for {f} features")));
        }
        if !selected.contains(&encoding.target_feature_index()) {
            return Err(Error::config("selected features must include the target"));
        }
        Ok(Self {
            encoding,
            normalization,
            selected,
        })
    }

    /// Position of the target within the selected features.
    pub fn target_position(&self) -> usize {
        let t = self.encoding.target_feature_index();
        self.selected.iter().position(|&c| c == t).expect("checked in new")
    }

    pub fn apply(&self, record: &[Cell], line: Option<usize>) -> Result<Vec<f64>> {
        let mut row = self.encoding.encode_row(record, line)?;
        self.normalization.normalize_row(&mut row)?;
        Ok(self.selected.iter().map(|&c| row[c]).collect())
    }
}

/// Splits one CSV line into cells.
pub fn parse_record(line: &str) -> Result<Vec<Cell>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(line.as_bytes());
    match reader.records().next() {
        Some(Ok(record)) => Ok(record.iter().map(Cell::parse).collect()),
        Some(Err(e)) => Err(Error::data(None, e.to_string())),
        None => Err(Error::data(None, "empty record")),
    }
}

/// Online detector: keeps the last `L` transformed rows and forecasts each
/// new record's target from the rows before it.
#[derive(Debug)]
pub struct StreamState<'a> {
    net: &'a HybridNetwork,
    transform: &'a RecordTransform,
    window_length: usize,
    buffer: VecDeque<Vec<f64>>,
    window: Vec<f64>,
    records_seen: usize,
}

impl<'a> StreamState<'a> {
    pub fn new(net: &'a HybridNetwork, transform: &'a RecordTransform, window_length: usize) -> Result<Self> {
        if window_length == 0 {
            return Err(Error::config("window length must be at least 1"));
        }
        if net.input_width() != transform.selected.len() {
            return Err(Error::shape(format!(
                "network expects {} features, transform yields {}",
                net.input_width(),
                transform.selected.len()
            )));
        }
        Ok(Self {
            net,
            transform,
            window_length,
            buffer: VecDeque::with_capacity(window_length + 1),
            window: Vec::with_capacity(window_length * net.input_width()),
            records_seen: 0,
        })
    }

    /// Accepted records so far. Malformed records are not counted.
    pub fn records_seen(&self) -> usize {
        self.records_seen
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }
}

/// Feeds one raw record. Returns `None` while the buffer is still warming up
/// (the first `L` records). A malformed record yields an error and leaves the
/// state untouched.
pub fn detect_stream(
    state: &mut StreamState<'_>,
    threshold: &ThresholdModel,
    record: &[Cell],
) -> Result<Option<AnomalyVerdict>> {
    let start = Instant::now();
    let row = state.transform.apply(record, None)?;
    let step = state.records_seen;
    let verdict = if state.buffer.len() == state.window_length {
        state.window.clear();
        for r in &state.buffer {
            state.window.extend_from_slice(r);
        }
        let predicted = state.net.forward(&state.window)?;
        let actual = row[state.transform.target_position()];
        Some((predicted, actual))
    } else {
        None
    };
    if state.buffer.len() == state.window_length {
        state.buffer.pop_front();
    }
    state.buffer.push_back(row);
    state.records_seen += 1;
    Ok(verdict.map(|(predicted, actual)| {
        let micros = start.elapsed().as_micros().min(u64::MAX as u128) as u64;
        AnomalyVerdict::new(step, predicted, actual, threshold, micros)
    }))
}
