//! Forecast scoring and residual-based anomaly flags.
//!
//! Metrics live in normalized target space. A record is anomalous when its
//! absolute forecast error exceeds a threshold fitted on training residuals.

mod metrics;
mod threshold;
mod verdict;

pub use metrics::{evaluate, mae, persistence_baseline, predict_all, rmse, MetricsReport};
pub use threshold::{fit_threshold, ThresholdModel, DEFAULT_K_SIGMA};
pub use verdict::{detect_batch, detect_stream, parse_record, AnomalyVerdict, RecordTransform, StreamState};
