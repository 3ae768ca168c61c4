//! Hybrid IndRNN -> LSTM flow forecasting for network anomaly detection.
//!
//! The crate is organized along the pipeline:
//!
//! * [`dataio`]: CSV ingestion, categorical encoding, mean/range normalization,
//!   sliding windows and chronological splits.
//! * [`featsel`]: filter, wrapper, embedded (random forest) and autoencoder
//!   feature selection.
//! * [`nn`]: the IndRNN and LSTM layers, the dense head and the stacked network.
//! * [`train`]: hand-written backpropagation through time, Adam, clipping and a
//!   finite-difference gradient checker.
//! * [`detect`]: MAE/RMSE, residual thresholds, batch and streaming detection.
//! * [`pipeline`]: run configuration and the glue used by the command line tool.

pub mod dataio;
pub mod detect;
pub mod error;
pub mod featsel;
pub mod nn;
pub mod pipeline;
pub mod train;

pub use error::{Error, Result};
