//! Data ingestion and preparation: CSV tables, categorical encoding,
//! normalization, sliding windows and chronological splits.

mod encoding;
mod matrix;
pub mod nslkdd;
mod normalize;
mod table;
mod window;

pub use encoding::EncodingSpec;
pub use matrix::FeatureMatrix;
pub use normalize::NormalizationParams;
pub use table::{load_csv, parse_csv, Cell, RawTable};
pub use window::{make_windows, split_chronological, SplitSpec, WindowedDataset};

/// Default sliding-window length (ten past steps predict the eleventh).
pub const DEFAULT_WINDOW_LENGTH: usize = 10;

/// Default fraction of windowed samples used for training.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
