use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::{Error, Result};

/// Sliding-window samples over a feature matrix.
///
/// Sample `s` reads matrix rows `[s, s + L)` as input and the target feature at
/// row `s + L` as its label. Rows are shared, so windows are contiguous
/// row-major slices and slicing a dataset copies nothing.
#[derive(Clone, Debug)]
pub struct WindowedDataset {
    rows: Arc<[f64]>,
    features: usize,
    window_length: usize,
    target_index: usize,
    /// Index of this dataset's first sample in the full windowing.
    offset: usize,
    len: usize,
}

pub fn make_windows(matrix: &FeatureMatrix, window_length: usize) -> Result<WindowedDataset> {
    WindowedDataset::from_matrix(matrix, window_length)
}

impl WindowedDataset {
    pub fn from_matrix(matrix: &FeatureMatrix, window_length: usize) -> Result<Self> {
        if window_length == 0 {
            return Err(Error::config("window length must be at least 1"));
        }
        Ok(Self {
            rows: matrix.values().into(),
            features: matrix.cols(),
            window_length,
            target_index: matrix.target_index(),
            offset: 0,
            len: matrix.rows().saturating_sub(window_length),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    /// Position of sample `i` in the full, unsplit windowing.
    pub fn sample_index(&self, i: usize) -> usize {
        self.offset + i
    }

    /// The `L x F` input window of sample `i`, row-major.
    pub fn window(&self, i: usize) -> &[f64] {
        assert!(i < self.len, "sample {i} out of range for {} samples", self.len);
        let start = (self.offset + i) * self.features;
        &self.rows[start..start + self.window_length * self.features]
    }

    pub fn target(&self, i: usize) -> f64 {
        assert!(i < self.len, "sample {i} out of range for {} samples", self.len);
        self.rows[(self.offset + i + self.window_length) * self.features + self.target_index]
    }

    /// Target feature in the last row of window `i` (the persistence forecast).
    pub fn last_observed_target(&self, i: usize) -> f64 {
        let w = self.window(i);
        w[w.len() - self.features + self.target_index]
    }

    pub fn targets(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.target(i)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len).map(move |i| (self.window(i), self.target(i)))
    }

    /// Samples `range` of this dataset, sharing storage.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.len {
            return Err(Error::shape(format!(
                "sample range {range:?} invalid for {} samples",
                self.len
            )));
        }
        Ok(Self {
            offset: self.offset + range.start,
            len: range.end - range.start,
            rows: Arc::clone(&self.rows),
            ..*self
        })
    }
}

/// Chronological train/test boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::config(format!(
                "train fraction {train_fraction} must lie in (0, 1)"
            )));
        }
        Ok(Self { train_fraction })
    }

    /// `floor(train_fraction * samples)`.
    pub fn train_count(&self, samples: usize) -> usize {
        (self.train_fraction * samples as f64).floor() as usize
    }
}

/// First `floor(fraction * S)` samples train, the rest test. No shuffling.
pub fn split_chronological(
    dataset: &WindowedDataset,
    spec: SplitSpec,
) -> Result<(WindowedDataset, WindowedDataset)> {
    let spec = SplitSpec::new(spec.train_fraction)?;
    let n_train = spec.train_count(dataset.len());
    if n_train == 0 {
        return Err(Error::data(
            None,
            format!(
                "{} samples at train fraction {}: train split would be empty",
                dataset.len(),
                spec.train_fraction
            ),
        ));
    }
    if n_train == dataset.len() {
        return Err(Error::data(
            None,
            format!(
                "{} samples at train fraction {}: test split would be empty",
                dataset.len(),
                spec.train_fraction
            ),
        ));
    }
    Ok((dataset.slice(0..n_train)?, dataset.slice(n_train..dataset.len())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(t: usize) -> FeatureMatrix {
        let a: Vec<f64> = (0..t).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..t).map(|i| 100.0 + i as f64).collect();
        FeatureMatrix::from_columns(&[a, b], 1).unwrap()
    }

    #[test]
    fn twelve_steps_window_ten() {
        let ds = make_windows(&ramp(12), 10).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.window(0)[0], 0.0);
        assert_eq!(ds.window(0)[18], 9.0);
        assert_eq!(ds.target(0), 110.0);
        assert_eq!(ds.window(1)[0], 1.0);
        assert_eq!(ds.target(1), 111.0);
        assert_eq!(ds.last_observed_target(1), 110.0);
    }

    #[test]
    fn boundaries() {
        assert_eq!(make_windows(&ramp(10), 10).unwrap().len(), 0);
        assert_eq!(make_windows(&ramp(11), 10).unwrap().len(), 1);
        assert!(make_windows(&ramp(5), 0).is_err());
    }

    #[test]
    fn split_counts() {
        let ds = make_windows(&ramp(20), 10).unwrap();
        let (tr, te) = split_chronological(&ds, SplitSpec { train_fraction: 0.8 }).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert_eq!(te.sample_index(0), 8);
        assert_eq!(te.target(0), ds.target(8));
        let (tr, te) = split_chronological(&ds, SplitSpec { train_fraction: 0.5 }).unwrap();
        assert_eq!((tr.len(), te.len()), (5, 5));
    }

    #[test]
    fn split_rejects_empty_side() {
        let ds = make_windows(&ramp(13), 10).unwrap();
        assert_eq!(ds.len(), 3);
        assert!(split_chronological(&ds, SplitSpec { train_fraction: 0.2 }).is_err());
        assert!(SplitSpec::new(1.0).is_err());
        assert!(SplitSpec::new(0.0).is_err());
    }
}
