use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::{Error, Result};

/// Per-feature statistics for `(x - mean) / (max - min)` scaling.
///
/// This centers on the mean but divides by the range, so the output is not
/// confined to `[0, 1]`. Features with `max == min` map to 0. Values outside the
/// fitted range are not clamped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationParams {
    /// Fits on the given rows only; callers pass training rows.
    pub fn fit(train_rows: &FeatureMatrix) -> Result<Self> {
        let (rows, cols) = (train_rows.rows(), train_rows.cols());
        if rows < 2 {
            return Err(Error::data(None, "normalizer needs at least two rows"));
        }
        let mut sum = vec![0.0; cols];
        let mut min = vec![f64::INFINITY; cols];
        let mut max = vec![f64::NEG_INFINITY; cols];
        for r in 0..rows {
            for (c, &x) in train_rows.row(r).iter().enumerate() {
                sum[c] += x;
                min[c] = min[c].min(x);
                max[c] = max[c].max(x);
            }
        }
        let mean = sum
            .iter()
            .zip(min.iter().zip(&max))
            // summation rounding can push the mean a hair outside [min, max]
            .map(|(s, (&lo, &hi))| (s / rows as f64).clamp(lo, hi))
            .collect();
        Ok(Self { mean, min, max })
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }

    /// `max - min` for one feature.
    pub fn range(&self, feature: usize) -> f64 {
        self.max[feature] - self.min[feature]
    }

    pub fn normalize_value(&self, feature: usize, x: f64) -> f64 {
        let range = self.range(feature);
        if range == 0.0 {
            0.0
        } else {
            (x - self.mean[feature]) / range
        }
    }

    pub fn normalize_row(&self, row: &mut [f64]) -> Result<()> {
        if row.len() != self.features() {
            return Err(Error::shape(format!(
                "row has {} features, normalizer expects {}",
                row.len(),
                self.features()
            )));
        }
        for (c, x) in row.iter_mut().enumerate() {
            *x = self.normalize_value(c, *x);
        }
        Ok(())
    }

    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        if matrix.cols() != self.features() {
            return Err(Error::shape(format!(
                "matrix has {} features, normalizer expects {}",
                matrix.cols(),
                self.features()
            )));
        }
        let mut values = matrix.values().to_vec();
        for row in values.chunks_mut(matrix.cols()) {
            self.normalize_row(row)?;
        }
        FeatureMatrix::new(
            values,
            matrix.rows(),
            matrix.feature_names().to_vec(),
            matrix.target_index(),
        )
    }

    /// Keeps statistics for the given features only.
    pub fn select(&self, features: &[usize]) -> Self {
        Self {
            mean: features.iter().map(|&f| self.mean[f]).collect(),
            min: features.iter().map(|&f| self.min[f]).collect(),
            max: features.iter().map(|&f| self.max[f]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(col: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix::from_columns(&[col], 0).unwrap()
    }

    #[test]
    fn fit_statistics() {
        let p = NormalizationParams::fit(&single(vec![0.0, 5.0, 10.0])).unwrap();
        assert_eq!((p.mean[0], p.min[0], p.max[0]), (5.0, 0.0, 10.0));
        let c = NormalizationParams::fit(&single(vec![7.0, 7.0, 7.0])).unwrap();
        assert_eq!((c.mean[0], c.min[0], c.max[0]), (7.0, 7.0, 7.0));
    }

    #[test]
    fn features_are_independent() {
        let m = FeatureMatrix::from_columns(&[vec![0.0, 10.0], vec![100.0, 300.0]], 0).unwrap();
        let p = NormalizationParams::fit(&m).unwrap();
        assert_eq!(p.mean, vec![5.0, 200.0]);
        assert_eq!(p.range(1), 200.0);
    }

    #[test]
    fn apply_formula() {
        let m = single(vec![0.0, 5.0, 10.0]);
        let p = NormalizationParams::fit(&m).unwrap();
        assert_eq!(p.apply(&m).unwrap().column(0), vec![-0.5, 0.0, 0.5]);
        // not clamped below the training minimum
        assert_eq!(p.normalize_value(0, -5.0), -1.0);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let m = single(vec![7.0, 7.0, 7.0]);
        let p = NormalizationParams::fit(&m).unwrap();
        assert_eq!(p.apply(&m).unwrap().column(0), vec![0.0; 3]);
        assert_eq!(p.normalize_value(0, 1e6), 0.0);
    }

    #[test]
    fn errors() {
        assert!(NormalizationParams::fit(&single(vec![1.0])).is_err());
        let p = NormalizationParams::fit(&single(vec![1.0, 2.0])).unwrap();
        let two = FeatureMatrix::from_columns(&[vec![1.0], vec![2.0]], 0).unwrap();
        assert!(matches!(p.apply(&two), Err(Error::Shape(_))));
    }

    proptest! {
        #[test]
        fn round_trip_mean_and_range(col in proptest::collection::vec(-1e3f64..1e3, 2..60)) {
            let m = single(col.clone());
            let p = NormalizationParams::fit(&m).unwrap();
            prop_assert!(p.min[0] <= p.mean[0] && p.mean[0] <= p.max[0]);
            prop_assume!(p.range(0) > 1e-6);
            let out = p.apply(&m).unwrap().column(0);
            let mean = out.iter().sum::<f64>() / out.len() as f64;
            let lo = out.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((hi - lo - 1.0).abs() < 1e-12);
        }
    }
}
