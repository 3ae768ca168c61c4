use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::WindowedDataset;
use crate::nn::HybridNetwork;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

impl MetricsReport {
    pub fn from_predictions(predictions: &[f64], targets: &[f64]) -> Result<Self> {
        Ok(Self {
            mae: mae(predictions, targets)?,
            rmse: rmse(predictions, targets)?,
            n: predictions.len(),
        })
    }

    /// Both metrics multiplied by `range`, i.e. expressed in raw target units
    /// when the targets were scaled by `1 / range`.
    pub fn scaled(&self, range: f64) -> Self {
        Self {
            mae: self.mae * range.abs(),
            rmse: self.rmse * range.abs(),
            n: self.n,
        }
    }
}

fn check(predictions: &[f64], targets: &[f64]) -> Result<()> {
    if predictions.len() != targets.len() {
        return Err(Error::shape(format!(
            "{} predictions but {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::data(None, "metrics need at least one sample"));
    }
    Ok(())
}

pub fn mae(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check(predictions, targets)?;
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / predictions.len() as f64)
}

pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check(predictions, targets)?;
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sum / predictions.len() as f64).sqrt())
}

/// Network forecast for every sample, in sample order.
pub fn predict_all(net: &HybridNetwork, dataset: &WindowedDataset) -> Result<Vec<f64>> {
    if dataset.features() != net.input_width() {
        return Err(Error::shape(format!(
            "dataset has {} features, network expects {}",
            dataset.features(),
            net.input_width()
        )));
    }
    (0..dataset.len())
        .into_par_iter()
        .map(|i| net.forward(dataset.window(i)))
        .collect()
}

pub fn evaluate(net: &HybridNetwork, dataset: &WindowedDataset) -> Result<MetricsReport> {
    let predictions = predict_all(net, dataset)?;
    MetricsReport::from_predictions(&predictions, &dataset.targets())
}

/// Scores the lag-one forecast: each sample predicts the target value seen
/// in the last row of its window.
pub fn persistence_baseline(dataset: &WindowedDataset) -> Result<MetricsReport> {
    let predictions: Vec<f64> = (0..dataset.len()).map(|i| dataset.last_observed_target(i)).collect();
    MetricsReport::from_predictions(&predictions, &dataset.targets())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::FeatureMatrix;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        assert_eq!(mae(&[1.0, 3.0], &[2.0, 5.0]).unwrap(), 1.5);
        assert!((rmse(&[1.0, 3.0], &[2.0, 5.0]).unwrap() - 2.5_f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&[4.0, 4.0], &[4.0, 4.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[-0.25], &[0.5]).unwrap(), 0.75);
        assert_eq!(mae(&[-0.25], &[0.5]).unwrap(), 0.75);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(mae(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn persistence_on_ramp_and_constant() {
        let ramp = FeatureMatrix::from_columns(&[(0..20).map(|i| 0.5 * i as f64).collect()], 0).unwrap();
        let m = persistence_baseline(&WindowedDataset::from_matrix(&ramp, 3).unwrap()).unwrap();
        assert!((m.mae - 0.5).abs() < 1e-15);
        assert_eq!(m.n, 17);
        let flat = FeatureMatrix::from_columns(&[vec![2.0; 9]], 0).unwrap();
        let m = persistence_baseline(&WindowedDataset::from_matrix(&flat, 2).unwrap()).unwrap();
        assert_eq!((m.mae, m.rmse), (0.0, 0.0));
    }

    #[test]
    fn json_field_names() {
        let m = MetricsReport { mae: 0.5, rmse: 1.0, n: 3 };
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"mae":0.5,"rmse":1.0,"n":3}"#);
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..60)) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (a, r) = (mae(&p, &t).unwrap(), rmse(&p, &t).unwrap());
            prop_assert!(r >= a * (1.0 - 1e-12));
        }

        #[test]
        fn permutation_invariant(pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..40), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (ps, ts): (Vec<f64>, Vec<f64>) = shuffled.into_iter().unzip();
            prop_assert!((mae(&p, &t).unwrap() - mae(&ps, &ts).unwrap()).abs() < 1e-12);
            prop_assert!((rmse(&p, &t).unwrap() - rmse(&ps, &ts).unwrap()).abs() < 1e-12);
        }
    }
}
