//! Feature selection: Pearson filter, greedy OLS wrapper, random-forest
//! importance (embedded) and autoencoder permutation importance.
//!
//! Every selector produces a [`SelectionReport`] whose `selected` list always
//! contains the forecast target, since the model must see the target's own
//! history.

mod autoencoder;
mod filter;
mod forest;
mod wrapper;

pub use autoencoder::{autoencoder_select, AutoencoderConfig, AutoencoderModel};
pub use filter::{filter_select, pearson};
pub use forest::{
    embedded_select, fit_random_forest, rf_importance, ForestConfig, RandomForest, RegressionTree, TreeNode,
};
pub use wrapper::{ols_holdout_mae, wrapper_select, WrapperConfig};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::FeatureMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Pass-through: every feature, equal scores.
    None,
    Filter,
    Wrapper,
    Embedded,
    Autoencoder,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::None,
        Method::Filter,
        Method::Wrapper,
        Method::Embedded,
        Method::Autoencoder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Filter => "filter",
            Method::Wrapper => "wrapper",
            Method::Embedded => "embedded",
            Method::Autoencoder => "autoencoder",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown selection method '{s}'")))
    }
}

/// Scores for every feature and the chosen subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub method: Method,
    pub k: usize,
    pub scores: Vec<f64>,
    /// Distinct feature indices, by descending score, ties by ascending index.
    pub selected: Vec<usize>,
}

/// Feature indices by descending score, ties broken by ascending index.
pub fn rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

impl SelectionReport {
    /// Top `k` by score, with `target` swapped in for the last pick if it
    /// did not make the cut.
    pub fn from_scores(method: Method, scores: Vec<f64>, k: usize, target: usize) -> Result<Self> {
        let f = scores.len();
        check_k(k, f)?;
        if target >= f {
            return Err(Error::shape(format!("target {target} out of range for {f} features")));
        }
        let order = rank(&scores);
        let mut selected: Vec<usize> = order[..k].to_vec();
        if !selected.contains(&target) {
            selected[k - 1] = target;
            selected.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        }
        Ok(Self {
            method,
            k,
            scores,
            selected,
        })
    }

    /// Keeps every feature.
    pub fn identity(features: usize) -> Self {
        Self {
            method: Method::None,
            k: features,
            scores: vec![1.0; features],
            selected: (0..features).collect(),
        }
    }

    /// Full ranking of all features by score.
    pub fn ranking(&self) -> Vec<usize> {
        rank(&self.scores)
    }
}

fn check_k(k: usize, features: usize) -> Result<()> {
    if k == 0 || k > features {
        return Err(Error::config(format!("k = {k} must lie in [1, {features}]")));
    }
    Ok(())
}

fn check_rows(matrix: &FeatureMatrix, targets: &[f64]) -> Result<()> {
    if matrix.rows() != targets.len() {
        return Err(Error::shape(format!(
            "{} rows but {} targets",
            matrix.rows(),
            targets.len()
        )));
    }
    if matrix.rows() < 3 {
        return Err(Error::data(None, "feature selection needs at least 3 rows"));
    }
    Ok(())
}

/// Runs the named method with default settings for its family.
pub fn select(
    method: Method,
    matrix: &FeatureMatrix,
    targets: &[f64],
    k: usize,
    seed: u64,
) -> Result<SelectionReport> {
    match method {
        Method::None => Ok(SelectionReport::identity(matrix.cols())),
        Method::Filter => filter_select(matrix, targets, k),
        Method::Wrapper => wrapper_select(matrix, targets, k, &WrapperConfig::default()),
        Method::Embedded => embedded_select(
            matrix,
            targets,
            k,
            &ForestConfig {
                seed,
                ..ForestConfig::default()
            },
        ),
        Method::Autoencoder => autoencoder_select(
            matrix,
            k,
            &AutoencoderConfig {
                seed,
                ..AutoencoderConfig::default()
            },
        ),
    }
}
