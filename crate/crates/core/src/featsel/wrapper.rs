use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_k, check_rows, Method, SelectionReport};
use crate::dataio::FeatureMatrix;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrapperConfig {
    /// Chronological tail of the rows used to score each candidate subset.
    pub holdout_fraction: f64,
}

impl Default for WrapperConfig {
    fn default() -> Self {
        Self {
            holdout_fraction: 0.25,
        }
    }
}

/// Solves the normal equations by Cholesky, shifting the diagonal (starting
/// at 1e-8) when the system is singular.
fn solve_normal_equations(xtx: DMatrix<f64>, xty: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = xtx.clone().cholesky() {
        return ch.solve(xty);
    }
    let mut shift = 1e-8;
    loop {
        let mut a = xtx.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += shift;
        }
        if let Some(ch) = a.cholesky() {
            return ch.solve(xty);
        }
        shift *= 10.0;
    }
}

/// Fits an intercept + OLS model on the first rows and returns mean absolute
/// error on the last `ceil(holdout_fraction * n)` rows.
pub fn ols_holdout_mae(matrix: &FeatureMatrix, targets: &[f64], subset: &[usize], holdout_fraction: f64) -> f64 {
    let n = matrix.rows();
    let n_fit = (((1.0 - holdout_fraction) * n as f64).floor() as usize).clamp(1, n - 1);
    let p = subset.len() + 1;
    let design = |r: usize| std::iter::once(1.0).chain(subset.iter().map(move |&c| matrix.get(r, c)));

    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for r in 0..n_fit {
        for (slot, v) in row.iter_mut().zip(design(r)) {
            *slot = v;
        }
        for i in 0..p {
            xty[i] += row[i] * targets[r];
            for j in 0..p {
                xtx[(i, j)] += row[i] * row[j];
            }
        }
    }
    let beta = solve_normal_equations(xtx, &xty);
    let err: f64 = (n_fit..n)
        .map(|r| {
            let pred: f64 = design(r).zip(beta.iter()).map(|(x, b)| x * b).sum();
            (pred - targets[r]).abs()
        })
        .sum();
    err / (n - n_fit) as f64
}

/// Greedy forward selection scored by holdout MAE of an OLS proxy.
///
/// Each round adds the feature whose inclusion gives the lowest holdout MAE.
/// A selected feature scores `-MAE` of the round that added it; features never
/// added score below every selected one, ordered by their final-round MAE.
pub fn wrapper_select(
    matrix: &FeatureMatrix,
    targets: &[f64],
    k: usize,
    config: &WrapperConfig,
) -> Result<SelectionReport> {
    check_rows(matrix, targets)?;
    check_k(k, matrix.cols())?;
    let f = matrix.cols();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut scores = vec![f64::NAN; f];
    let mut last_round: Vec<(usize, f64)> = Vec::new();

    while chosen.len() < k {
        let candidates: Vec<usize> = (0..f).filter(|c| !chosen.contains(c)).collect();
        last_round = candidates
            .par_iter()
            .map(|&c| {
                let mut subset = chosen.clone();
                subset.push(c);
                (c, ols_holdout_mae(matrix, targets, &subset, config.holdout_fraction))
            })
            .collect();
        let &(best, mae) = last_round
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("at least one candidate");
        chosen.push(best);
        scores[best] = -mae;
        last_round.retain(|&(c, _)| c != best);
    }

    if !last_round.is_empty() {
        let floor = chosen.iter().map(|&c| scores[c]).fold(f64::INFINITY, f64::min);
        for (c, mae) in last_round {
            scores[c] = floor - 1.0 - mae;
        }
    }
    SelectionReport::from_scores(Method::Wrapper, scores, k, matrix.target_index())
}
