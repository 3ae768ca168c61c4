use super::{check_k, check_rows, Method, SelectionReport};
use crate::dataio::FeatureMatrix;
use crate::Result;

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    }
}

/// Scores each feature by `|pearson(feature, targets)|`.
pub fn filter_select(matrix: &FeatureMatrix, targets: &[f64], k: usize) -> Result<SelectionReport> {
    check_rows(matrix, targets)?;
    check_k(k, matrix.cols())?;
    let scores = (0..matrix.cols())
        .map(|c| pearson(&matrix.column(c), targets).abs())
        .collect();
    SelectionReport::from_scores(Method::Filter, scores, k, matrix.target_index())
}
