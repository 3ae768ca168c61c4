use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_k, check_rows, Method, SelectionReport};
use crate::dataio::FeatureMatrix;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means `ceil(F / 3)`.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 12,
            min_samples_leaf: 5,
            features_per_split: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// `(SSE_node - SSE_left - SSE_right) / n_root`: the variance
        /// reduction weighted by the node's share of the training samples.
        impurity_decrease: f64,
    },
    Leaf {
        prediction: f64,
    },
}

/// Binary regression tree; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<RegressionTree>,
    pub features: usize,
    pub features_per_split: usize,
    pub bootstrap_seed: u64,
}

fn sse(samples: &[usize], y: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mean = samples.iter().map(|&s| y[s]).sum::<f64>() / samples.len() as f64;
    samples.iter().map(|&s| (y[s] - mean).powi(2)).sum()
}

struct TreeParams {
    max_depth: usize,
    min_samples_leaf: usize,
    features_per_split: usize,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl RegressionTree {
    /// Fits on the given sample indices (repeats allowed, as in a bootstrap).
    pub fn fit(
        matrix: &FeatureMatrix,
        y: &[f64],
        samples: Vec<usize>,
        max_depth: usize,
        min_samples_leaf: usize,
        features_per_split: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let params = TreeParams {
            max_depth,
            min_samples_leaf: min_samples_leaf.max(1),
            features_per_split: features_per_split.clamp(1, matrix.cols()),
        };
        let n_root = samples.len() as f64;
        let mut tree = RegressionTree { nodes: Vec::new() };
        // (node index, samples, depth)
        let mut stack = vec![(0usize, samples, 0usize)];
        tree.nodes.push(TreeNode::Leaf { prediction: 0.0 });
        while let Some((id, samples, depth)) = stack.pop() {
            let mean = samples.iter().map(|&s| y[s]).sum::<f64>() / samples.len().max(1) as f64;
            let split = if depth < params.max_depth && samples.len() >= 2 * params.min_samples_leaf {
                best_split(matrix, y, &samples, &params, rng)
            } else {
                None
            };
            match split {
                None => tree.nodes[id] = TreeNode::Leaf { prediction: mean },
                Some(c) => {
                    let (left, right): (Vec<usize>, Vec<usize>) =
                        samples.iter().partition(|&&s| matrix.get(s, c.feature) <= c.threshold);
                    let decrease = (sse(&samples, y) - sse(&left, y) - sse(&right, y)) / n_root;
                    let (l, r) = (tree.nodes.len(), tree.nodes.len() + 1);
                    tree.nodes.push(TreeNode::Leaf { prediction: 0.0 });
                    tree.nodes.push(TreeNode::Leaf { prediction: 0.0 });
                    tree.nodes[id] = TreeNode::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left: l,
                        right: r,
                        impurity_decrease: decrease,
                    };
                    stack.push((r, right, depth + 1));
                    stack.push((l, left, depth + 1));
                }
            }
        }
        tree
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Leaf { prediction } => return *prediction,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => id = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn walk(t: &RegressionTree, id: usize) -> usize {
            match &t.nodes[id] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }
}

/// Best variance-reducing split over a random subset of features. Thresholds
/// are midpoints between consecutive distinct sorted values.
fn best_split(
    matrix: &FeatureMatrix,
    y: &[f64],
    samples: &[usize],
    params: &TreeParams,
    rng: &mut impl Rng,
) -> Option<Candidate> {
    let n = samples.len();
    let total: f64 = samples.iter().map(|&s| y[s]).sum();
    let parent_score = total * total / n as f64;
    let mut features = index::sample(rng, matrix.cols(), params.features_per_split).into_vec();
    features.sort_unstable();

    let mut best: Option<Candidate> = None;
    let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
    for feature in features {
        order.clear();
        order.extend(samples.iter().map(|&s| (matrix.get(s, feature), y[s])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += order[i].1;
            let n_left = i + 1;
            if order[i].0 == order[i + 1].0 || n_left < params.min_samples_leaf || n - n_left < params.min_samples_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            // SSE reduction = sum_l^2/n_l + sum_r^2/n_r - total^2/n
            let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64 - parent_score;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let (lo, hi) = (order[i].0, order[i + 1].0);
                let mid = lo + (hi - lo) / 2.0;
                best = Some(Candidate {
                    feature,
                    threshold: if mid < hi { mid } else { lo },
                    gain,
                });
            }
        }
    }
    // relative tolerance against prefix-sum rounding on constant targets
    best.filter(|b| b.gain > 1e-12 * parent_score.abs().max(1e-300))
}

/// Bagged regression trees. Tree `i` draws its bootstrap sample and feature
/// subsets from stream `i` of a ChaCha generator seeded by `config.seed`, so
/// the forest is identical whether trees are fitted serially or in parallel.
pub fn fit_random_forest(matrix: &FeatureMatrix, targets: &[f64], config: &ForestConfig) -> Result<RandomForest> {
    if matrix.rows() != targets.len() {
        return Err(Error::shape(format!(
            "{} rows but {} targets",
            matrix.rows(),
            targets.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::data(None, "random forest needs data"));
    }
    if config.n_trees == 0 {
        return Err(Error::config("n_trees must be at least 1"));
    }
    let f = matrix.cols();
    let per_split = config.features_per_split.unwrap_or(f.div_ceil(3)).clamp(1, f);
    let n = matrix.rows();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let samples: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            RegressionTree::fit(
                matrix,
                targets,
                samples,
                config.max_depth,
                config.min_samples_leaf,
                per_split,
                &mut rng,
            )
        })
        .collect();
    Ok(RandomForest {
        trees,
        features: f,
        features_per_split: per_split,
        bootstrap_seed: config.seed,
    })
}

impl RandomForest {
    /// Mean of the tree predictions.
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Summed impurity decrease per split feature, normalized to sum to 1 (all
/// zeros when no tree splits).
pub fn rf_importance(forest: &RandomForest) -> Vec<f64> {
    let mut scores = vec![0.0; forest.features];
    for tree in &forest.trees {
        for node in &tree.nodes {
            if let TreeNode::Split {
                feature,
                impurity_decrease,
                ..
            } = node
            {
                scores[*feature] += impurity_decrease;
            }
        }
    }
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        for s in &mut scores {
            *s /= total;
        }
    }
    scores
}

pub fn embedded_select(
    matrix: &FeatureMatrix,
    targets: &[f64],
    k: usize,
    config: &ForestConfig,
) -> Result<SelectionReport> {
    check_rows(matrix, targets)?;
    check_k(k, matrix.cols())?;
    let forest = fit_random_forest(matrix, targets, config)?;
    SelectionReport::from_scores(Method::Embedded, rf_importance(&forest), k, matrix.target_index())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_data(n: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let y = cols[0].iter().map(|&v| if v < 0.5 { 0.0 } else { 1.0 }).collect();
        (FeatureMatrix::from_columns(&cols, 0).unwrap(), y)
    }

    #[test]
    fn constant_target_gives_single_leaves() {
        let (m, _) = step_data(50, 1);
        let forest = fit_random_forest(&m, &[2.5; 50], &ForestConfig { n_trees: 4, ..Default::default() }).unwrap();
        for t in &forest.trees {
            assert_eq!(t.nodes, vec![TreeNode::Leaf { prediction: 2.5 }]);
        }
        assert_eq!(rf_importance(&forest), vec![0.0; 3]);
    }

    #[test]
    fn step_function_split_matches_brute_force() {
        let (m, y) = step_data(200, 2);
        let cfg = ForestConfig {
            n_trees: 1,
            max_depth: 1,
            min_samples_leaf: 1,
            features_per_split: Some(3),
            seed: 11,
        };
        let forest = fit_random_forest(&m, &y, &cfg).unwrap();
        let tree = &forest.trees[0];
        let TreeNode::Split { feature, threshold, .. } = tree.nodes[0] else {
            panic!("root should split");
        };
        assert_eq!(feature, 0);
        assert!((threshold - 0.5).abs() < 0.05);
        for r in 0..m.rows() {
            let p = forest.predict(m.row(r));
            assert!(p.abs() < 1e-12 || (p - 1.0).abs() < 1e-12);
        }
        assert!(rf_importance(&forest)[0] >= 0.99);

        // brute force over all features and thresholds on the full data:
        // the only zero-error split is on feature 0 between the classes
        let mut best = (f64::INFINITY, 0);
        for f in 0..3 {
            let mut vals = m.column(f);
            vals.sort_by(f64::total_cmp);
            for w in vals.windows(2) {
                let thr = (w[0] + w[1]) / 2.0;
                let (l, r): (Vec<usize>, Vec<usize>) = (0..200).partition(|&i| m.get(i, f) <= thr);
                let e = sse(&l, &y) + sse(&r, &y);
                if e < best.0 {
                    best = (e, f);
                }
            }
        }
        assert_eq!(best.1, 0);
        assert!(best.0 < 1e-12);
    }

    #[test]
    fn averaging() {
        let leaf = |p| RegressionTree { nodes: vec![TreeNode::Leaf { prediction: p }] };
        let forest = RandomForest {
            trees: vec![leaf(1.0), leaf(3.0)],
            features: 1,
            features_per_split: 1,
            bootstrap_seed: 0,
        };
        assert_eq!(forest.predict(&[0.0]), 2.0);
    }

    #[test]
    fn depth_is_bounded_and_fit_is_deterministic() {
        let (m, y) = step_data(120, 3);
        let noisy: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + (i as f64 * 0.37).sin()).collect();
        let cfg = ForestConfig {
            n_trees: 5,
            max_depth: 4,
            min_samples_leaf: 2,
            ..Default::default()
        };
        let a = fit_random_forest(&m, &noisy, &cfg).unwrap();
        assert!(a.trees.iter().all(|t| t.depth() <= 4));
        assert_eq!(a, fit_random_forest(&m, &noisy, &cfg).unwrap());
        let s: f64 = rf_importance(&a).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn importance_matches_independent_traversal() {
        let (m, y) = step_data(150, 4);
        let noisy: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + 0.3 * (i as f64 * 0.71).cos()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<usize> = (0..150).map(|_| rng.random_range(0..150)).collect();
        let tree = RegressionTree::fit(&m, &noisy, samples.clone(), 6, 3, 2, &mut rng);

        // route the fitting samples through the finished tree and recompute
        fn route(t: &RegressionTree, m: &FeatureMatrix, id: usize, s: Vec<usize>, out: &mut Vec<(usize, Vec<usize>)>) {
            if let TreeNode::Split { feature, threshold, left, right, .. } = t.nodes[id] {
                let (l, r): (Vec<usize>, Vec<usize>) = s.iter().partition(|&&i| m.get(i, feature) <= threshold);
                route(t, m, left, l, out);
                route(t, m, right, r, out);
            }
            out.push((id, s));
        }
        let mut routed = Vec::new();
        route(&tree, &m, 0, samples.clone(), &mut routed);
        let by_id: std::collections::HashMap<usize, Vec<usize>> = routed.into_iter().collect();
        let var_sum = |s: &[usize]| {
            let mu = s.iter().map(|&i| noisy[i]).sum::<f64>() / s.len() as f64;
            s.iter().map(|&i| (noisy[i] - mu) * (noisy[i] - mu)).sum::<f64>()
        };
        let mut splits = 0;
        for (id, node) in tree.nodes.iter().enumerate() {
            if let TreeNode::Split { left, right, impurity_decrease, .. } = node {
                let expect = (var_sum(&by_id[&id]) - var_sum(&by_id[left]) - var_sum(&by_id[right])) / 150.0;
                assert!((expect - impurity_decrease).abs() < 1e-12);
                splits += 1;
            }
        }
        assert!(splits > 1);
    }

    #[test]
    fn single_feature_and_full_k() {
        let m = FeatureMatrix::from_columns(&[(0..30).map(|i| i as f64).collect()], 0).unwrap();
        let y: Vec<f64> = (0..30).map(|i| (i / 10) as f64).collect();
        let r = embedded_select(&m, &y, 1, &ForestConfig { n_trees: 3, ..Default::default() }).unwrap();
        assert_eq!(r.selected, vec![0]);

        let (m, y) = step_data(60, 5);
        let r = embedded_select(&m, &y, 3, &ForestConfig { n_trees: 3, ..Default::default() }).unwrap();
        assert_eq!(r.selected, r.ranking());
    }
}
