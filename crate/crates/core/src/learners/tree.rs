//! CART decision trees: Gini classification and variance-reduction regression.
//!
//! Splits are scanned deterministically: candidate features in ascending
//! index order, thresholds at midpoints between distinct sorted values, first
//! strictly-better split wins.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Class probabilities (classification) or a single value (regression).
        value: Vec<f64>,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
pub struct SplitControls {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for SplitControls {
    fn default() -> Self {
        Self { max_depth: None, min_samples_split: 2, min_samples_leaf: 1 }
    }
}

impl Tree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { .. } => return idx,
                Node::Split { feature, threshold, left, right } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => value,
            _ => unreachable!(),
        }
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|&c| (c / total) * (c / total)).sum::<f64>()
}

/// Grow a classification tree. `data` is row-major n x d; `targets` are class
/// indices < n_classes; `feature_pick` selects the candidate features for
/// each split (identity for a plain CART tree, a random subset for forests).
/// Gini decreases weighted by node fraction are accumulated into
/// `importance` (length d).
pub fn fit_classification(
    data: &[f64],
    n_features: usize,
    targets: &[usize],
    n_classes: usize,
    controls: &SplitControls,
    feature_pick: &mut dyn FnMut() -> Vec<usize>,
    importance: &mut [f64],
) -> Tree {
    let n_total = targets.len();
    let mut tree = Tree { nodes: Vec::new() };
    let root: Vec<usize> = (0..n_total).collect();
    grow_classification(
        &mut tree, data, n_features, targets, n_classes, controls, feature_pick, importance, root, 0,
        n_total,
    );
    tree
}

#[allow(clippy::too_many_arguments)]
fn grow_classification(
    tree: &mut Tree,
    data: &[f64],
    d: usize,
    targets: &[usize],
    n_classes: usize,
    controls: &SplitControls,
    feature_pick: &mut dyn FnMut() -> Vec<usize>,
    importance: &mut [f64],
    samples: Vec<usize>,
    depth: usize,
    n_total: usize,
) -> usize {
    let n = samples.len();
    let mut counts = vec![0.0; n_classes];
    for &i in &samples {
        counts[targets[i]] += 1.0;
    }
    let node_imp = gini(&counts, n as f64);

    let stop = node_imp == 0.0
        || n < controls.min_samples_split
        || controls.max_depth.is_some_and(|md| depth >= md);
    if !stop {
        let candidates = feature_pick();
        if let Some(best) = best_classification_split(
            data, d, targets, n_classes, &samples, &candidates, controls, node_imp,
        ) {
            importance[best.feature] += (n as f64 / n_total as f64) * best.decrease;
            let idx = tree.nodes.len();
            tree.nodes.push(Node::Split { feature: best.feature, threshold: best.threshold, left: 0, right: 0 });
            let left = grow_classification(
                tree, data, d, targets, n_classes, controls, feature_pick, importance, best.left,
                depth + 1, n_total,
            );
            let right = grow_classification(
                tree, data, d, targets, n_classes, controls, feature_pick, importance, best.right,
                depth + 1, n_total,
            );
            if let Node::Split { left: l, right: r, .. } = &mut tree.nodes[idx] {
                *l = left;
                *r = right;
            }
            return idx;
        }
    }
    let total: f64 = counts.iter().sum();
    let probs: Vec<f64> = counts.iter().map(|&c| c / total).collect();
    let idx = tree.nodes.len();
    tree.nodes.push(Node::Leaf { value: probs, n });
    idx
}

#[allow(clippy::too_many_arguments)]
fn best_classification_split(
    data: &[f64],
    d: usize,
    targets: &[usize],
    n_classes: usize,
    samples: &[usize],
    candidates: &[usize],
    controls: &SplitControls,
    node_imp: f64,
) -> Option<BestSplit> {
    let n = samples.len();
    let nf = n as f64;
    let mut best: Option<BestSplit> = None;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for &f in candidates {
        order.clear();
        order.extend_from_slice(samples);
        order.sort_by(|&a, &b| {
            data[a * d + f].partial_cmp(&data[b * d + f]).unwrap().then(a.cmp(&b))
        });
        let mut left_counts = vec![0.0; n_classes];
        let mut total_counts = vec![0.0; n_classes];
        for &i in &order {
            total_counts[targets[i]] += 1.0;
        }
        for split_at in 1..n {
            left_counts[targets[order[split_at - 1]]] += 1.0;
            let prev = data[order[split_at - 1] * d + f];
            let cur = data[order[split_at] * d + f];
            if cur <= prev {
                continue;
            }
            if split_at < controls.min_samples_leaf || n - split_at < controls.min_samples_leaf {
                continue;
            }
            let nl = split_at as f64;
            let nr = nf - nl;
            let right_counts: Vec<f64> =
                total_counts.iter().zip(&left_counts).map(|(t, l)| t - l).collect();
            let decrease =
                node_imp - (nl / nf) * gini(&left_counts, nl) - (nr / nf) * gini(&right_counts, nr);
            if decrease > 1e-12 && best.as_ref().map_or(true, |b| decrease > b.decrease + 1e-12) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: 0.5 * (prev + cur),
                    decrease,
                    left: order[..split_at].to_vec(),
                    right: order[split_at..].to_vec(),
                });
            }
        }
    }
    best
}

/// Grow a regression tree on squared-error splits. Leaf values are sample
/// means of `targets`; gains are accumulated into `importance`.
pub fn fit_regression(
    data: &[f64],
    n_features: usize,
    targets: &[f64],
    controls: &SplitControls,
    candidates: &[usize],
    importance: &mut [f64],
) -> Tree {
    let mut tree = Tree { nodes: Vec::new() };
    let root: Vec<usize> = (0..targets.len()).collect();
    let n_total = targets.len();
    grow_regression(&mut tree, data, n_features, targets, controls, candidates, importance, root, 0, n_total);
    tree
}

#[allow(clippy::too_many_arguments)]
fn grow_regression(
    tree: &mut Tree,
    data: &[f64],
    d: usize,
    targets: &[f64],
    controls: &SplitControls,
    candidates: &[usize],
    importance: &mut [f64],
    samples: Vec<usize>,
    depth: usize,
    n_total: usize,
) -> usize {
    let n = samples.len();
    let mean = samples.iter().map(|&i| targets[i]).sum::<f64>() / n as f64;
    let sse: f64 = samples.iter().map(|&i| (targets[i] - mean).powi(2)).sum();

    let stop = sse <= 1e-12
        || n < controls.min_samples_split
        || controls.max_depth.is_some_and(|md| depth >= md);
    if !stop {
        if let Some(best) = best_regression_split(data, d, targets, &samples, candidates, controls, sse) {
            importance[best.feature] += best.decrease / n_total as f64;
            let idx = tree.nodes.len();
            tree.nodes.push(Node::Split { feature: best.feature, threshold: best.threshold, left: 0, right: 0 });
            let left = grow_regression(
                tree, data, d, targets, controls, candidates, importance, best.left, depth + 1, n_total,
            );
            let right = grow_regression(
                tree, data, d, targets, controls, candidates, importance, best.right, depth + 1, n_total,
            );
            if let Node::Split { left: l, right: r, .. } = &mut tree.nodes[idx] {
                *l = left;
                *r = right;
            }
            return idx;
        }
    }
    let idx = tree.nodes.len();
    tree.nodes.push(Node::Leaf { value: vec![mean], n });
    idx
}

fn best_regression_split(
    data: &[f64],
    d: usize,
    targets: &[f64],
    samples: &[usize],
    candidates: &[usize],
    controls: &SplitControls,
    node_sse: f64,
) -> Option<BestSplit> {
    let n = samples.len();
    let mut best: Option<BestSplit> = None;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for &f in candidates {
        order.clear();
        order.extend_from_slice(samples);
        order.sort_by(|&a, &b| {
            data[a * d + f].partial_cmp(&data[b * d + f]).unwrap().then(a.cmp(&b))
        });
        let total: f64 = order.iter().map(|&i| targets[i]).sum();
        let total_sq: f64 = order.iter().map(|&i| targets[i] * targets[i]).sum();
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for split_at in 1..n {
            let t = targets[order[split_at - 1]];
            left_sum += t;
            left_sq += t * t;
            let prev = data[order[split_at - 1] * d + f];
            let cur = data[order[split_at] * d + f];
            if cur <= prev {
                continue;
            }
            if split_at < controls.min_samples_leaf || n - split_at < controls.min_samples_leaf {
                continue;
            }
            let nl = split_at as f64;
            let nr = (n - split_at) as f64;
            let right_sum = total - left_sum;
            let right_sq = total_sq - left_sq;
            let sse_l = left_sq - left_sum * left_sum / nl;
            let sse_r = right_sq - right_sum * right_sum / nr;
            let decrease = node_sse - sse_l - sse_r;
            if decrease > 1e-12 && best.as_ref().map_or(true, |b| decrease > b.decrease + 1e-12) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: 0.5 * (prev + cur),
                    decrease,
                    left: order[..split_at].to_vec(),
                    right: order[split_at..].to_vec(),
                });
            }
        }
    }
    best
}
