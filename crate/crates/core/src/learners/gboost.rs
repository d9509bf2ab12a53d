//! Gradient-boosted regression trees on logistic loss, one-vs-rest heads.
//!
//! Each stage fits a squared-error CART tree to the residual y - p, then
//! replaces leaf values with the Newton step sum(g)/sum(p(1-p)) scaled by the
//! learning rate. Row subsampling is without replacement; column subsampling
//! is per tree.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{self, Node, SplitControls, Tree};
use crate::rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GboostConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub colsample: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GboostHead {
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GboostModel {
    pub config: GboostConfig,
    pub heads: Vec<GboostHead>,
    /// Normalized total split gain per feature, across heads.
    pub importance: Vec<f64>,
}

impl GboostHead {
    /// Log-odds score.
    pub fn score(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_row(row)[0]).sum::<f64>()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn fit(
    data: &[f64],
    n: usize,
    d: usize,
    targets: &[usize],
    n_classes: usize,
    config: &GboostConfig,
    seed: u64,
) -> GboostModel {
    let controls = SplitControls {
        max_depth: Some(config.max_depth),
        min_samples_split: 2,
        min_samples_leaf: 1,
    };
    let mut heads = Vec::with_capacity(n_classes);
    let mut importance = vec![0.0; d];
    for class in 0..n_classes {
        let y: Vec<f64> = targets.iter().map(|&t| (t == class) as usize as f64).collect();
        let p_base = (y.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
        let base_score = (p_base / (1.0 - p_base)).ln();
        let mut score = vec![base_score; n];
        let mut trees = Vec::with_capacity(config.n_trees);
        let mut head_rng = rng::stream(seed, &[0x6762, class as u64]);

        for _ in 0..config.n_trees {
            let p: Vec<f64> = score.iter().map(|&s| sigmoid(s)).collect();
            let grad: Vec<f64> = y.iter().zip(&p).map(|(y, p)| y - p).collect();
            let hess: Vec<f64> = p.iter().map(|&p| p * (1.0 - p)).collect();

            // row subsample without replacement
            let n_rows = ((config.subsample * n as f64).ceil() as usize).clamp(2, n);
            let rows: Vec<usize> = if n_rows == n {
                (0..n).collect()
            } else {
                let mut idx: Vec<usize> = (0..n).collect();
                for i in 0..n_rows {
                    let j = head_rng.gen_range(i..n);
                    idx.swap(i, j);
                }
                let mut chosen = idx[..n_rows].to_vec();
                chosen.sort_unstable();
                chosen
            };
            // column subsample per tree
            let n_cols = ((config.colsample * d as f64).ceil() as usize).clamp(1, d);
            let cols: Vec<usize> = if n_cols == d {
                (0..d).collect()
            } else {
                let mut idx: Vec<usize> = (0..d).collect();
                for i in 0..n_cols {
                    let j = head_rng.gen_range(i..d);
                    idx.swap(i, j);
                }
                let mut chosen = idx[..n_cols].to_vec();
                chosen.sort_unstable();
                chosen
            };

            let sub_data: Vec<f64> = rows.iter().flat_map(|&i| data[i * d..(i + 1) * d].iter().copied()).collect();
            let sub_grad: Vec<f64> = rows.iter().map(|&i| grad[i]).collect();
            let mut tree_imp = vec![0.0; d];
            let mut tree = tree::fit_regression(&sub_data, d, &sub_grad, &controls, &cols, &mut tree_imp);
            for j in 0..d {
                importance[j] += tree_imp[j];
            }

            // Newton leaf values from the subsample's gradients and hessians
            let n_nodes = tree.nodes.len();
            let mut leaf_g = vec![0.0; n_nodes];
            let mut leaf_h = vec![0.0; n_nodes];
            for (k, &i) in rows.iter().enumerate() {
                let leaf = tree.leaf_index(&sub_data[k * d..(k + 1) * d]);
                leaf_g[leaf] += grad[i];
                leaf_h[leaf] += hess[i];
            }
            for (idx, node) in tree.nodes.iter_mut().enumerate() {
                if let Node::Leaf { value, .. } = node {
                    value[0] = config.learning_rate * leaf_g[idx] / (leaf_h[idx] + 1e-12);
                }
            }
            for (i, s) in score.iter_mut().enumerate() {
                *s += tree.predict_row(&data[i * d..(i + 1) * d])[0];
            }
            trees.push(tree);
        }
        heads.push(GboostHead { base_score, trees });
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        for v in &mut importance {
            *v /= total;
        }
    }
    GboostModel { config: config.clone(), heads, importance }
}
