//! Random forest of Gini CART trees on bootstrap samples with per-split
//! feature subsampling. Scores are tree-vote fractions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{self, SplitControls, Tree};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSubsample {
    Sqrt,
    All,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub max_features: FeatureSubsample,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
    pub n_classes: usize,
    /// Normalized total Gini decrease per feature.
    pub importance: Vec<f64>,
}

pub fn fit(
    data: &[f64],
    n: usize,
    d: usize,
    targets: &[usize],
    n_classes: usize,
    config: &ForestConfig,
    seed: u64,
) -> ForestModel {
    let controls = SplitControls {
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split,
        min_samples_leaf: config.min_samples_leaf,
    };
    let n_sub = match config.max_features {
        FeatureSubsample::All => d,
        FeatureSubsample::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
    };

    let mut trees = Vec::with_capacity(config.n_trees);
    let mut importance = vec![0.0; d];
    for t in 0..config.n_trees {
        let mut rng = rng::stream(seed, &[0x666f, t as u64]);
        let (rows, row_targets): (Vec<f64>, Vec<usize>) = if config.bootstrap {
            let mut rows = Vec::with_capacity(n * d);
            let mut tg = Vec::with_capacity(n);
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                rows.extend_from_slice(&data[i * d..(i + 1) * d]);
                tg.push(targets[i]);
            }
            (rows, tg)
        } else {
            (data.to_vec(), targets.to_vec())
        };
        let mut tree_imp = vec![0.0; d];
        let mut pick = || -> Vec<usize> {
            if n_sub == d {
                (0..d).collect()
            } else {
                // sample without replacement, returned sorted for determinism
                let mut idx: Vec<usize> = (0..d).collect();
                for i in 0..n_sub {
                    let j = rng.gen_range(i..d);
                    idx.swap(i, j);
                }
                let mut chosen = idx[..n_sub].to_vec();
                chosen.sort_unstable();
                chosen
            }
        };
        let tree = tree::fit_classification(
            &rows, d, &row_targets, n_classes, &controls, &mut pick, &mut tree_imp,
        );
        for j in 0..d {
            importance[j] += tree_imp[j];
        }
        trees.push(tree);
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        for v in &mut importance {
            *v /= total;
        }
    }
    ForestModel { config: config.clone(), trees, n_classes, importance }
}

impl ForestModel {
    /// Per-class vote fractions; sums to 1 per row.
    pub fn vote_fractions(&self, row: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for tree in &self.trees {
            let probs = tree.predict_row(row);
            // hard vote: argmax leaf class, first index on ties
            let mut best = 0;
            for (c, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = c;
                }
            }
            votes[best] += 1.0;
        }
        let total = self.trees.len() as f64;
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n_trees: usize) -> ForestConfig {
        ForestConfig {
            n_trees,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            bootstrap: true,
            max_features: FeatureSubsample::Sqrt,
        }
    }

    #[test]
    fn votes_sum_to_one() {
        let mut rng = crate::rng::stream(1, &[1]);
        let n = 30;
        let d = 4;
        let data: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let targets: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let m = fit(&data, n, d, &targets, 3, &config(25), 7);
        for i in 0..n {
            let v = m.vote_fractions(&data[i * d..(i + 1) * d]);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn importance_normalized_and_signal_feature_ranked_first() {
        let mut rng = crate::rng::stream(2, &[3]);
        let n = 60;
        let d = 6;
        let mut data = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..n {
            let cls = rng.gen_range(0..2usize);
            let mut row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            row[0] = cls as f64 * 4.0 - 2.0 + rng.gen_range(-0.2..0.2);
            data.extend(row);
            targets.push(cls);
        }
        let m = fit(&data, n, d, &targets, 2, &config(40), 3);
        assert!((m.importance.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let best = (0..d).max_by(|&a, &b| m.importance[a].partial_cmp(&m.importance[b]).unwrap()).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn single_tree_no_randomness_equals_cart_oracle() {
        // naive CART oracle: brute-force Gini over all thresholds
        fn oracle_predict(data: &[f64], d: usize, targets: &[usize], x: &[f64]) -> usize {
            fn rec(data: &[f64], d: usize, targets: &[usize], samples: Vec<usize>, x: &[f64]) -> usize {
                let classes: std::collections::BTreeSet<usize> =
                    samples.iter().map(|&i| targets[i]).collect();
                if classes.len() == 1 {
                    return *classes.iter().next().unwrap();
                }
                let gini = |set: &[usize]| -> f64 {
                    let mut c = std::collections::BTreeMap::new();
                    for &i in set {
                        *c.entry(targets[i]).or_insert(0.0) += 1.0;
                    }
                    1.0 - c.values().map(|v| (v / set.len() as f64).powi(2)).sum::<f64>()
                };
                let nf = samples.len() as f64;
                let parent = gini(&samples);
                let mut best: Option<(f64, usize, f64)> = None;
                for f in 0..d {
                    let mut vals: Vec<f64> = samples.iter().map(|&i| data[i * d + f]).collect();
                    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    vals.dedup();
                    for w in vals.windows(2) {
                        let thr = 0.5 * (w[0] + w[1]);
                        let left: Vec<usize> =
                            samples.iter().copied().filter(|&i| data[i * d + f] <= thr).collect();
                        let right: Vec<usize> =
                            samples.iter().copied().filter(|&i| data[i * d + f] > thr).collect();
                        let dec = parent
                            - left.len() as f64 / nf * gini(&left)
                            - right.len() as f64 / nf * gini(&right);
                        if dec > 1e-12 && best.map_or(true, |(bd, _, _)| dec > bd + 1e-12) {
                            best = Some((dec, f, thr));
                        }
                    }
                }
                match best {
                    None => {
                        let mut c = std::collections::BTreeMap::new();
                        for &i in &samples {
                            *c.entry(targets[i]).or_insert(0usize) += 1;
                        }
                        *c.iter().max_by_key(|(_, &v)| v).unwrap().0
                    }
                    Some((_, f, thr)) => {
                        let (side, _): (Vec<usize>, Vec<usize>) =
                            samples.iter().partition(|&&i| data[i * d + f] <= thr);
                        if x[f] <= thr {
                            rec(data, d, targets, side, x)
                        } else {
                            let other: Vec<usize> =
                                samples.iter().copied().filter(|&i| data[i * d + f] > thr).collect();
                            rec(data, d, targets, other, x)
                        }
                    }
                }
            }
            rec(data, d, targets, (0..targets.len()).collect(), x)
        }

        let mut rng = crate::rng::stream(11, &[5]);
        let n = 40;
        let d = 3;
        let data: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let targets: Vec<usize> =
            (0..n).map(|i| ((data[i * d] + 0.3 * data[i * d + 1]) > 0.0) as usize).collect();
        let cfg = ForestConfig {
            n_trees: 1,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            bootstrap: false,
            max_features: FeatureSubsample::All,
        };
        let m = fit(&data, n, d, &targets, 2, &cfg, 0);
        for i in 0..n {
            let row = &data[i * d..(i + 1) * d];
            let probs = m.trees[0].predict_row(row);
            let pred = if probs[1] > probs[0] { 1 } else { 0 };
            assert_eq!(pred, oracle_predict(&data, d, &targets, row), "sample {i}");
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let mut rng = crate::rng::stream(4, &[4]);
        let n = 25;
        let d = 5;
        let data: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let targets: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let a = fit(&data, n, d, &targets, 2, &config(15), 9);
        let b = fit(&data, n, d, &targets, 2, &config(15), 9);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
