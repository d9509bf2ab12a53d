//! K-nearest-neighbour classifier. Scores are neighbour weight fractions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnnWeights {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnnMetric {
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    pub n_neighbors: usize,
    pub weights: KnnWeights,
    pub metric: KnnMetric,
    pub train_data: Vec<f64>,
    pub train_targets: Vec<usize>,
    pub n_classes: usize,
    pub n_features: usize,
}

impl KnnModel {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.metric {
            KnnMetric::Euclidean => {
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            }
            KnnMetric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }

    /// Per-class weight fractions over the k nearest neighbours; sums to 1.
    pub fn class_fractions(&self, row: &[f64]) -> Vec<f64> {
        let n = self.train_targets.len();
        let d = self.n_features;
        let mut dists: Vec<(f64, usize)> = (0..n)
            .map(|i| (self.distance(&self.train_data[i * d..(i + 1) * d], row), i))
            .collect();
        // ties broken by training index
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let k = self.n_neighbors.min(n);
        let neighbors = &dists[..k];

        let mut acc = vec![0.0; self.n_classes];
        match self.weights {
            KnnWeights::Uniform => {
                for &(_, i) in neighbors {
                    acc[self.train_targets[i]] += 1.0;
                }
            }
            KnnWeights::Distance => {
                // exact matches dominate: weight only the zero-distance neighbours
                if neighbors.iter().any(|&(dist, _)| dist == 0.0) {
                    for &(dist, i) in neighbors {
                        if dist == 0.0 {
                            acc[self.train_targets[i]] += 1.0;
                        }
                    }
                } else {
                    for &(dist, i) in neighbors {
                        acc[self.train_targets[i]] += 1.0 / dist;
                    }
                }
            }
        }
        let total: f64 = acc.iter().sum();
        acc.iter_mut().for_each(|v| *v /= total);
        acc
    }
}
