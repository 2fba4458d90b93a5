//! Seeded synthetic graphs used by tests, benches and the `make-toy` command.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AttributedGraph, Split};

/// Contextual stochastic block model: Gaussian attributes around a class
/// centroid, edges drawn with `p_in` inside a class and `p_out` across.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedPartition {
    pub n_nodes: usize,
    pub n_classes: usize,
    pub n_features: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Scale of the class centroids relative to unit attribute noise.
    pub separation: f64,
    pub train_per_class: usize,
    pub n_val: usize,
    pub seed: u64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        Self {
            n_nodes: 100,
            n_classes: 3,
            n_features: 16,
            p_in: 0.12,
            p_out: 0.01,
            separation: 1.0,
            train_per_class: 5,
            n_val: 20,
            seed: 0,
        }
    }
}

impl PlantedPartition {
    pub fn generate(&self) -> AttributedGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.n_nodes;
        let c = self.n_classes.max(1);
        let mut classes: Vec<usize> = (0..n).map(|i| i % c).collect();
        classes.shuffle(&mut rng);

        let centroids = Array2::from_shape_fn((c, self.n_features), |_| {
            self.separation * rng.sample::<f64, _>(StandardNormal)
        });
        let features = Array2::from_shape_fn((n, self.n_features), |(i, j)| {
            centroids[[classes[i], j]] + rng.sample::<f64, _>(StandardNormal)
        });

        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let p = if classes[u] == classes[v] {
                    self.p_in
                } else {
                    self.p_out
                };
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }

        let mut taken = vec![0usize; c];
        let mut val_left = self.n_val;
        let split = classes
            .iter()
            .map(|&k| {
                if taken[k] < self.train_per_class {
                    taken[k] += 1;
                    Split::Train
                } else if val_left > 0 {
                    val_left -= 1;
                    Split::Val
                } else {
                    Split::Test
                }
            })
            .collect();
        let labels = classes.into_iter().map(Some).collect();
        AttributedGraph::new(features, edges, labels, split).expect("generator output is valid")
    }
}

/// `G(n, p)` with standard-normal attributes, no labels, all nodes `test`.
pub fn erdos_renyi(n: usize, p: f64, n_features: usize, seed: u64) -> AttributedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let features = Array2::from_shape_fn((n, n_features), |_| rng.sample(StandardNormal));
    AttributedGraph::new(features, edges, vec![None; n], vec![Split::Test; n])
        .expect("generator output is valid")
}
