//! Capacity-constrained K-means used to partition nodes for the bi-level
//! neighborhood decoder.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;

/// Partition of `N` nodes into `k` clusters of at most `capacity = ⌈N/k⌉`
/// members. Members are indexed inside their cluster by ascending node id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAssignment", into = "RawAssignment")]
pub struct ClusterAssignment {
    k: usize,
    capacity: usize,
    cluster_of: Vec<usize>,
    index_in_cluster: Vec<usize>,
    members: Vec<Vec<NodeId>>,
}

#[derive(Serialize, Deserialize)]
struct RawAssignment {
    k: usize,
    cluster_of: Vec<usize>,
}

impl TryFrom<RawAssignment> for ClusterAssignment {
    type Error = Error;

    fn try_from(raw: RawAssignment) -> Result<Self> {
        ClusterAssignment::from_cluster_ids(raw.cluster_of, raw.k)
    }
}

impl From<ClusterAssignment> for RawAssignment {
    fn from(c: ClusterAssignment) -> Self {
        RawAssignment {
            k: c.k,
            cluster_of: c.cluster_of,
        }
    }
}

pub fn capacity_for(n: usize, k: usize) -> usize {
    n.div_ceil(k)
}

impl ClusterAssignment {
    /// Validates a per-node cluster id vector against the capacity bound.
    pub fn from_cluster_ids(cluster_of: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("cluster count must be positive".into()));
        }
        let capacity = capacity_for(cluster_of.len(), k);
        let mut members = vec![Vec::new(); k];
        let mut index_in_cluster = vec![0; cluster_of.len()];
        for (i, &c) in cluster_of.iter().enumerate() {
            if c >= k {
                return Err(Error::InvalidArgument(format!(
                    "node {i} assigned to cluster {c} >= {k}"
                )));
            }
            index_in_cluster[i] = members[c].len();
            members[c].push(i);
        }
        if let Some((c, m)) = members.iter().enumerate().find(|(_, m)| m.len() > capacity) {
            return Err(Error::InvalidArgument(format!(
                "cluster {c} has {} members, capacity is {capacity}",
                m.len()
            )));
        }
        Ok(Self {
            k,
            capacity,
            cluster_of,
            index_in_cluster,
            members,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn n_nodes(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn cluster_of(&self, i: NodeId) -> usize {
        self.cluster_of[i]
    }

    pub fn index_in_cluster(&self, i: NodeId) -> usize {
        self.index_in_cluster[i]
    }

    /// Members of cluster `c`, ascending.
    pub fn members(&self, c: usize) -> &[NodeId] {
        &self.members[c]
    }

    pub fn size(&self, c: usize) -> usize {
        self.members[c].len()
    }

    pub fn cluster_ids(&self) -> &[usize] {
        &self.cluster_of
    }
}

fn squared_distances(x: ArrayView2<f64>, centroids: &Array2<f64>) -> Array2<f64> {
    let xx: Array1<f64> = x.map_axis(Axis(1), |r| r.dot(&r));
    let cc: Array1<f64> = centroids.map_axis(Axis(1), |r| r.dot(&r));
    let mut d = x.dot(&centroids.t());
    for ((i, j), v) in d.indexed_iter_mut() {
        *v = (xx[i] + cc[j] - 2.0 * *v).max(0.0);
    }
    d
}

/// Maximin seeding: a seeded random first centroid, then repeatedly the
/// point farthest from all chosen centroids (lowest id on ties).
fn seed_centroids(x: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let last = x.row(*chosen.last().unwrap());
        for (i, row) in x.rows().into_iter().enumerate() {
            let d: f64 = row.iter().zip(last).map(|(a, b)| (a - b) * (a - b)).sum();
            nearest[i] = nearest[i].min(d);
        }
        let mut best = None;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            match best {
                Some(b) if nearest[i] <= nearest[b] => {}
                _ => best = Some(i),
            }
        }
        chosen.push(best.expect("k <= n leaves a candidate"));
    }
    let mut c = Array2::zeros((k, x.ncols()));
    for (row, &i) in c.rows_mut().into_iter().zip(&chosen) {
        let mut row = row;
        row.assign(&x.row(i));
    }
    c
}

/// Greedy capacity-constrained assignment: (point, cluster) pairs are taken
/// in ascending distance order (ties by node id, then cluster id), skipping
/// assigned points and full clusters. Empty clusters then receive the point
/// farthest from its current centroid.
fn assign(dist: &Array2<f64>, capacity: usize) -> Vec<usize> {
    let (n, k) = dist.dim();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * k);
    for ((i, c), &d) in dist.indexed_iter() {
        pairs.push((d, i, c));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut cluster_of = vec![usize::MAX; n];
    let mut sizes = vec![0usize; k];
    let mut left = n;
    for (_, i, c) in pairs {
        if left == 0 {
            break;
        }
        if cluster_of[i] != usize::MAX || sizes[c] >= capacity {
            continue;
        }
        cluster_of[i] = c;
        sizes[c] += 1;
        left -= 1;
    }

    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let mut victim = None;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            let c = cluster_of[i];
            if sizes[c] > 1 && dist[[i, c]] > worst {
                worst = dist[[i, c]];
                victim = Some(i);
            }
        }
        let i = victim.expect("k <= n leaves a cluster with two members");
        sizes[cluster_of[i]] -= 1;
        cluster_of[i] = empty;
        sizes[empty] += 1;
    }
    cluster_of
}

/// Lloyd iteration with a capacity-constrained assignment step. Stops at a
/// fixed point or after `max_iters` assignment rounds.
pub fn balanced_kmeans(
    x: ArrayView2<f64>,
    k: usize,
    max_iters: usize,
    seed: u64,
) -> Result<ClusterAssignment> {
    let n = x.nrows();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds {n} points")));
    }
    let capacity = capacity_for(n, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(x, k, &mut rng);
    let mut cluster_of = assign(&squared_distances(x, &centroids), capacity);

    for _ in 1..max_iters.max(1) {
        centroids.fill(0.0);
        let mut counts = vec![0usize; k];
        for (i, &c) in cluster_of.iter().enumerate() {
            let mut row = centroids.row_mut(c);
            row += &x.row(i);
            counts[c] += 1;
        }
        for (mut row, &cnt) in centroids.rows_mut().into_iter().zip(&counts) {
            row /= cnt as f64;
        }
        let next = assign(&squared_distances(x, &centroids), capacity);
        if next == cluster_of {
            break;
        }
        cluster_of = next;
    }
    ClusterAssignment::from_cluster_ids(cluster_of, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn within_cluster_cost(x: &Array2<f64>, cluster_of: &[usize], k: usize) -> f64 {
        let mut cost = 0.0;
        for c in 0..k {
            let idx: Vec<_> = (0..x.nrows()).filter(|&i| cluster_of[i] == c).collect();
            for (a, &i) in idx.iter().enumerate() {
                for &j in &idx[a + 1..] {
                    cost += x.row(i).iter().zip(x.row(j)).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
                }
            }
        }
        cost
    }

    #[test]
    fn two_separated_pairs() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        // exhaustive oracle over capacity-feasible labelings
        let mut best = (f64::INFINITY, vec![]);
        for mask in 0u32..16 {
            let labels: Vec<usize> = (0..4).map(|i| ((mask >> i) & 1) as usize).collect();
            if labels.iter().filter(|&&l| l == 0).count() != 2 {
                continue;
            }
            let cost = within_cluster_cost(&x, &labels, 2);
            if cost < best.0 {
                best = (cost, labels);
            }
        }
        for seed in 0..20 {
            let a = balanced_kmeans(x.view(), 2, 50, seed).unwrap();
            assert_eq!(a.cluster_of(0), a.cluster_of(1));
            assert_eq!(a.cluster_of(2), a.cluster_of(3));
            assert_ne!(a.cluster_of(0), a.cluster_of(2));
            assert_eq!(within_cluster_cost(&x, a.cluster_ids(), 2), best.0);
            assert_eq!(a.size(0), 2);
        }
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let x = array![[0.0], [3.0], [1.0], [7.0], [2.0]];
        let a = balanced_kmeans(x.view(), 5, 10, 3).unwrap();
        assert_eq!(a.capacity(), 1);
        for c in 0..5 {
            assert_eq!(a.size(c), 1);
        }
    }

    #[test]
    fn identical_points_split_evenly() {
        let x = Array2::<f64>::ones((4, 3));
        let a = balanced_kmeans(x.view(), 2, 10, 0).unwrap();
        assert_eq!(a.size(0), 2);
        assert_eq!(a.size(1), 2);
        // ties resolve by node id: lower ids fill the first cluster they reach
        assert_eq!(a.cluster_of(0), a.cluster_of(1));
        assert_eq!(a.cluster_of(2), a.cluster_of(3));
    }

    #[test]
    fn rejects_bad_k() {
        let x = Array2::<f64>::zeros((3, 2));
        assert!(balanced_kmeans(x.view(), 0, 5, 0).is_err());
        assert!(balanced_kmeans(x.view(), 4, 5, 0).is_err());
    }

    #[test]
    fn index_in_cluster_follows_node_order() {
        let a = ClusterAssignment::from_cluster_ids(vec![1, 0, 1, 0, 1], 2).unwrap();
        assert_eq!(a.capacity(), 3);
        assert_eq!(a.members(1), &[0, 2, 4]);
        assert_eq!(a.index_in_cluster(4), 2);
        assert_eq!(a.index_in_cluster(3), 1);
        assert!(ClusterAssignment::from_cluster_ids(vec![0, 0, 0, 1], 2).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let a = ClusterAssignment::from_cluster_ids(vec![1, 0, 1, 0], 2).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<ClusterAssignment>(&s).unwrap(), a);
        assert!(serde_json::from_str::<ClusterAssignment>(r#"{"k":1,"cluster_of":[0,0,3]}"#).is_err());
    }

    #[test]
    fn capacity_holds_over_many_seeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x = Array2::from_shape_fn((103, 4), |_| rng.random::<f64>());
        for seed in 0..100 {
            let a = balanced_kmeans(x.view(), 10, 8, seed).unwrap();
            let max = (0..10).map(|c| a.size(c)).max().unwrap();
            assert!(max <= 11, "seed {seed}: cluster of size {max}");
            assert!((0..10).all(|c| a.size(c) > 0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn deterministic_and_balanced(n in 2usize..60, k_frac in 0.05f64..1.0, seed in 0u64..1000) {
            let k = ((n as f64 * k_frac).ceil() as usize).clamp(1, n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>());
            let a = balanced_kmeans(x.view(), k, 6, seed).unwrap();
            let b = balanced_kmeans(x.view(), k, 6, seed).unwrap();
            prop_assert_eq!(&a, &b);
            for c in 0..k {
                prop_assert!(a.size(c) <= capacity_for(n, k));
                for (m, &i) in a.members(c).iter().enumerate() {
                    prop_assert_eq!(a.index_in_cluster(i), m);
                    prop_assert_eq!(a.cluster_of(i), c);
                }
            }
        }
    }
}
