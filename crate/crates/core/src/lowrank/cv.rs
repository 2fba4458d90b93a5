//! Grid search over rank ratio, penalty weight and synthetic amount with
//! k-fold cross-validation on a subsample of the training nodes.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gcn::{accuracy_on, gcn_forward, train_node_classifier, GcnConfig, GcnInputs, LowRankConfig, NodeSets};
use crate::augment::{assemble_augmented_graph, SyntheticBatch};
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, NodeId, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub gammas: Vec<f64>,
    pub taus: Vec<f64>,
    /// Synthetic nodes as a multiple of the labeled set size.
    pub betas: Vec<usize>,
}

impl CvGrid {
    /// γ ∈ {0.1, …, 0.9}, τ ∈ {0.05, …, 0.5}, β ∈ {1, …, 10}.
    pub fn standard() -> Self {
        Self {
            gammas: (1..=9).map(|i| i as f64 / 10.0).collect(),
            taus: (1..=10).map(|i| i as f64 * 0.05).collect(),
            betas: (1..=10).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.gammas.len() * self.taus.len() * self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvBudget {
    /// Share of each class's training nodes used for cross-validation.
    pub fraction: f64,
    pub folds: usize,
    /// Share of the full epoch count each fold trains for.
    pub epoch_fraction: f64,
}

impl Default for CvBudget {
    fn default() -> Self {
        Self {
            fraction: 0.2,
            folds: 5,
            epoch_fraction: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub beta: usize,
    pub tau: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub point: CvPoint,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: CvPoint,
    /// Every grid point in search order.
    pub scores: Vec<CvScore>,
}

/// Synthetic nodes per class for amount `beta`: `β · |labeled| / classes`,
/// rounded.
pub fn synthetic_per_class(beta: usize, n_labeled: usize, n_classes: usize) -> usize {
    if n_classes == 0 {
        return 0;
    }
    ((beta * n_labeled) as f64 / n_classes as f64).round() as usize
}

/// First `per_class` rows of each class in `pool`, in pool order.
pub fn take_per_class(pool: &SyntheticBatch, n_classes: usize, per_class: usize) -> Result<SyntheticBatch> {
    let mut rows = Vec::with_capacity(per_class * n_classes);
    for c in 0..n_classes {
        let of_class: Vec<usize> = (0..pool.len()).filter(|&r| pool.labels[r] == c).take(per_class).collect();
        if of_class.len() < per_class {
            return Err(Error::InvalidArgument(format!(
                "synthetic pool has {} nodes of class {c}, need {per_class}",
                of_class.len()
            )));
        }
        rows.extend(of_class);
    }
    Ok(pool.subset(&rows))
}

/// Stratified subsample of the labeled training nodes split into folds.
fn make_folds(g: &AttributedGraph, budget: &CvBudget, seed: u64) -> Result<Vec<Vec<NodeId>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train: Vec<NodeId> = g.nodes_in(Split::Train).into_iter().filter(|&i| g.label(i).is_some()).collect();
    let mut folds = vec![Vec::new(); budget.folds];
    let mut slot = 0;
    for c in 0..g.n_classes() {
        let mut nodes: Vec<NodeId> = train.iter().copied().filter(|&i| g.label(i) == Some(c)).collect();
        if nodes.is_empty() {
            continue;
        }
        nodes.shuffle(&mut rng);
        let take = ((budget.fraction * nodes.len() as f64).ceil() as usize).clamp(1, nodes.len());
        for &i in &nodes[..take] {
            folds[slot % budget.folds].push(i);
            slot += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Scores every grid point by mean held-out accuracy over the folds. Each
/// fold trains on the remaining folds plus the synthetic nodes for `β`,
/// taken from `pool`. Ties go to the smallest `(β, τ, γ)`.
pub fn cross_validate(
    g: &AttributedGraph,
    pool: Option<&SyntheticBatch>,
    grid: &CvGrid,
    budget: &CvBudget,
    gcn: &GcnConfig,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    if budget.folds < 2 || !(budget.fraction > 0.0 && budget.fraction <= 1.0) || !(budget.epoch_fraction > 0.0) {
        return Err(Error::InvalidArgument(format!("bad cross-validation budget {budget:?}")));
    }
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (gammas, taus) = (sorted(&grid.gammas), sorted(&grid.taus));
    let mut betas = grid.betas.clone();
    betas.sort_unstable();

    let folds = make_folds(g, budget, gcn.seed)?;
    let n_labeled = g.nodes_in(Split::Train).iter().filter(|&&i| g.label(i).is_some()).count();
    for (f, held) in folds.iter().enumerate() {
        for c in 0..g.n_classes() {
            let present = folds.iter().flatten().any(|&i| g.label(i) == Some(c));
            let in_rest = folds
                .iter()
                .enumerate()
                .filter(|&(o, _)| o != f)
                .flat_map(|(_, v)| v)
                .any(|&i| g.label(i) == Some(c));
            if present && !in_rest {
                return Err(Error::InvalidArgument(format!(
                    "fold {f} leaves class {c} without training nodes ({} held out)",
                    held.len()
                )));
            }
        }
    }
    let cfg = GcnConfig {
        epochs: ((gcn.epochs as f64) * budget.epoch_fraction).ceil() as usize,
        keep_best: false,
        ..*gcn
    };

    let mut scores = Vec::with_capacity(grid.len());
    for &beta in &betas {
        let per_class = synthetic_per_class(beta, n_labeled, g.n_classes());
        let inputs = if per_class == 0 {
            GcnInputs::new(g)
        } else {
            let pool = pool.ok_or_else(|| Error::InvalidArgument(format!("beta {beta} needs synthetic nodes")))?;
            let syn = take_per_class(pool, g.n_classes(), per_class)?;
            GcnInputs::new(&assemble_augmented_graph(g, &syn)?.graph)
        };
        let synthetic: Vec<NodeId> = (g.n_nodes()..inputs.n_nodes()).collect();
        for &tau in &taus {
            for &gamma in &gammas {
                let lowrank = LowRankConfig { tau, gamma };
                let fold_accuracy = (0..folds.len())
                    .into_par_iter()
                    .filter(|&f| !folds[f].is_empty())
                    .map(|f| {
                        let mut train: Vec<NodeId> = folds
                            .iter()
                            .enumerate()
                            .filter(|&(o, _)| o != f)
                            .flat_map(|(_, v)| v.iter().copied())
                            .collect();
                        train.extend(&synthetic);
                        let sets = NodeSets {
                            train,
                            val: vec![],
                            test: vec![],
                        };
                        let trained = train_node_classifier(&inputs, &sets, &lowrank, &cfg)?;
                        let (_, logits) = gcn_forward(&trained.model, &inputs);
                        accuracy_on(logits.view(), &inputs.labels, &folds[f])
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let mean_accuracy = fold_accuracy.iter().sum::<f64>() / fold_accuracy.len() as f64;
                scores.push(CvScore {
                    point: CvPoint { beta, tau, gamma },
                    fold_accuracy,
                    mean_accuracy,
                });
            }
        }
    }
    let best = scores
        .iter()
        .fold(None::<&CvScore>, |best, s| match best {
            Some(b) if s.mean_accuracy <= b.mean_accuracy => Some(b),
            _ => Some(s),
        })
        .expect("grid is nonempty")
        .point;
    Ok(CvResult { best, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::toy::PlantedPartition;
    use ndarray::Array2;

    fn toy(seed: u64) -> AttributedGraph {
        PlantedPartition {
            n_nodes: 150,
            n_classes: 3,
            n_features: 12,
            train_per_class: 20,
            separation: 1.5,
            seed,
            ..Default::default()
        }
        .generate()
    }

    fn quick() -> GcnConfig {
        GcnConfig {
            hidden: 16,
            feat_dim: 16,
            epochs: 100,
            ..Default::default()
        }
    }

    #[test]
    fn standard_grid_values() {
        let g = CvGrid::standard();
        assert_eq!(g.gammas, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
        assert_eq!(g.taus.len(), 10);
        for (i, t) in g.taus.iter().enumerate() {
            assert!((t - 0.05 * (i + 1) as f64).abs() < 1e-12);
        }
        assert_eq!(g.betas, (1..=10).collect::<Vec<_>>());
        assert_eq!(g.len(), 900);
    }

    #[test]
    fn single_point_grid() {
        let grid = CvGrid {
            gammas: vec![0.3],
            taus: vec![0.1],
            betas: vec![0],
        };
        let r = cross_validate(&toy(0), None, &grid, &CvBudget::default(), &quick()).unwrap();
        assert_eq!(r.best, CvPoint { beta: 0, tau: 0.1, gamma: 0.3 });
        assert_eq!(r.scores.len(), 1);
        assert_eq!(r.scores[0].fold_accuracy.len(), 5);
    }

    #[test]
    fn folds_are_stratified() {
        let g = toy(1);
        let folds = make_folds(&g, &CvBudget::default(), 0).unwrap();
        let all: Vec<_> = folds.iter().flatten().collect();
        // ⌈0.2 · 20⌉ per class
        assert_eq!(all.len(), 12);
        for f in &folds {
            assert!(!f.is_empty());
        }
    }

    #[test]
    fn exact_ties_pick_smallest_point() {
        let g = toy(2);
        let grid = CvGrid {
            gammas: vec![0.5, 0.2],
            taus: vec![0.0, 0.0],
            betas: vec![0],
        };
        let r = cross_validate(&g, None, &grid, &CvBudget::default(), &quick()).unwrap();
        assert_eq!(r.best, CvPoint { beta: 0, tau: 0.0, gamma: 0.2 });
    }

    #[test]
    fn overwhelming_penalty_is_not_selected() {
        let mut picks_zero = 0;
        for seed in 0..5 {
            let g = toy(10 + seed);
            let grid = CvGrid {
                gammas: vec![0.05],
                taus: vec![0.0, 50.0],
                betas: vec![0],
            };
            let cfg = GcnConfig { seed, ..quick() };
            let r = cross_validate(&g, None, &grid, &CvBudget { fraction: 1.0, ..Default::default() }, &cfg).unwrap();
            picks_zero += usize::from(r.best.tau == 0.0);
        }
        assert!(picks_zero >= 4, "{picks_zero}/5");
    }

    #[test]
    fn synthetic_amounts() {
        assert_eq!(synthetic_per_class(3, 140, 7), 60);
        assert_eq!(synthetic_per_class(0, 140, 7), 0);
        let pool = SyntheticBatch {
            latents: Array2::zeros((6, 1)),
            labels: vec![0, 0, 0, 1, 1, 1],
            attributes: Array2::from_shape_fn((6, 1), |(i, _)| i as f64),
            edges: vec![vec![0]; 6],
        };
        let two = take_per_class(&pool, 2, 2).unwrap();
        assert_eq!(two.labels, vec![0, 0, 1, 1]);
        assert_eq!(two.attributes.column(0).to_vec(), vec![0.0, 1.0, 3.0, 4.0]);
        assert!(take_per_class(&pool, 2, 4).is_err());
    }

    #[test]
    fn missing_pool_rejected() {
        let grid = CvGrid {
            gammas: vec![0.2],
            taus: vec![0.1],
            betas: vec![1],
        };
        assert!(cross_validate(&toy(3), None, &grid, &CvBudget::default(), &quick()).is_err());
        let empty = CvGrid { betas: vec![], ..grid };
        assert!(cross_validate(&toy(3), None, &empty, &CvBudget::default(), &quick()).is_err());
    }
}
