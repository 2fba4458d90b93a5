//! Attributed graph model: dense node attributes, an undirected simple edge
//! set, optional class labels and a train/val/test split.

mod io;
mod metrics;
pub mod toy;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_graph, save_graph, write_edges};
pub use metrics::{average_degree, homophily_ratio};

/// Node id within a single graph.
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split tag {other:?}")),
        }
    }
}

/// Undirected, unweighted graph with per-node attributes.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted. Neighbor lists
/// are sorted and exclude the node itself.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    features: Array2<f64>,
    edges: Vec<(NodeId, NodeId)>,
    adjacency: Vec<Vec<NodeId>>,
    labels: Vec<Option<usize>>,
    split: Vec<Split>,
    n_classes: usize,
}

impl AttributedGraph {
    /// Builds and validates a graph. Duplicate and reversed pairs collapse to
    /// one edge; self-loops are rejected.
    pub fn new(
        features: Array2<f64>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
        labels: Vec<Option<usize>>,
        split: Vec<Split>,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n || split.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{n} attribute rows but {} labels and {} split tags",
                labels.len(),
                split.len()
            )));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) has an endpoint >= {n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on node {u}")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        for (i, (label, tag)) in labels.iter().zip(&split).enumerate() {
            if *tag == Split::Train && label.is_none() {
                return Err(Error::InvalidGraph(format!(
                    "train node {i} has no label"
                )));
            }
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGraph("non-finite attribute value".into()));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let n_classes = labels.iter().flatten().map(|&c| c + 1).max().unwrap_or(0);
        Ok(Self {
            features,
            edges,
            adjacency,
            labels,
            split,
            n_classes,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of classes, `1 + max label`.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.adjacency[i].len()
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, i: NodeId) -> Option<usize> {
        self.labels[i]
    }

    pub fn split_of(&self, i: NodeId) -> Split {
        self.split[i]
    }

    pub fn splits(&self) -> &[Split] {
        &self.split
    }

    /// Node ids tagged with `split`, ascending.
    pub fn nodes_in(&self, split: Split) -> Vec<NodeId> {
        (0..self.n_nodes()).filter(|&i| self.split[i] == split).collect()
    }

    /// `N(i)` in the closed sense: the node itself plus its neighbors, sorted.
    pub fn closed_neighborhood(&self, i: NodeId) -> Vec<NodeId> {
        let nbrs = &self.adjacency[i];
        let pos = nbrs.partition_point(|&j| j < i);
        let mut out = Vec::with_capacity(nbrs.len() + 1);
        out.extend_from_slice(&nbrs[..pos]);
        out.push(i);
        out.extend_from_slice(&nbrs[pos..]);
        out
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Returns a copy whose split tags are replaced.
    pub fn with_split(&self, split: Vec<Split>) -> Result<Self> {
        Self::new(
            self.features.clone(),
            self.edges.iter().copied(),
            self.labels.clone(),
            split,
        )
    }

    /// Rows scaled to unit L1 norm; zero rows are left untouched.
    pub fn row_normalized_features(&self) -> Array2<f64> {
        let mut x = self.features.clone();
        for mut row in x.rows_mut() {
            let s: f64 = row.iter().map(|v| v.abs()).sum();
            if s > 0.0 {
                row.mapv_inplace(|v| v / s);
            }
        }
        x
    }
}
