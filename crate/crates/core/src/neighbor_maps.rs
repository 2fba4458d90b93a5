//! Bi-level neighbor maps: an inter-cluster map `C` (which clusters a node
//! touches) and an intra-cluster map `M` (which members of each touched
//! cluster). `M` rows are only stored where `C_ik = 1`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, NodeId};

/// Intra-cluster row of node `i` toward one cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLinks {
    pub cluster: usize,
    /// Set slot positions (member indices within the cluster), ascending.
    pub slots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborMaps {
    k: usize,
    capacity: usize,
    rows: Vec<Vec<ClusterLinks>>,
}

impl NeighborMaps {
    /// Assembles maps from per-node rows. Clusters in a row must be strictly
    /// ascending and each carry at least one slot below `capacity`.
    pub fn from_rows(k: usize, capacity: usize, rows: Vec<Vec<ClusterLinks>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            for (a, links) in row.iter().enumerate() {
                if links.cluster >= k {
                    return Err(Error::InvalidArgument(format!(
                        "node {i}: cluster {} >= {k}",
                        links.cluster
                    )));
                }
                if a > 0 && row[a - 1].cluster >= links.cluster {
                    return Err(Error::InvalidArgument(format!(
                        "node {i}: clusters not strictly ascending"
                    )));
                }
                if links.slots.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "node {i}: inter bit for cluster {} without intra bits",
                        links.cluster
                    )));
                }
                if links.slots.windows(2).any(|w| w[0] >= w[1])
                    || links.slots.last().is_some_and(|&m| m >= capacity)
                {
                    return Err(Error::InvalidArgument(format!(
                        "node {i}: malformed slots for cluster {}",
                        links.cluster
                    )));
                }
            }
        }
        Ok(Self { k, capacity, rows })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn n_nodes(&self) -> usize {
        self.rows.len()
    }

    /// Clusters with `C_ik = 1` and their intra rows.
    pub fn row(&self, i: NodeId) -> &[ClusterLinks] {
        &self.rows[i]
    }

    pub fn inter(&self, i: NodeId, k: usize) -> bool {
        self.links(i, k).is_some()
    }

    pub fn links(&self, i: NodeId, k: usize) -> Option<&ClusterLinks> {
        self.rows[i]
            .binary_search_by_key(&k, |l| l.cluster)
            .ok()
            .map(|p| &self.rows[i][p])
    }

    /// Dense `C_i` row as 0/1 reals.
    pub fn inter_dense(&self, i: NodeId) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for l in &self.rows[i] {
            out[l.cluster] = 1.0;
        }
        out
    }

    /// Dense `M_ik` row as 0/1 reals (all zero when `C_ik = 0`).
    pub fn intra_dense(&self, i: NodeId, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.capacity];
        if let Some(l) = self.links(i, k) {
            for &m in &l.slots {
                out[m] = 1.0;
            }
        }
        out
    }
}

/// Computes `C` and `M` from the graph's edges (no self-loops).
pub fn build_neighbor_maps(g: &AttributedGraph, c: &ClusterAssignment) -> Result<NeighborMaps> {
    if c.n_nodes() != g.n_nodes() {
        return Err(Error::Shape(format!(
            "assignment covers {} nodes, graph has {}",
            c.n_nodes(),
            g.n_nodes()
        )));
    }
    let rows = (0..g.n_nodes())
        .map(|i| {
            let mut row: Vec<ClusterLinks> = Vec::new();
            let mut pairs: Vec<(usize, usize)> = g
                .neighbors(i)
                .iter()
                .map(|&j| (c.cluster_of(j), c.index_in_cluster(j)))
                .collect();
            pairs.sort_unstable();
            for (k, m) in pairs {
                match row.last_mut() {
                    Some(l) if l.cluster == k => l.slots.push(m),
                    _ => row.push(ClusterLinks {
                        cluster: k,
                        slots: vec![m],
                    }),
                }
            }
            row
        })
        .collect();
    Ok(NeighborMaps {
        k: c.k(),
        capacity: c.capacity(),
        rows,
    })
}

/// Inverse of [`build_neighbor_maps`]: the undirected edge set, each pair
/// once as `(u, v)` with `u < v`, sorted.
pub fn neighbor_maps_to_adjacency(
    nm: &NeighborMaps,
    c: &ClusterAssignment,
) -> Result<Vec<(NodeId, NodeId)>> {
    if nm.k() != c.k() || nm.n_nodes() != c.n_nodes() {
        return Err(Error::Shape("neighbor maps and assignment disagree".into()));
    }
    let mut edges = BTreeSet::new();
    for i in 0..nm.n_nodes() {
        for l in nm.row(i) {
            let members = c.members(l.cluster);
            for &m in &l.slots {
                let j = *members.get(m).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "node {i}: slot {m} set but cluster {} has {} members",
                        l.cluster,
                        members.len()
                    ))
                })?;
                if j == i {
                    return Err(Error::InvalidArgument(format!("node {i}: self-link")));
                }
                edges.insert((i.min(j), i.max(j)));
            }
        }
    }
    Ok(edges.into_iter().collect())
}
