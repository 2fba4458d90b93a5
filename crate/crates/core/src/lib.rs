//! Diffusion-based augmentation for attributed graphs.
//!
//! The pipeline encodes every node (attributes plus edge context) into a
//! latent vector with a graph autoencoder whose decoder reconstructs edges
//! hierarchically through balanced clusters, trains a class-conditional
//! latent diffusion model on labeled latents, decodes sampled latents into
//! synthetic nodes wired to the original graph, and trains a GCN on the
//! augmented graph with a truncated nuclear norm penalty on its features.

pub mod augment;
pub mod cluster;
pub mod error;
pub mod gae;
pub mod graph;
pub mod ldm;
pub mod lowrank;
pub mod neighbor_maps;
pub mod nn;
pub mod sparse;

pub use cluster::{balanced_kmeans, ClusterAssignment};
pub use error::{Error, Result};
pub use graph::{load_graph, save_graph, AttributedGraph, NodeId, Split};
pub use neighbor_maps::{build_neighbor_maps, neighbor_maps_to_adjacency, NeighborMaps};
