//! Node classification with a GCN whose penultimate features are pushed
//! toward low rank, plus spectral diagnostics of those features.

pub mod cv;
pub mod gcn;
pub mod oracle;
pub mod spectrum;

pub use cv::{cross_validate, synthetic_per_class, take_per_class, CvBudget, CvGrid, CvPoint, CvResult, CvScore};
pub use gcn::{
    accuracy_on, evaluate_accuracy, feature_tnn, gcn_forward, normalized_adjacency, one_hot, train_node_classifier,
    GcnConfig, GcnEpoch, GcnInputs, GcnModel, LowRankConfig, NodeSets, TrainedGcn,
};
pub use oracle::{linear_gd_oracle, GdResiduals};
pub use spectrum::{eigen_projection, gram_matrix, kept_rank, truncated_nuclear_norm, EigenProjection, GramSpectrum};
