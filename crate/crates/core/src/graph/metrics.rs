use super::AttributedGraph;
use crate::error::{Error, Result};

/// Fraction of edges joining two nodes with the same label. Edges with an
/// unlabeled endpoint are skipped.
pub fn homophily_ratio(g: &AttributedGraph) -> Result<f64> {
    let mut same = 0usize;
    let mut counted = 0usize;
    for &(u, v) in g.edges() {
        if let (Some(a), Some(b)) = (g.label(u), g.label(v)) {
            counted += 1;
            same += usize::from(a == b);
        }
    }
    if counted == 0 {
        return Err(Error::InvalidArgument(
            "homophily is undefined without labeled edges".into(),
        ));
    }
    Ok(same as f64 / counted as f64)
}

/// `2|E| / N`; zero for an empty graph.
pub fn average_degree(g: &AttributedGraph) -> f64 {
    if g.n_nodes() == 0 {
        return 0.0;
    }
    2.0 * g.n_edges() as f64 / g.n_nodes() as f64
}
