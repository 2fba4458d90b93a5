//! Bi-level neighborhood decoder plus the attribute decoder.
//!
//! A latent is decoded into attributes (three dense layers), an inter-cluster
//! row `Ĉ_i` over the K clusters, and, for a chosen cluster `k`, an
//! intra-cluster row `M̂_ik = g′(z ∥ g(k))` over the cluster's member slots.
//! `g′` is shared by every cluster.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::dense::DenseOut;
use crate::nn::init::embedding_normal;
use crate::nn::{Activation, DenseLayer, Mlp, Parameters};

#[derive(Debug, Clone, PartialEq)]
pub struct GaeDecoder {
    /// `D′ → h → h → D`.
    pub attr: Mlp,
    /// `D′ → K`, sigmoid.
    pub inter: DenseLayer,
    /// One learned row per cluster, `K × D′`.
    pub cluster_table: Array2<f64>,
    /// Cluster embedding head `g`, `D′ → D′`.
    pub cluster_mlp: DenseLayer,
    /// Shared intra head `g′`, `2D′ → capacity` with a sigmoid output,
    /// optionally through one hidden ReLU layer.
    pub intra: Mlp,
}

impl GaeDecoder {
    pub fn new<R: Rng + ?Sized>(
        latent_dim: usize,
        hidden: usize,
        n_features: usize,
        k: usize,
        capacity: usize,
        intra_hidden: usize,
        rng: &mut R,
    ) -> Self {
        let intra = if intra_hidden == 0 {
            Mlp::new(&[2 * latent_dim, capacity], &[Activation::Sigmoid], rng)
        } else {
            Mlp::new(
                &[2 * latent_dim, intra_hidden, capacity],
                &[Activation::Relu, Activation::Sigmoid],
                rng,
            )
        };
        Self {
            attr: Mlp::new(
                &[latent_dim, hidden, hidden, n_features],
                &[Activation::Relu, Activation::Relu, Activation::Identity],
                rng,
            ),
            inter: DenseLayer::new(latent_dim, k, Activation::Sigmoid, rng),
            cluster_table: embedding_normal(k, latent_dim, rng),
            cluster_mlp: DenseLayer::new(latent_dim, latent_dim, Activation::Relu, rng),
            intra,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.inter.n_in()
    }

    pub fn k(&self) -> usize {
        self.inter.n_out()
    }

    pub fn capacity(&self) -> usize {
        self.intra.n_out()
    }

    pub fn n_features(&self) -> usize {
        self.attr.n_out()
    }

    fn check_latent(&self, z: ArrayView1<f64>) -> Result<()> {
        if z.len() != self.latent_dim() {
            return Err(Error::Shape(format!(
                "latent has {} entries, decoder expects {}",
                z.len(),
                self.latent_dim()
            )));
        }
        Ok(())
    }

    pub fn decode_node_attributes(&self, z: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_latent(z)?;
        Ok(self.attr.forward(z.insert_axis(ndarray::Axis(0))).pop().expect("nonempty").out.row(0).to_owned())
    }

    /// Inter-cluster scores in (0, 1).
    pub fn decode_inter_cluster(&self, z: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_latent(z)?;
        Ok(self.inter.apply(z))
    }

    /// `g(k)` for every cluster, `K × D′`.
    pub fn cluster_embeddings(&self) -> DenseOut {
        self.cluster_mlp.forward(self.cluster_table.view())
    }

    /// Intra-cluster scores for cluster `k`, one per member slot.
    pub fn decode_intra_cluster(&self, z: ArrayView1<f64>, k: usize) -> Result<Array1<f64>> {
        self.check_latent(z)?;
        if k >= self.k() {
            return Err(Error::InvalidArgument(format!("cluster {k} >= {}", self.k())));
        }
        let emb = self.cluster_embeddings().out;
        let input = concat(z, emb.row(k));
        Ok(self.intra.forward(input.view().insert_axis(ndarray::Axis(0))).pop().expect("nonempty").out.row(0).to_owned())
    }

    /// Intra scores for many `(latent row, cluster)` pairs at once.
    pub fn intra_forward(
        &self,
        z: ArrayView2<f64>,
        emb: &Array2<f64>,
        pairs: &[(usize, usize)],
    ) -> (Array2<f64>, Vec<DenseOut>) {
        let d = self.latent_dim();
        let mut input = Array2::zeros((pairs.len(), 2 * d));
        for (r, &(b, k)) in pairs.iter().enumerate() {
            input.slice_mut(s![r, ..d]).assign(&z.row(b));
            input.slice_mut(s![r, d..]).assign(&emb.row(k));
        }
        let out = self.intra.forward(input.view());
        (input, out)
    }
}

fn concat(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(a.len() + b.len());
    out.slice_mut(s![..a.len()]).assign(&a);
    out.slice_mut(s![a.len()..]).assign(&b);
    out
}

impl Parameters for GaeDecoder {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &'a [f64])) {
        self.attr.visit(&format!("{prefix}attr."), f);
        self.inter.visit(&format!("{prefix}inter."), f);
        self.cluster_table.visit(&format!("{prefix}cluster_table"), f);
        self.cluster_mlp.visit(&format!("{prefix}cluster_mlp."), f);
        self.intra.visit(&format!("{prefix}intra."), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.attr.visit_mut(f);
        self.inter.visit_mut(f);
        self.cluster_table.visit_mut(f);
        self.cluster_mlp.visit_mut(f);
        self.intra.visit_mut(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn decoder() -> GaeDecoder {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        GaeDecoder::new(6, 8, 5, 4, 3, 0, &mut rng)
    }

    #[test]
    fn zero_latent_decodes_from_biases() {
        let mut dec = decoder();
        for l in &mut dec.attr.layers {
            l.bias.fill(0.25);
        }
        let x = dec.decode_node_attributes(Array1::zeros(6).view()).unwrap();
        assert_eq!(x.len(), 5);
        assert!(x.iter().all(|v| v.is_finite()));
        let expected = crate::nn::mlp_apply(&dec.attr.layers, Array1::zeros(6).view()).unwrap();
        for (a, b) in x.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scores_are_probabilities() {
        let dec = decoder();
        let z = Array1::from_vec(vec![3.0, -2.0, 0.5, 10.0, -7.0, 1.0]);
        let c = dec.decode_inter_cluster(z.view()).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|&v| v > 0.0 && v < 1.0));
        for k in 0..4 {
            let m = dec.decode_intra_cluster(z.view(), k).unwrap();
            assert_eq!(m.len(), 3);
            assert!(m.iter().all(|&v| v > 0.0 && v < 1.0));
        }
        assert!(dec.decode_intra_cluster(z.view(), 4).is_err());
        assert!(dec.decode_inter_cluster(Array1::zeros(2).view()).is_err());
    }

    #[test]
    fn cluster_embedding_separates_rows() {
        let dec = decoder();
        let z = Array1::from_vec(vec![0.3; 6]);
        let emb = dec.cluster_embeddings().out;
        assert_ne!(emb.row(0), emb.row(1));
        assert_ne!(
            dec.decode_intra_cluster(z.view(), 0).unwrap(),
            dec.decode_intra_cluster(z.view(), 1).unwrap()
        );
    }
}
