use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::graph::{toy::PlantedPartition, Split};
use crate::nn::{flatten, grad_check, tensors, unflatten, zeros_like};

fn small_config() -> GaeConfig {
    GaeConfig {
        hidden: 6,
        latent_dim: 4,
        intra_hidden: 5,
        ..Default::default()
    }
}

fn ten_node_data(seed: u64) -> (AttributedGraph, GaeData) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = Array2::from_shape_fn((10, 5), |_| rng.random_range(-1.0..1.0));
    let mut edges = Vec::new();
    for u in 0..10 {
        for v in u + 1..10 {
            if rng.random::<f64>() < 0.3 {
                edges.push((u, v));
            }
        }
    }
    let g = AttributedGraph::new(features, edges, vec![None; 10], vec![Split::Test; 10]).unwrap();
    let ids = (0..10).map(|i| i % 3).collect();
    let c = ClusterAssignment::from_cluster_ids(ids, 3).unwrap();
    let data = GaeData::new(&g, c, true).unwrap();
    (g, data)
}

#[test]
fn isolated_node_encodes_to_finite_latent() {
    let g = AttributedGraph::new(
        Array2::from_elem((3, 4), 0.5),
        [(0, 1)],
        vec![None; 3],
        vec![Split::Test; 3],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let enc = GaeEncoder::new(4, 8, 3, &mut rng);
    let z = encode_node(&enc, &g, 2);
    assert_eq!(z.len(), 3);
    assert!(z.iter().all(|v| v.is_finite()));
}

#[test]
fn positions_break_structural_ties() {
    let g = AttributedGraph::new(
        Array2::from_elem((4, 6), 1.0),
        [(0, 1), (2, 3)],
        vec![None; 4],
        vec![Split::Test; 4],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let enc = GaeEncoder::new(6, 8, 4, &mut rng);
    let with_pos = EncoderInputs::new(&g, true);
    assert_ne!(enc.encode_node(&with_pos, 0), enc.encode_node(&with_pos, 2));
    let without = EncoderInputs::new(&g, false);
    assert_eq!(enc.encode_node(&without, 0), enc.encode_node(&without, 2));
}

#[test]
fn relabeling_is_invisible_without_positions() {
    let (g, _) = ten_node_data(3);
    let perm = [7, 2, 9, 0, 5, 1, 8, 3, 6, 4];
    let mut x = Array2::zeros(g.features().raw_dim());
    for i in 0..10 {
        x.row_mut(perm[i]).assign(&g.features().row(i));
    }
    let edges: Vec<_> = g.edges().iter().map(|&(u, v)| (perm[u], perm[v])).collect();
    let h = AttributedGraph::new(x, edges, vec![None; 10], vec![Split::Test; 10]).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let enc = GaeEncoder::new(5, 6, 4, &mut rng);
    let zg = enc.encode_all(&EncoderInputs::new(&g, false), 4);
    let zh = enc.encode_all(&EncoderInputs::new(&h, false), 3);
    for i in 0..10 {
        for (a, b) in zg.row(i).iter().zip(zh.row(perm[i]).iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn batched_encoding_matches_single_nodes() {
    let (_, data) = ten_node_data(5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let enc = GaeEncoder::new(5, 6, 4, &mut rng);
    let all = enc.encode_all(&data.inputs, 7);
    for i in 0..10 {
        let z = enc.encode_node(&data.inputs, i);
        for (a, b) in all.row(i).iter().zip(z.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn loss_gradient_matches_differences() {
    for seed in 0..3 {
        let (_, data) = ten_node_data(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let model = Gae::new(5, 3, data.clusters.capacity(), &small_config(), &mut rng);
        let plan = BatchPlan::sample(&data, &[0, 3, 4, 8, 9], 1, &mut rng);
        let x0 = flatten(&model);
        let mut probe = model.clone();
        let check = grad_check(
            |w| {
                unflatten(&mut probe, w);
                let mut g = zeros_like(&probe);
                let parts = gae_loss_grad(&probe, &data, &plan, LossTerms::Full, &mut g);
                (parts.total(), flatten(&g))
            },
            &x0,
            1e-5,
        );
        assert!(check.max_rel_error < 1e-4, "seed {seed}: {check:?}");
    }
}

#[test]
fn node_term_leaves_structure_heads_untouched() {
    let (_, data) = ten_node_data(7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = Gae::new(5, 3, data.clusters.capacity(), &small_config(), &mut rng);
    let plan = BatchPlan::sample(&data, &[0, 1, 2, 3], 2, &mut rng);
    let mut g = zeros_like(&model);
    let parts = gae_loss_grad(&model, &data, &plan, LossTerms::NodeOnly, &mut g);
    assert_eq!(parts.inter, 0.0);
    assert_eq!(parts.intra, 0.0);
    let d = &g.decoder;
    for t in tensors(&d.inter).into_iter().chain(tensors(&d.intra)).chain(tensors(&d.cluster_mlp)) {
        assert!(t.iter().all(|&v| v == 0.0));
    }
    assert!(d.cluster_table.iter().all(|&v| v == 0.0));
}

#[test]
fn single_node_loss_by_hand() {
    let (_, data) = ten_node_data(8);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = Gae::new(5, 3, data.clusters.capacity(), &small_config(), &mut rng);
    let node = (0..10).find(|&i| !data.maps.row(i).is_empty()).unwrap();
    let plan = BatchPlan::positives(&data, &[node]);
    let parts = gae_loss(&model, &data, &plan, LossTerms::Full);

    let z = model.encoder.encode_node(&data.inputs, node);
    let x_hat = model.decoder.decode_node_attributes(z.view()).unwrap();
    let node_term: f64 = (&x_hat - &data.inputs.raw().row(node)).mapv(|v| v * v).sum();
    let c_hat = model.decoder.decode_inter_cluster(z.view()).unwrap();
    let c_true = Array1::from(data.maps.inter_dense(node));
    let inter_term: f64 = (&c_hat - &c_true).mapv(|v| v * v).sum();
    let mut intra_term = 0.0;
    for l in data.maps.row(node) {
        let m_hat = model.decoder.decode_intra_cluster(z.view(), l.cluster).unwrap();
        let m_true = data.maps.intra_dense(node, l.cluster);
        for m in 0..data.clusters.size(l.cluster) {
            intra_term += (m_hat[m] - m_true[m]).powi(2);
        }
    }
    assert!((parts.node - node_term).abs() < 1e-12);
    assert!((parts.inter - inter_term).abs() < 1e-12);
    assert!((parts.intra - intra_term).abs() < 1e-12);
    assert!(parts.total() >= 0.0);
}

#[test]
fn exact_attribute_fit_gives_zero_node_term() {
    let g = AttributedGraph::new(
        Array2::from_elem((4, 3), 0.7),
        [(0, 1), (1, 2)],
        vec![None; 4],
        vec![Split::Test; 4],
    )
    .unwrap();
    let c = ClusterAssignment::from_cluster_ids(vec![0, 0, 1, 1], 2).unwrap();
    let data = GaeData::new(&g, c, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut model = Gae::new(3, 2, 2, &small_config(), &mut rng);
    let last = model.decoder.attr.layers.last_mut().unwrap();
    last.weight.fill(0.0);
    last.bias.fill(0.7);
    let plan = BatchPlan::positives(&data, &[0, 1, 2, 3]);
    assert_eq!(gae_loss(&model, &data, &plan, LossTerms::NodeOnly).node, 0.0);
}

#[test]
fn zero_epochs_keep_initialization() {
    let (g, _) = ten_node_data(9);
    let c = ClusterAssignment::from_cluster_ids((0..10).map(|i| i % 3).collect(), 3).unwrap();
    let data = GaeData::new(&g, c, true).unwrap();
    let config = GaeConfig {
        phase1_epochs: 0,
        phase2_epochs: 0,
        seed: 11,
        ..small_config()
    };
    let trained = train_gae(&data, &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let init = Gae::new(5, 3, data.clusters.capacity(), &config, &mut rng);
    assert_eq!(trained.model, init);
    assert_eq!(trained.ema, init);
}

#[test]
fn training_is_deterministic() {
    let (_, data) = ten_node_data(10);
    let config = GaeConfig {
        phase1_epochs: 3,
        phase2_epochs: 3,
        batch_size: 4,
        ..small_config()
    };
    let a = train_gae(&data, &config).unwrap();
    let b = train_gae(&data, &config).unwrap();
    assert_eq!(flatten(&a.model), flatten(&b.model));
    assert_eq!(flatten(&a.ema), flatten(&b.ema));
    let other = train_gae(&data, &GaeConfig { seed: 1, ..config }).unwrap();
    assert_ne!(flatten(&a.model), flatten(&other.model));
}

#[test]
fn phase_one_freezes_structure_heads() {
    let (_, data) = ten_node_data(12);
    let config = GaeConfig {
        phase1_epochs: 4,
        phase2_epochs: 0,
        batch_size: 5,
        ..small_config()
    };
    let trained = train_gae(&data, &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Gae::new(5, 3, data.clusters.capacity(), &config, &mut rng);
    assert_eq!(trained.model.decoder.inter, init.decoder.inter);
    assert_eq!(trained.model.decoder.intra, init.decoder.intra);
    assert_eq!(trained.model.decoder.cluster_table, init.decoder.cluster_table);
    assert_ne!(trained.model.encoder, init.encoder);
}

#[test]
fn toy_graph_training_reduces_loss() {
    let g = PlantedPartition {
        n_nodes: 50,
        n_classes: 2,
        n_features: 16,
        p_in: 0.2,
        p_out: 0.02,
        seed: 3,
        ..Default::default()
    }
    .generate();
    let clusters = crate::balanced_kmeans(g.features().view(), 5, 20, 0).unwrap();
    let data = GaeData::new(&g, clusters, true).unwrap();
    let config = GaeConfig {
        phase1_epochs: 200,
        phase2_epochs: 200,
        batch_size: 16,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Gae::new(16, 5, data.clusters.capacity(), &config, &mut rng);
    let before = full_loss(&init, &data, config.n_negative, 0);
    let trained = train_gae(&data, &config).unwrap();
    let after = full_loss(&trained.model, &data, config.n_negative, 0);
    assert!(after.total() < 0.1 * before.total(), "{before:?} -> {after:?}");
    assert!(after.node * 10.0 <= before.node, "{before:?} -> {after:?}");

    let z = trained.model.encoder.encode_all(&data.inputs, 64);
    let mut rows_right = 0;
    for i in 0..50 {
        let c_hat = trained.model.decoder.decode_inter_cluster(z.row(i)).unwrap();
        let bits: Vec<f64> = c_hat.iter().map(|&v| if v >= 0.5 { 1.0 } else { 0.0 }).collect();
        if bits == data.maps.inter_dense(i) {
            rows_right += 1;
        }
    }
    assert!(rows_right >= 45, "{rows_right}/50 inter rows reconstructed");
}
