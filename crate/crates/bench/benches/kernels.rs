use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dog_core::cluster::ClusterAssignment;
use dog_core::gae::{gae_loss_grad, BatchPlan, Gae, GaeConfig, GaeData, LossTerms};
use dog_core::graph::toy::PlantedPartition;
use dog_core::ldm::{cfg_sample_batch, make_schedule, sample_rng, Denoiser};
use dog_core::lowrank::{gram_matrix, normalized_adjacency, truncated_nuclear_norm};
use dog_core::nn::{zeros_like, Activation, Mlp};
use dog_core::AttributedGraph;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy(n: usize) -> AttributedGraph {
    PlantedPartition {
        n_nodes: n,
        n_classes: 7,
        n_features: 64,
        p_in: 8.0 / n as f64,
        p_out: 0.5 / n as f64,
        ..Default::default()
    }
    .generate()
}

fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn dense(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mlp = Mlp::new(&[192, 512, 512, 64], &[Activation::Relu, Activation::Relu, Activation::Identity], &mut rng);
    let x = random(64, 192, 1);
    c.bench_function("mlp forward 64x192 -> 512 -> 512 -> 64", |b| {
        b.iter(|| black_box(mlp.forward(x.view())))
    });
}

fn gae(c: &mut Criterion) {
    let g = toy(500);
    let clusters = ClusterAssignment::from_cluster_ids((0..500).map(|i| i % 20).collect(), 20).unwrap();
    let data = GaeData::new(&g, clusters, true).unwrap();
    let cfg = GaeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = Gae::new(64, 20, data.clusters.capacity(), &cfg, &mut rng);
    let nodes: Vec<usize> = (0..128).collect();
    let plan = BatchPlan::sample(&data, &nodes, cfg.n_negative, &mut rng);
    c.bench_function("attention encoder, 500 nodes", |b| {
        b.iter(|| black_box(model.encoder.encode_all(&data.inputs, 64)))
    });
    c.bench_function("gae loss and gradient, batch 128", |b| {
        b.iter(|| {
            let mut grad = zeros_like(&model);
            black_box(gae_loss_grad(&model, &data, &plan, LossTerms::Full, &mut grad))
        })
    });
}

fn sparse(c: &mut Criterion) {
    let g = toy(2708);
    let adj = normalized_adjacency(&g);
    let h = random(2708, 64, 3);
    c.bench_function("normalized adjacency times 2708x64", |b| b.iter(|| black_box(adj.dot(h.view()))));
}

fn spectrum(c: &mut Criterion) {
    let h = random(2708, 64, 4);
    c.bench_function("gram spectrum 2708x64", |b| b.iter(|| black_box(gram_matrix(h.view()))));
    c.bench_function("truncated nuclear norm 2708x64", |b| {
        b.iter(|| black_box(truncated_nuclear_norm(h.view(), 13).unwrap()))
    });
}

fn sampling(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let den = Denoiser::new(64, 7, 512, 64, 64, &mut rng);
    let sched = make_schedule(1, 1e-4, 0.02).unwrap();
    let labels: Vec<usize> = (0..32).map(|i| i % 7).collect();
    c.bench_function("guided reverse step, 32 latents", |b| {
        b.iter(|| {
            let mut rngs: Vec<_> = (0..32).map(|i| sample_rng(0, i)).collect();
            black_box(cfg_sample_batch(&den, &labels, 0.5, &sched, 64, &mut rngs))
        })
    });
}

criterion_group!(benches, dense, gae, sparse, spectrum, sampling);
criterion_main!(benches);
