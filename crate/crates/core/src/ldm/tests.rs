use ndarray::{array, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::nn::{flatten, grad_check, unflatten};

struct EchoNoise(Array2<f64>);

impl NoisePredictor for EchoNoise {
    fn predict(&self, _: ArrayView2<f64>, _: &[usize], _: &[Option<usize>]) -> Array2<f64> {
        self.0.clone()
    }
}

struct Silent(usize);

impl NoisePredictor for Silent {
    fn predict(&self, z: ArrayView2<f64>, _: &[usize], _: &[Option<usize>]) -> Array2<f64> {
        Array2::zeros((z.nrows(), self.0))
    }
}

fn small_denoiser(seed: u64, dim: usize, classes: usize) -> Denoiser {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Denoiser::new(dim, classes, 16, 6, 8, &mut rng)
}

#[test]
fn oracle_predictor_has_zero_loss() {
    let sched = make_schedule(100, 1e-4, 0.02).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let z0 = Array2::from_shape_fn((7, 4), |_| rng.random_range(-2.0..2.0));
    let batch = LdmBatch::draw(&[0, 1, 0, 1, 2, 2, 0], 4, &sched, 0.1, &mut rng);
    let oracle = EchoNoise(batch.eps.clone());
    assert_eq!(ldm_loss(&oracle, z0.view(), &batch, &sched), 0.0);
}

#[test]
fn silent_predictor_loss_is_latent_dim() {
    let sched = make_schedule(100, 1e-4, 0.02).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 20_000;
    let z0 = Array2::zeros((n, 4));
    let batch = LdmBatch::draw(&vec![0; n], 4, &sched, 0.0, &mut rng);
    let loss = ldm_loss(&Silent(4), z0.view(), &batch, &sched);
    assert!((loss - 4.0).abs() < 0.08, "{loss}");
}

#[test]
fn loss_gradient_matches_differences() {
    let sched = make_schedule(50, 1e-3, 0.05).unwrap();
    for seed in 0..3 {
        let den = small_denoiser(seed, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(10 + seed);
        let z0 = Array2::from_shape_fn((5, 4), |_| rng.random_range(-1.0..1.0));
        let batch = LdmBatch::draw(&[0, 1, 2, 1, 0], 4, &sched, 0.3, &mut rng);
        let mut probe = den.clone();
        let check = grad_check(
            |w| {
                unflatten(&mut probe, w);
                let mut g = crate::nn::zeros_like(&probe);
                let loss = ldm_loss_grad(&probe, z0.view(), &batch, &sched, &mut g);
                (loss, flatten(&g))
            },
            &flatten(&den),
            1e-5,
        );
        assert!(check.max_rel_error < 1e-4, "seed {seed}: {check:?}");
    }
}

#[test]
fn full_dropout_ignores_labels() {
    let sched = make_schedule(100, 1e-4, 0.02).unwrap();
    let den = small_denoiser(2, 4, 3);
    let z0 = Array2::from_shape_fn((6, 4), |(i, j)| (i as f64) * 0.1 - j as f64 * 0.2);
    let labels = [0, 1, 2, 0, 1, 2];
    let permuted = [2, 0, 1, 1, 2, 0];
    let a = LdmBatch::draw(&labels, 4, &sched, 1.0 - f64::EPSILON, &mut ChaCha8Rng::seed_from_u64(5));
    let b = LdmBatch::draw(&permuted, 4, &sched, 1.0 - f64::EPSILON, &mut ChaCha8Rng::seed_from_u64(5));
    assert!(a.labels.iter().all(Option::is_none));
    let la = ldm_loss(&den, z0.view(), &a, &sched);
    let lb = ldm_loss(&den, z0.view(), &b, &sched);
    assert_eq!(la.to_bits(), lb.to_bits());
}

#[test]
fn unguided_cfg_equals_conditional_sampling() {
    let sched = make_schedule(40, 1e-3, 0.1).unwrap();
    let den = small_denoiser(3, 5, 2);
    for label in 0..2 {
        let mut r1 = sample_rng(9, label as u64);
        let mut r2 = sample_rng(9, label as u64);
        let a = cfg_sample(&den, label, 0.0, &sched, 5, &mut r1);
        let b = conditional_sample(&den, label, &sched, 5, &mut r2);
        assert_eq!(a, b);
        let guided = cfg_sample(&den, label, 0.5, &sched, 5, &mut sample_rng(9, label as u64));
        assert_eq!(guided.len(), 5);
        assert!(guided.iter().all(|v| v.is_finite()));
        assert_ne!(guided, a);
    }
}

#[test]
fn samples_do_not_depend_on_batch_mates() {
    let sched = make_schedule(30, 1e-3, 0.1).unwrap();
    let den = small_denoiser(4, 3, 2);
    let mut rngs: Vec<_> = (0..3).map(|i| sample_rng(1, i)).collect();
    let all = cfg_sample_batch(&den, &[0, 1, 1], 0.5, &sched, 3, &mut rngs);
    let mut one = [sample_rng(1, 2)];
    let last = cfg_sample_batch(&den, &[1], 0.5, &sched, 3, &mut one);
    for (a, b) in all.row(2).iter().zip(last.row(0).iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn zero_epochs_and_determinism() {
    let z = Array2::from_shape_fn((10, 3), |(i, j)| ((i * 3 + j) as f64).sin());
    let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
    let config = LdmConfig {
        epochs: 0,
        hidden: 16,
        label_dim: 4,
        time_dim: 4,
        t_max: 20,
        seed: 7,
        ..Default::default()
    };
    let t = train_ldm(z.view(), &labels, 2, &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let init = Denoiser::new(3, 2, 16, 4, 4, &mut rng);
    assert_eq!(t.denoiser, init);

    let config = LdmConfig { epochs: 5, batch_size: 4, ..config };
    let a = train_ldm(z.view(), &labels, 2, &config).unwrap();
    let b = train_ldm(z.view(), &labels, 2, &config).unwrap();
    assert_eq!(flatten(&a.denoiser), flatten(&b.denoiser));
    assert_eq!(flatten(&a.ema), flatten(&b.ema));
    assert!(train_ldm(z.view(), &labels, 1, &config).is_err());
}

#[test]
fn scaler_round_trip() {
    let z = array![[1.0, 10.0], [3.0, 10.0], [5.0, 10.0]];
    let s = LatentScaler::fit(z.view());
    let w = s.forward(z.view());
    assert!((w.column(0).sum()).abs() < 1e-12);
    assert_eq!(w.column(1).to_vec(), vec![0.0; 3]);
    let back = s.inverse(w.view());
    assert!(back.iter().zip(z.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn toy_classes_are_recovered_by_guided_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let centroids = [[3.0; 8], [-3.0; 8]];
    let n = 200;
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let z = Array2::from_shape_fn((n, 8), |(i, d)| {
        centroids[labels[i]][d] + 0.5 * rng.sample::<f64, _>(StandardNormal)
    });
    let config = LdmConfig {
        epochs: 500,
        t_max: 200,
        beta_start: 5e-4,
        beta_end: 0.1,
        ..Default::default()
    };
    let trained = train_ldm(z.view(), &labels, 2, &config).unwrap();
    let sched = config.schedule().unwrap();
    let wanted: Vec<usize> = (0..100).map(|i| i % 2).collect();
    let samples = trained.sample(&wanted, 0.5, &sched, 3, 0);
    let mut agree = 0;
    for (row, &want) in samples.rows().into_iter().zip(&wanted) {
        let dist = |c: &[f64; 8]| row.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let nearest = if dist(&centroids[0]) <= dist(&centroids[1]) { 0 } else { 1 };
        agree += usize::from(nearest == want);
    }
    assert!(agree > 95, "{agree}/100 samples landed at their class centroid");
}
