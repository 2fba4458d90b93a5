//! One function per pipeline stage. Each reads its inputs from the run
//! directory, writes its outputs there and seals them with a sidecar.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use dog_core::augment::{
    assemble_augmented_graph, decode_synthetic_structures, generate_synthetic_latents,
    synthetic_quality, SyntheticBatch,
};
use dog_core::gae::{train_gae_observed, Gae, GaeData};
use dog_core::graph::{average_degree, homophily_ratio};
use dog_core::ldm::{train_ldm_observed, Denoiser, LatentScaler, TrainedLdm};
use dog_core::lowrank::{
    accuracy_on, cross_validate, eigen_projection, feature_tnn, gcn_forward, gram_matrix, one_hot,
    synthetic_per_class, train_node_classifier, CvGrid, GcnConfig, GcnInputs, GcnModel,
    LowRankConfig, NodeSets,
};
use dog_core::nn::checkpoint;
use dog_core::{
    balanced_kmeans, load_graph, save_graph, AttributedGraph, ClusterAssignment, Split,
};
use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifacts::{sha256_file, RunDir};
use crate::config::RunConfig;
use crate::output::{fmt_f64, fmt_opt, write_csv};

pub const CLUSTERS: &str = "clusters.json";
pub const GAE: &str = "gae.ckpt";
pub const LATENTS: &str = "latents.bin";
pub const LDM: &str = "ldm.ckpt";
pub const SYNTHETIC: &str = "synthetic.bin";
pub const SYNTHETIC_EDGES: &str = "synthetic_edges.csv";
pub const AUGMENTED: &str = "augmented";
pub const PROVENANCE: &str = "augmented/provenance.json";
pub const QUALITY: &str = "quality.csv";
pub const CV: &str = "cv.csv";
pub const CV_BEST: &str = "cv_best.json";

/// Which graph a classifier is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// The augmented graph (the original one when no synthetic nodes are
    /// requested), with the configured penalty.
    Main,
    /// The original graph without penalty.
    Baseline,
}

impl Variant {
    pub fn prefix(self) -> &'static str {
        match self {
            Variant::Main => "gcn",
            Variant::Baseline => "baseline",
        }
    }

    fn file(self, suffix: &str) -> String {
        format!("{}{suffix}", self.prefix())
    }
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub run: RunDir,
}

impl Ctx {
    pub fn graph(&self) -> Result<AttributedGraph> {
        let d = &self.cfg.data_dir;
        load_graph(
            d.join("features.txt"),
            d.join("edges.txt"),
            d.join("labels.txt"),
        )
        .with_context(|| format!("loading graph from {}", d.display()))
    }

    fn labeled_train(g: &AttributedGraph) -> Vec<usize> {
        g.nodes_in(Split::Train)
            .into_iter()
            .filter(|&i| g.label(i).is_some())
            .collect()
    }

    fn clusters(&self) -> Result<ClusterAssignment> {
        let path = self.run.input(CLUSTERS, "cluster")?;
        let file: ClusterFile = serde_json::from_slice(&std::fs::read(path)?)?;
        Ok(ClusterAssignment::from_cluster_ids(
            file.cluster_of,
            file.k,
        )?)
    }

    fn gae(&self, g: &AttributedGraph, clusters: &ClusterAssignment) -> Result<Gae> {
        let path = self.run.input(GAE, "train-gae")?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = Gae::new(
            g.n_features(),
            clusters.k(),
            clusters.capacity(),
            &self.cfg.gae,
            &mut rng,
        );
        checkpoint::load(&path, &mut model)?;
        Ok(model)
    }

    fn ldm(&self, g: &AttributedGraph) -> Result<TrainedLdm> {
        let path = self.run.input(LDM, "train-ldm")?;
        let c = &self.cfg.ldm;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ema = Denoiser::new(
            self.cfg.gae.latent_dim,
            g.n_classes(),
            c.hidden,
            c.label_dim,
            c.time_dim,
            &mut rng,
        );
        let manifest = checkpoint::load(&path, &mut ema)?;
        let scaler: LatentScaler = serde_json::from_value(manifest.meta["scaler"].clone())?;
        Ok(TrainedLdm {
            denoiser: ema.clone(),
            ema,
            scaler,
            history: Vec::new(),
        })
    }

    fn synthetic(&self) -> Result<SyntheticBatch> {
        let path = self.run.input(SYNTHETIC, "generate")?;
        let bytes = std::fs::read(&path)?;
        let manifest = checkpoint::read_manifest(&bytes)?;
        let mut tensors: Vec<Array2<f64>> = manifest
            .tensors
            .iter()
            .map(|t| Array2::zeros((t.shape[0], t.shape[1])))
            .collect();
        if tensors.len() != 2 {
            bail!("{} should hold latents and attributes", path.display());
        }
        let manifest = checkpoint::from_bytes(&mut tensors, &bytes)?;
        let meta: SyntheticMeta = serde_json::from_value(manifest.meta)?;
        let attributes = tensors.pop().expect("two tensors");
        let latents = tensors.pop().expect("two tensors");
        Ok(SyntheticBatch {
            latents,
            labels: meta.labels,
            attributes,
            edges: meta.edges,
        })
    }

    fn augmented(&self) -> Result<AttributedGraph> {
        self.run.input(PROVENANCE, "assemble")?;
        let d = self.run.path(AUGMENTED);
        Ok(load_graph(
            d.join("features.txt"),
            d.join("edges.txt"),
            d.join("labels.txt"),
        )?)
    }

    /// Graph the given classifier variant trains on.
    pub fn training_graph(&self, variant: Variant) -> Result<AttributedGraph> {
        if variant == Variant::Main && self.cfg.beta_syn > 0 {
            self.augmented()
        } else {
            self.graph()
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ClusterFile {
    k: usize,
    capacity: usize,
    cluster_of: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct SyntheticMeta {
    labels: Vec<usize>,
    edges: Vec<Vec<usize>>,
}

fn log(stage: &str, msg: impl AsRef<str>) {
    eprintln!("[{stage}] {}", msg.as_ref());
}

pub fn cluster(ctx: &Ctx) -> Result<()> {
    let g = ctx.graph()?;
    let t = Instant::now();
    let c = balanced_kmeans(
        g.features().view(),
        ctx.cfg.clusters,
        ctx.cfg.kmeans_iters,
        ctx.cfg.kmeans_seed(),
    )?;
    let file = ClusterFile {
        k: c.k(),
        capacity: c.capacity(),
        cluster_of: c.cluster_ids().to_vec(),
    };
    ctx.run
        .write(CLUSTERS, "cluster", &serde_json::to_vec(&file)?)?;
    log(
        "cluster",
        format!(
            "{} nodes into {} clusters in {:.1?}",
            g.n_nodes(),
            c.k(),
            t.elapsed()
        ),
    );
    Ok(())
}

pub fn train_gae(ctx: &Ctx) -> Result<()> {
    let g = ctx.graph()?;
    let clusters = ctx.clusters()?;
    let data = GaeData::new(&g, clusters.clone(), ctx.cfg.gae.positional)?;
    let t = Instant::now();
    let mut rows = Vec::new();
    let total = ctx.cfg.gae.phase1_epochs + ctx.cfg.gae.phase2_epochs;
    let trained = train_gae_observed(&data, &ctx.cfg.gae, &mut |r| {
        let l = &r.loss;
        rows.push(vec![
            r.epoch.to_string(),
            r.phase.to_string(),
            fmt_f64(l.node),
            fmt_f64(l.inter),
            fmt_f64(l.intra),
            fmt_f64(l.total()),
        ]);
        if (r.epoch + 1) % 50 == 0 {
            log(
                "train-gae",
                format!(
                    "epoch {}/{total} phase {} loss {:.4}",
                    r.epoch + 1,
                    r.phase,
                    l.total()
                ),
            );
        }
    })?;
    write_csv(
        &ctx.run,
        "gae_history.csv",
        "train-gae",
        &["epoch", "phase", "node", "inter", "intra", "total"],
        rows,
    )?;
    let meta =
        json!({"n_features": g.n_features(), "k": clusters.k(), "capacity": clusters.capacity()});
    checkpoint::save(&ctx.run.path(GAE), &trained.ema, meta)?;
    ctx.run.seal(GAE, "train-gae")?;
    log("train-gae", format!("done in {:.1?}", t.elapsed()));
    Ok(())
}

pub fn encode(ctx: &Ctx) -> Result<()> {
    let g = ctx.graph()?;
    let clusters = ctx.clusters()?;
    let gae = ctx.gae(&g, &clusters)?;
    let data = GaeData::new(&g, clusters, ctx.cfg.gae.positional)?;
    let z = gae.encoder.encode_all(&data.inputs, 256);
    checkpoint::save(&ctx.run.path(LATENTS), &z, json!({}))?;
    ctx.run.seal(LATENTS, "encode")?;
    log(
        "encode",
        format!("{} latents of width {}", z.nrows(), z.ncols()),
    );
    Ok(())
}

fn latents(ctx: &Ctx, g: &AttributedGraph) -> Result<Array2<f64>> {
    let path = ctx.run.input(LATENTS, "encode")?;
    let mut z = Array2::zeros((g.n_nodes(), ctx.cfg.gae.latent_dim));
    checkpoint::load(&path, &mut z)?;
    Ok(z)
}

pub fn train_ldm(ctx: &Ctx) -> Result<()> {
    let g = ctx.graph()?;
    let z = latents(ctx, &g)?;
    let train = Ctx::labeled_train(&g);
    let labels: Vec<usize> = train
        .iter()
        .map(|&i| g.label(i).expect("labeled"))
        .collect();
    let t = Instant::now();
    let mut rows = Vec::new();
    let epochs = ctx.cfg.ldm.epochs;
    let trained = train_ldm_observed(
        z.select(Axis(0), &train).view(),
        &labels,
        g.n_classes(),
        &ctx.cfg.ldm,
        &mut |e, loss| {
            rows.push(vec![e.to_string(), fmt_f64(loss)]);
            if (e + 1) % 100 == 0 {
                log(
                    "train-ldm",
                    format!("epoch {}/{epochs} loss {loss:.4}", e + 1),
                );
            }
        },
    )?;
    write_csv(
        &ctx.run,
        "ldm_history.csv",
        "train-ldm",
        &["epoch", "loss"],
        rows,
    )?;
    checkpoint::save(
        &ctx.run.path(LDM),
        &trained.ema,
        json!({"scaler": trained.scaler}),
    )?;
    ctx.run.seal(LDM, "train-ldm")?;
    log(
        "train-ldm",
        format!("{} latents, done in {:.1?}", train.len(), t.elapsed()),
    );
    Ok(())
}

/// Samples `per_class` latents for every class and decodes them.
fn synthesize(ctx: &Ctx, g: &AttributedGraph, per_class: usize) -> Result<SyntheticBatch> {
    let clusters = ctx.clusters()?;
    let gae = ctx.gae(g, &clusters)?;
    let ldm = ctx.ldm(g)?;
    let sched = ctx.cfg.ldm.schedule()?;
    let (latents, labels) = generate_synthetic_latents(
        &ldm,
        per_class,
        ctx.cfg.omega,
        &sched,
        ctx.cfg.sample_seed(),
    )?;
    let (attributes, edges) =
        decode_synthetic_structures(&gae.decoder, latents.view(), &clusters, ctx.cfg.max_degree)?;
    Ok(SyntheticBatch {
        latents,
        labels,
        attributes,
        edges,
    })
}

pub fn generate(ctx: &Ctx) -> Result<()> {
    let g = ctx.graph()?;
    let per_class = synthetic_per_class(
        ctx.cfg.beta_syn,
        Ctx::labeled_train(&g).len(),
        g.n_classes(),
    );
    let t = Instant::now();
    let syn = synthesize(ctx, &g, per_class)?;
    let meta = SyntheticMeta {
        labels: syn.labels.clone(),
        edges: syn.edges.clone(),
    };
    let tensors = vec![syn.latents.clone(), syn.attributes.clone()];
    checkpoint::save(
        &ctx.run.path(SYNTHETIC),
        &tensors,
        serde_json::to_value(meta)?,
    )?;
    ctx.run.seal(SYNTHETIC, "generate")?;
    let n = g.n_nodes();
    let rows = syn
        .edges
        .iter()
        .enumerate()
        .flat_map(|(r, nbrs)| {
            nbrs.iter()
                .map(move |&j| vec![(n + r).to_string(), j.to_string()])
        })
        .collect();
    write_csv(
        &ctx.run,
        SYNTHETIC_EDGES,
        "generate",
        &["synthetic", "original"],
        rows,
    )?;
    log(
        "generate",
        format!(
            "{} synthetic nodes, {} edges in {:.1?}",
            syn.len(),
            syn.n_edges(),
            t.elapsed()
        ),
    );
    Ok(())
}

pub fn assemble(ctx: &Ctx) -> Result<()> {
    let g = ctx.graph()?;
    let syn = ctx.synthetic()?;
    let aug = assemble_augmented_graph(&g, &syn)?;
    let d = ctx.run.path(AUGMENTED);
    save_graph(
        &aug.graph,
        d.join("features.txt"),
        d.join("edges.txt"),
        d.join("labels.txt"),
    )?;
    for f in ["features.txt", "edges.txt", "labels.txt"] {
        ctx.run.seal(&format!("{AUGMENTED}/{f}"), "assemble")?;
    }
    let provenance = json!({
        "config_hash": ctx.run.hash(),
        "seed": ctx.cfg.seed,
        "sample_seed": ctx.cfg.sample_seed(),
        "omega": ctx.cfg.omega,
        "beta_syn": ctx.cfg.beta_syn,
        "n_original": g.n_nodes(),
        "n_synthetic": syn.len(),
        "n_synthetic_edges": syn.n_edges(),
        "gae_sha256": sha256_file(&ctx.run.path(GAE))?,
        "ldm_sha256": sha256_file(&ctx.run.path(LDM))?,
    });
    ctx.run.write(
        PROVENANCE,
        "assemble",
        &serde_json::to_vec_pretty(&provenance)?,
    )?;
    log("assemble", format!("{} + {} nodes", g.n_nodes(), syn.len()));
    Ok(())
}

fn lowrank_for(ctx: &Ctx, variant: Variant) -> LowRankConfig {
    match variant {
        Variant::Main => ctx.cfg.lowrank,
        Variant::Baseline => LowRankConfig {
            tau: 0.0,
            ..ctx.cfg.lowrank
        },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GcnSummary {
    pub seed: u64,
    pub config_hash: String,
    pub graph: String,
    pub lowrank: LowRankConfig,
    pub gcn: GcnConfig,
    pub best_epoch: usize,
    pub val_acc: Option<f64>,
    pub test_acc: f64,
    pub tnn: f64,
}

/// Trains `repeats` classifiers with consecutive seeds. The first one is
/// checkpointed with its per-epoch metrics; all of them are summarized.
pub fn train_gnn(ctx: &Ctx, variant: Variant, repeats: usize) -> Result<Vec<GcnSummary>> {
    let stage = "train-gnn";
    let g = ctx.training_graph(variant)?;
    let inputs = GcnInputs::new(&g);
    let sets = NodeSets::from_graph(&g);
    let lowrank = lowrank_for(ctx, variant);
    let graph_name = if g.n_nodes() > ctx.graph()?.n_nodes() {
        "augmented"
    } else {
        "original"
    };
    let t = Instant::now();
    let runs: Vec<_> = (0..repeats.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let cfg = GcnConfig {
                seed: ctx.cfg.gcn.seed.wrapping_add(r),
                ..ctx.cfg.gcn
            };
            let trained = train_node_classifier(&inputs, &sets, &lowrank, &cfg)?;
            let (_, logits) = gcn_forward(&trained.model, &inputs);
            let summary = GcnSummary {
                seed: cfg.seed,
                config_hash: ctx.run.hash().to_string(),
                graph: graph_name.to_string(),
                lowrank,
                gcn: cfg,
                best_epoch: trained.best_epoch,
                val_acc: accuracy_on(logits.view(), &inputs.labels, &sets.val).ok(),
                test_acc: accuracy_on(logits.view(), &inputs.labels, &sets.test)?,
                tnn: feature_tnn(&trained.model, &inputs, lowrank.gamma)?,
            };
            Ok((trained, summary))
        })
        .collect::<Result<_>>()?;

    let (first, _) = &runs[0];
    let rows = first
        .history
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                fmt_f64(e.train_loss),
                fmt_opt(e.tnn),
                fmt_opt(e.val_acc),
                fmt_opt(e.test_acc),
            ]
        })
        .collect();
    write_csv(
        &ctx.run,
        &variant.file("_metrics.csv"),
        stage,
        &["epoch", "train_loss", "tnn", "val_acc", "test_acc"],
        rows,
    )?;
    let meta =
        json!({"n_features": g.n_features(), "n_classes": g.n_classes(), "graph": graph_name});
    let ckpt = variant.file(".ckpt");
    checkpoint::save(&ctx.run.path(&ckpt), &first.model, meta)?;
    ctx.run.seal(&ckpt, stage)?;

    let summaries: Vec<GcnSummary> = runs.into_iter().map(|(_, s)| s).collect();
    ctx.run.write(
        &variant.file("_summary.json"),
        stage,
        &serde_json::to_vec_pretty(&summaries[0])?,
    )?;
    let rows = summaries
        .iter()
        .map(|s| {
            vec![
                s.seed.to_string(),
                fmt_opt(s.val_acc),
                fmt_f64(s.test_acc),
                fmt_f64(s.tnn),
            ]
        })
        .collect();
    write_csv(
        &ctx.run,
        &variant.file("_seeds.csv"),
        stage,
        &["seed", "val_acc", "test_acc", "tnn"],
        rows,
    )?;
    let mean = summaries.iter().map(|s| s.test_acc).sum::<f64>() / summaries.len() as f64;
    log(
        stage,
        format!(
            "{} on {graph_name} graph: {} seeds, mean test accuracy {mean:.4} in {:.1?}",
            variant.prefix(),
            summaries.len(),
            t.elapsed()
        ),
    );
    Ok(summaries)
}

fn load_gcn(ctx: &Ctx, variant: Variant, g: &AttributedGraph) -> Result<GcnModel> {
    let path = ctx.run.input(&variant.file(".ckpt"), "train-gnn")?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = GcnModel::new(g.n_features(), g.n_classes(), &ctx.cfg.gcn, &mut rng);
    checkpoint::load(&path, &mut model)?;
    Ok(model)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub test_acc: f64,
}

pub fn eval(ctx: &Ctx, variant: Variant) -> Result<EvalReport> {
    let g = ctx.training_graph(variant)?;
    let model = load_gcn(ctx, variant, &g)?;
    let inputs = GcnInputs::new(&g);
    let sets = NodeSets::from_graph(&g);
    let (_, logits) = gcn_forward(&model, &inputs);
    let report = EvalReport {
        config_hash: ctx.run.hash().to_string(),
        train_acc: accuracy_on(logits.view(), &inputs.labels, &sets.train)?,
        val_acc: accuracy_on(logits.view(), &inputs.labels, &sets.val).ok(),
        test_acc: accuracy_on(logits.view(), &inputs.labels, &sets.test)?,
    };
    ctx.run.write(
        &variant.file("_eval.json"),
        "eval",
        &serde_json::to_vec_pretty(&report)?,
    )?;
    log("eval", format!("test accuracy {:.4}", report.test_acc));
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagReport {
    pub rank_20pct: usize,
    pub concentration_20pct: f64,
    pub full_rank_concentration: f64,
}

/// Eigen-projection of the training labels on the classifier's features.
pub fn diag(ctx: &Ctx, variant: Variant) -> Result<DiagReport> {
    let g = ctx.training_graph(variant)?;
    let model = load_gcn(ctx, variant, &g)?;
    let inputs = GcnInputs::new(&g);
    let (h, _) = gcn_forward(&model, &inputs);
    let spectrum = gram_matrix(h.view());
    let y = one_hot(g.labels(), &Ctx::labeled_train(&g), g.n_classes());
    let p = eigen_projection(&spectrum, y.view())?;
    let rows = (0..spectrum.len())
        .map(|r| {
            vec![
                (r + 1).to_string(),
                fmt_f64(p.projection[r]),
                fmt_f64(p.concentration[r]),
            ]
        })
        .collect();
    let name = variant.file("_eigen_projection.csv");
    write_csv(
        &ctx.run,
        &name,
        "diag",
        &["rank", "projection", "concentration"],
        rows,
    )?;
    let r = ((0.2 * spectrum.len() as f64).round() as usize).clamp(1, spectrum.len());
    let report = DiagReport {
        rank_20pct: r,
        concentration_20pct: p.concentration[r - 1],
        full_rank_concentration: p.concentration[spectrum.len() - 1],
    };
    ctx.run.write(
        &variant.file("_diag.json"),
        "diag",
        &serde_json::to_vec_pretty(&report)?,
    )?;
    log(
        "diag",
        format!(
            "concentration at rank {r}: {:.4}",
            report.concentration_20pct
        ),
    );
    Ok(report)
}

/// Homophily and average degree of the original and synthetic structure.
pub fn metrics(ctx: &Ctx) -> Result<BTreeMap<String, (Option<f64>, Option<f64>)>> {
    let g = ctx.graph()?;
    let mut out = BTreeMap::new();
    out.insert(
        "original".to_string(),
        (homophily_ratio(&g).ok(), Some(average_degree(&g))),
    );
    let synthetic = if ctx.cfg.beta_syn > 0 {
        let q = synthetic_quality(&g, &ctx.synthetic()?);
        (q.homophily, q.average_degree)
    } else {
        (None, None)
    };
    out.insert("synthetic".to_string(), synthetic);
    let rows = ["original", "synthetic"]
        .iter()
        .map(|k| {
            let (h, d) = out[*k];
            vec![k.to_string(), fmt_opt(h), fmt_opt(d)]
        })
        .collect();
    write_csv(
        &ctx.run,
        QUALITY,
        "metrics",
        &["graph", "homophily", "average_degree"],
        rows,
    )?;
    Ok(out)
}

pub fn cv(ctx: &Ctx) -> Result<()> {
    let g = ctx.graph()?;
    let grid = CvGrid::from(&ctx.cfg.cv.grid);
    let max_beta = grid.betas.iter().copied().max().unwrap_or(0);
    let per_class = synthetic_per_class(max_beta, Ctx::labeled_train(&g).len(), g.n_classes());
    let pool = if per_class > 0 {
        Some(synthesize(ctx, &g, per_class)?)
    } else {
        None
    };
    let t = Instant::now();
    let result = cross_validate(&g, pool.as_ref(), &grid, &ctx.cfg.cv.budget, &ctx.cfg.gcn)?;
    let folds = ctx.cfg.cv.budget.folds;
    let mut header = vec![
        "beta".to_string(),
        "tau".into(),
        "gamma".into(),
        "mean_accuracy".into(),
    ];
    header.extend((1..=folds).map(|f| format!("fold_{f}")));
    let rows = result
        .scores
        .iter()
        .map(|s| {
            let mut row = vec![
                s.point.beta.to_string(),
                fmt_f64(s.point.tau),
                fmt_f64(s.point.gamma),
                fmt_f64(s.mean_accuracy),
            ];
            row.extend(s.fold_accuracy.iter().map(|&a| fmt_f64(a)));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&ctx.run, CV, "cv", &header, rows)?;
    ctx.run
        .write(CV_BEST, "cv", &serde_json::to_vec_pretty(&result.best)?)?;
    log(
        "cv",
        format!(
            "best beta {} tau {} gamma {} over {} points in {:.1?}",
            result.best.beta,
            result.best.tau,
            result.best.gamma,
            result.scores.len(),
            t.elapsed()
        ),
    );
    Ok(())
}

/// Runs every stage in order, skipping those whose outputs already exist
/// under this config hash unless `fresh` is set.
pub fn pipeline(ctx: &Ctx, fresh: bool, repeats: usize) -> Result<()> {
    let skip = |name: &str| -> Result<bool> { Ok(!fresh && ctx.run.is_fresh(name)?) };
    let step = |name: &str, output: &str, f: &dyn Fn(&Ctx) -> Result<()>| -> Result<()> {
        if skip(output)? {
            log("pipeline", format!("{name}: up to date"));
            return Ok(());
        }
        f(ctx).with_context(|| format!("stage {name}"))
    };
    if ctx.cfg.beta_syn > 0 {
        step("cluster", CLUSTERS, &cluster)?;
        step("train-gae", GAE, &train_gae)?;
        step("encode", LATENTS, &encode)?;
        step("train-ldm", LDM, &train_ldm)?;
        step("generate", SYNTHETIC, &generate)?;
        step("assemble", PROVENANCE, &assemble)?;
    }
    step("train-gnn", "gcn_summary.json", &|c| {
        train_gnn(c, Variant::Main, repeats).map(drop)
    })?;
    step("eval", "gcn_eval.json", &|c| {
        eval(c, Variant::Main).map(drop)
    })?;
    step("metrics", QUALITY, &|c| metrics(c).map(drop))?;
    step("diag", "gcn_diag.json", &|c| {
        diag(c, Variant::Main).map(drop)
    })?;
    Ok(())
}

/// Writes a planted-partition toy graph in the three-file format.
pub fn make_toy(
    out: &Path,
    nodes: usize,
    classes: usize,
    features: usize,
    seed: u64,
) -> Result<()> {
    if nodes == 0 || classes == 0 {
        return Err(anyhow!("toy graph needs nodes and classes"));
    }
    let g = dog_core::graph::toy::PlantedPartition {
        n_nodes: nodes,
        n_classes: classes,
        n_features: features,
        seed,
        ..Default::default()
    }
    .generate();
    save_graph(
        &g,
        out.join("features.txt"),
        out.join("edges.txt"),
        out.join("labels.txt"),
    )?;
    Ok(())
}
