use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use dog_cli::config::RunConfig;
use dog_cli::stages::{self, Variant};

#[derive(Parser)]
#[command(
    name = "dog",
    version,
    about = "Diffusion-based graph augmentation pipeline"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config; its fields override the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Start from the shortened single-core preset.
    #[arg(long, global = true)]
    desk: bool,
    /// Directory with features.txt, edges.txt and labels.txt.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Parent of the per-config run directories.
    #[arg(long, global = true, default_value = "runs")]
    runs_root: PathBuf,
    /// Explicit run directory instead of <runs-root>/<config hash>.
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,
    /// Accept upstream artifacts produced under a different config.
    #[arg(long, global = true)]
    force: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cluster count.
    #[arg(long, global = true)]
    clusters: Option<usize>,
    #[arg(long, global = true)]
    omega: Option<f64>,
    /// Synthetic nodes per labeled node.
    #[arg(long, global = true)]
    beta_syn: Option<usize>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    max_degree: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Balanced K-means on node attributes.
    Cluster,
    /// Train the graph autoencoder.
    TrainGae,
    /// Encode every node with the trained encoder.
    Encode,
    /// Train the class-conditional latent diffusion model.
    TrainLdm,
    /// Sample and decode synthetic nodes.
    Generate,
    /// Append synthetic nodes to the graph.
    Assemble,
    /// Train the node classifier.
    TrainGnn {
        /// Original graph, no penalty.
        #[arg(long)]
        baseline: bool,
        /// Number of consecutive seeds.
        #[arg(long, default_value_t = 1)]
        repeat: usize,
    },
    /// Accuracy of the trained classifier.
    Eval {
        #[arg(long)]
        baseline: bool,
    },
    /// Eigen-projection of the labels on classifier features.
    Diag {
        #[arg(long)]
        baseline: bool,
    },
    /// Homophily and degree of original and synthetic structure.
    Metrics,
    /// Grid search with cross-validation.
    Cv,
    /// Every stage in order, resuming from existing artifacts.
    Pipeline {
        /// Recompute stages even if their outputs exist.
        #[arg(long)]
        fresh: bool,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
    },
    /// Print the resolved config and its hash.
    ShowConfig,
    /// Write a planted-partition toy graph.
    MakeToy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        nodes: usize,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 16)]
        features: usize,
        #[arg(long, default_value_t = 0)]
        toy_seed: u64,
    },
}

fn build_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(c.config.as_deref(), c.desk)?;
    if let Some(d) = &c.data {
        cfg.data_dir = d.clone();
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.clusters {
        cfg.clusters = v;
    }
    if let Some(v) = c.omega {
        cfg.omega = v;
    }
    if let Some(v) = c.beta_syn {
        cfg.beta_syn = v;
    }
    if let Some(v) = c.tau {
        cfg.lowrank.tau = v;
    }
    if let Some(v) = c.gamma {
        cfg.lowrank.gamma = v;
    }
    if c.max_degree.is_some() {
        cfg.max_degree = c.max_degree;
    }
    Ok(cfg)
}

fn variant(baseline: bool) -> Variant {
    if baseline {
        Variant::Baseline
    } else {
        Variant::Main
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    dog_cli::init_threads()?;
    if let Command::MakeToy {
        out,
        nodes,
        classes,
        features,
        toy_seed,
    } = &cli.command
    {
        return stages::make_toy(out, *nodes, *classes, *features, *toy_seed);
    }
    let c = &cli.common;
    let ctx = dog_cli::context(
        build_config(c)?,
        c.runs_root.clone(),
        c.run_dir.clone(),
        c.force,
    )?;
    match cli.command {
        Command::Cluster => stages::cluster(&ctx)?,
        Command::TrainGae => stages::train_gae(&ctx)?,
        Command::Encode => stages::encode(&ctx)?,
        Command::TrainLdm => stages::train_ldm(&ctx)?,
        Command::Generate => stages::generate(&ctx)?,
        Command::Assemble => stages::assemble(&ctx)?,
        Command::TrainGnn { baseline, repeat } => {
            stages::train_gnn(&ctx, variant(baseline), repeat)?;
        }
        Command::Eval { baseline } => {
            let r = stages::eval(&ctx, variant(baseline))?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::Diag { baseline } => {
            let r = stages::diag(&ctx, variant(baseline))?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::Metrics => {
            for (graph, (h, d)) in stages::metrics(&ctx)? {
                println!("{graph}: homophily {h:?} average degree {d:?}");
            }
        }
        Command::Cv => stages::cv(&ctx)?,
        Command::Pipeline { fresh, repeat } => stages::pipeline(&ctx, fresh, repeat)?,
        Command::ShowConfig => {
            println!("{}", serde_json::to_string_pretty(&ctx.cfg)?);
            println!("hash {}", ctx.run.hash());
        }
        Command::MakeToy { .. } => unreachable!("handled above"),
    }
    println!("{}", ctx.run.root().display());
    Ok(())
}
