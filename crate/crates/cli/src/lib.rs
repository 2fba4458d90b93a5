//! Stage-by-stage command-line pipeline over `dog-core`.

pub mod artifacts;
pub mod config;
pub mod output;
pub mod stages;

use std::path::PathBuf;

use anyhow::Result;

use artifacts::RunDir;
use config::RunConfig;
use stages::Ctx;

/// Builds the stage context: the run directory defaults to
/// `<runs_root>/<config hash>`.
pub fn context(
    cfg: RunConfig,
    runs_root: PathBuf,
    run_dir: Option<PathBuf>,
    force: bool,
) -> Result<Ctx> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let hash = cfg.hash();
    let root = run_dir.unwrap_or_else(|| runs_root.join(&hash));
    let run = RunDir::create(root, hash, force)?;
    std::fs::write(run.path("config.json"), serde_json::to_vec_pretty(&cfg)?)?;
    Ok(Ctx { cfg, run })
}

/// Sizes the global thread pool from `DOG_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DOG_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("DOG_THREADS must be a count, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}
