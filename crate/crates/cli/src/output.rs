//! CSV output with shortest round-trip float formatting.

use anyhow::Result;

use crate::artifacts::RunDir;

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Empty cell for `None`.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_csv(
    run: &RunDir,
    name: &str,
    stage: &str,
    header: &[&str],
    rows: Vec<Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
    run.write(name, stage, &bytes)?;
    Ok(())
}
