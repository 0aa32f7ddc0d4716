use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::formats::OutputDir;

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config_sha256: String,
    /// File name to SHA-256, for every file the command wrote.
    pub outputs: &'a BTreeMap<String, String>,
}

/// Writes `<command>.manifest.json` describing everything written to `out` so far.
pub fn write_manifest(out: &mut OutputDir, command: &str, cfg: &ExperimentConfig) -> Result<()> {
    let outputs = out.checksums().clone();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cfg.seed(),
        config_sha256: cfg.hash(),
        outputs: &outputs,
    };
    out.write_json(&format!("{command}.manifest.json"), &manifest)?;
    Ok(())
}
