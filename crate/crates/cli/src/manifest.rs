//! Run manifest written next to directory outputs.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub config: serde_json::Value,
    /// Files written by the run, relative to the output directory.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &'static str, seed: u64, threads: Option<usize>, config: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            args: std::env::args().skip(1).collect(),
            seed,
            threads,
            config,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
    }
}
