use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
    pub positives: usize,
}

/// Reproducibility record written next to every set of results. The `id`
/// covers everything except timestamps and output paths, and is stamped into
/// each result file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub id: String,
    pub command: String,
    pub tool_version: String,
    pub config: Option<RunConfig>,
    pub dataset: DatasetInfo,
    pub seeds: Vec<u64>,
    pub selection: Vec<String>,
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&RunConfig>, dataset: DatasetInfo, seeds: &[u64], selection: Vec<String>) -> Self {
        let mut m = RunManifest {
            id: String::new(),
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config: config.cloned(),
            dataset,
            seeds: seeds.to_vec(),
            selection,
            outputs: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0,
        };
        let key = serde_json::json!({
            "command": m.command,
            "tool_version": m.tool_version,
            "config": m.config,
            "dataset": m.dataset.sha256,
            "seeds": m.seeds,
            "selection": m.selection,
        });
        m.id = sha256_hex(key.to_string().as_bytes())[..16].to_string();
        m
    }

    /// Writes `contents` under `dir` and records it as an output.
    pub fn write_output(&mut self, dir: &Path, name: &str, contents: &str) -> Result<()> {
        fs::write(dir.join(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(())
    }
}

/// Prefixes every CSV row with a `manifest` column.
pub fn stamp_csv(csv: &str, id: &str) -> String {
    let mut out = String::with_capacity(csv.len() + 20 * csv.lines().count());
    for (i, line) in csv.lines().enumerate() {
        if i == 0 {
            out.push_str("manifest,");
        } else {
            out.push_str(id);
            out.push(',');
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}
