use crate::CliResult;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Record of one run. `outputs` are paths relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
    pub outputs: Vec<String>,
}

/// RFC 3339 UTC time, taken from `SOURCE_DATE_EPOCH` when set so that repeated
/// runs can be byte-identical.
pub fn timestamp() -> String {
    let t = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0))
        .unwrap_or_else(Utc::now);
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Files produced by a run, written together at the end.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Writes every file and then the manifest listing them.
    pub fn write(self, dir: &Path, mut manifest: RunManifest) -> CliResult<RunManifest> {
        std::fs::create_dir_all(dir)?;
        manifest.outputs = self.names();
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents)?;
        }
        std::fs::write(dir.join(MANIFEST_NAME), sawlab_core::io::to_json(&manifest)?)?;
        Ok(manifest)
    }
}
