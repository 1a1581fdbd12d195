//! Run configuration files and the run manifest.

use clabel_core::labelsearch::SearchConfig;
use clabel_core::mixture::FitConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Optional settings read from a TOML file. Every key mirrors a command-line
/// flag; flags win over the file, the file wins over built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: Option<String>,
    pub missing_token: Option<String>,
    pub k: Option<String>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub smoothing: Option<f64>,
    pub r: Option<f64>,
    pub s_global: Option<f64>,
    pub s_local: Option<f64>,
    pub quantiles: Option<Vec<f64>>,
    pub greedy: Option<bool>,
    pub max_length: Option<usize>,
    pub positive_only: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetRef {
    pub path: String,
    pub schema_path: String,
    pub fingerprint: String,
    pub sha256: String,
    pub n: usize,
}

/// Everything needed to rerun a command.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub dataset: DatasetRef,
    pub seed: u64,
    pub fit: Option<FitConfig>,
    pub search: Option<SearchConfig>,
    pub k_range: Option<(usize, usize)>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
