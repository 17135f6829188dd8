//! Run manifest: resolved configuration, versions, timings and cache use.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::CliResult;
use crate::export::{read_toml, write_toml};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub koopman_cli: String,
    pub koopman_core: String,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            koopman_cli: env!("CARGO_PKG_VERSION").into(),
            koopman_core: koopman_core::VERSION.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub path: PathBuf,
    /// SHA-256 of `dt` and the sample bits.
    pub sha256: String,
    pub n: usize,
    pub d: usize,
    pub dt: f64,
    pub seconds: f64,
}

/// Seconds per stage; stages that did not run are absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSeconds {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub galerkin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QRecord {
    pub q: usize,
    pub epsilon: f64,
    pub kernel_key: String,
    pub kernel_cache_hit: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_cache_hit: Option<bool>,
    pub seconds: StageSeconds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub versions: Versions,
    pub config: PipelineConfig,
    pub trajectory: TrajectoryRecord,
    #[serde(default)]
    pub runs: Vec<QRecord>,
}

impl Manifest {
    pub fn path(out: &Path) -> PathBuf {
        out.join(MANIFEST_FILE)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        read_toml(path)
    }

    pub fn save(&self, out: &Path) -> CliResult<()> {
        write_toml(&Self::path(out), self)
    }

    pub fn cache_hits(&self) -> usize {
        self.runs.iter().filter(|r| r.kernel_cache_hit).count()
    }
}
