use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{DatasetInfo, RunConfig};
use crate::error::{CliError, CliResult, Kind};

pub const RUN_MANIFEST: &str = "run.json";
pub const CONFIG_FILE: &str = "config.json";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Finished,
}

/// Bookkeeping for one search run, rewritten atomically as it progresses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: RunStatus,
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub dataset: DatasetInfo,
    /// Wall-clock seconds per phase.
    pub phases: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(config: RunConfig, dataset: DatasetInfo) -> Self {
        RunManifest {
            status: RunStatus::Running,
            tool: env!("CARGO_BIN_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            dataset,
            phases: BTreeMap::new(),
        }
    }

    pub fn read(dir: &Path) -> CliResult<Option<Self>> {
        let path = dir.join(RUN_MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::new(Kind::RunState, format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::new(Kind::RunState, format!("{}: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_atomic(&dir.join(RUN_MANIFEST), &to_json(self))
    }
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, body: &str) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, body)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| CliError::new(Kind::RunState, format!("cannot write {}: {e}", path.display())))
}
