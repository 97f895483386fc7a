use std::fs;
use std::path::{Path, PathBuf};

use cdm_evo::data::{
    generate_synthetic, load_dataset, RawData, ResponseDataset, SplitRatios, SynthConfig, MIN_LOGS_PER_STUDENT,
};
use cdm_evo::evolve::SearchConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, Classify, Kind};

/// Where the responses come from and how they are split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SynthConfig>,
    #[serde(default = "default_min_logs")]
    pub min_logs: usize,
    #[serde(default)]
    pub ratios: SplitRatios,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_min_logs() -> usize {
    MIN_LOGS_PER_STUDENT
}

impl DataConfig {
    pub fn from_files(logs: PathBuf, q: PathBuf) -> Self {
        DataConfig {
            logs: Some(logs),
            q: Some(q),
            synthetic: None,
            min_logs: MIN_LOGS_PER_STUDENT,
            ratios: SplitRatios::default(),
            split_seed: 0,
        }
    }

    fn validate(&self) -> CliResult<()> {
        let files = self.logs.is_some() || self.q.is_some();
        if files && self.synthetic.is_some() {
            return Err(CliError::new(Kind::Config, "data: give either logs/q or synthetic, not both"));
        }
        if !files && self.synthetic.is_none() {
            return Err(CliError::new(Kind::Config, "data: missing logs/q or synthetic"));
        }
        if files && (self.logs.is_none() || self.q.is_none()) {
            return Err(CliError::new(Kind::Config, "data: logs and q must be given together"));
        }
        self.ratios.validate().or_kind(Kind::Config)
    }
}

/// The single configuration artifact of a search run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub search: SearchConfig,
}

/// Parses JSON, or TOML when the file ends in `.toml`. Relative data paths
/// are taken relative to the config file.
pub fn load_run_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(Kind::Config, format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| CliError::new(Kind::Config, format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::new(Kind::Config, format!("{}: {e}", path.display())))?
    };
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut cfg.data.logs, &mut cfg.data.q].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    cfg.data.validate()?;
    Ok(cfg)
}

/// Sizes and content hash of the dataset a run used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub fingerprint: String,
    pub n_students: usize,
    pub n_exercises: usize,
    pub n_concepts: usize,
    pub raw_students: usize,
    pub raw_logs: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

pub struct LoadedData {
    pub raw: RawData,
    pub dataset: ResponseDataset,
    pub info: DatasetInfo,
}

pub fn load_data(cfg: &DataConfig) -> CliResult<LoadedData> {
    cfg.validate()?;
    let mut hasher = Sha256::new();
    let raw = match (&cfg.logs, &cfg.q, &cfg.synthetic) {
        (Some(logs), Some(q), None) => {
            for p in [logs, q] {
                let bytes = fs::read(p)
                    .map_err(|e| CliError::new(Kind::Data, format!("cannot read {}: {e}", p.display())))?;
                hasher.update((bytes.len() as u64).to_le_bytes());
                hasher.update(&bytes);
            }
            load_dataset(logs, q).or_kind(Kind::Data)?
        }
        (None, None, Some(synth)) => {
            hasher.update(b"synthetic");
            hasher.update(serde_json::to_vec(synth).expect("config serializes"));
            generate_synthetic(synth).raw
        }
        _ => unreachable!("validated above"),
    };
    let dataset = ResponseDataset::build(&raw, cfg.min_logs, cfg.ratios, cfg.split_seed).or_kind(Kind::Data)?;
    let info = DatasetInfo {
        fingerprint: format!("{:x}", hasher.finalize()),
        n_students: dataset.n_students(),
        n_exercises: dataset.n_exercises(),
        n_concepts: dataset.n_concepts(),
        raw_students: raw.student_ids.len(),
        raw_logs: raw.logs.len(),
        train: dataset.train.len(),
        val: dataset.val.len(),
        test: dataset.test.len(),
    };
    Ok(LoadedData { raw, dataset, info })
}
