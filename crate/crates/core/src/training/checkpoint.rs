use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::genome::{canonical_key, GenomeTree};
use crate::training::{CandidateModel, Dims, EpochRecord, EvalReport, OutputMode, TrainConfig, TrainError};

pub const MANIFEST_FILE: &str = "model.json";
pub const BLOB_FILE: &str = "params.bin";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub monotonic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetrics {
    pub best_val_auc: f64,
    pub best_epoch: Option<usize>,
    pub test: Option<EvalReport>,
}

/// JSON description of a saved model; the parameters live in a blob of
/// little-endian f64 values, concatenated in `params` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: u32,
    pub tree_key: String,
    pub tree: GenomeTree,
    pub dims: Dims,
    pub output_mode: OutputMode,
    pub init_seed: u64,
    pub config: TrainConfig,
    pub metrics: CheckpointMetrics,
    pub params: Vec<ParamEntry>,
    pub blob: String,
    pub blob_sha256: String,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> TrainError + '_ {
    move |e| TrainError::Io(format!("{}: {e}", path.display()))
}

/// Writes `model.json` and `params.bin` into `dir`, creating it if needed.
pub fn save_checkpoint(
    dir: &Path,
    model: &CandidateModel,
    config: &TrainConfig,
    metrics: CheckpointMetrics,
) -> Result<CheckpointManifest, TrainError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut blob = Vec::with_capacity(model.store().scalar_count() * 8);
    let mut params = Vec::new();
    for (_, p) in model.store().iter() {
        params.push(ParamEntry {
            name: p.name.clone(),
            rows: p.rows,
            cols: p.cols,
            monotonic: p.monotonic,
        });
        for v in &p.value {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        format: FORMAT_VERSION,
        tree_key: canonical_key(model.tree()),
        tree: model.tree().clone(),
        dims: model.dims(),
        output_mode: model.output_mode(),
        init_seed: model.seed(),
        config: config.clone(),
        metrics,
        params,
        blob: BLOB_FILE.to_string(),
        blob_sha256: format!("{:x}", Sha256::digest(&blob)),
    };
    let blob_path = dir.join(BLOB_FILE);
    fs::write(&blob_path, &blob).map_err(io_err(&blob_path))?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, json + "\n").map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

/// Rebuilds a model from a checkpoint directory, verifying the blob.
pub fn load_checkpoint(dir: &Path) -> Result<(CandidateModel, CheckpointManifest), TrainError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: CheckpointManifest =
        serde_json::from_str(&text).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", manifest_path.display())))?;
    if manifest.format != FORMAT_VERSION {
        return Err(TrainError::Checkpoint(format!("unsupported format {}", manifest.format)));
    }
    let blob_path = dir.join(&manifest.blob);
    let blob = fs::read(&blob_path).map_err(io_err(&blob_path))?;
    if format!("{:x}", Sha256::digest(&blob)) != manifest.blob_sha256 {
        return Err(TrainError::Checkpoint("parameter blob checksum mismatch".into()));
    }
    let mut model = CandidateModel::assemble(&manifest.tree, manifest.dims, manifest.init_seed)?;
    let layout: Vec<ParamEntry> = model
        .store()
        .iter()
        .map(|(_, p)| ParamEntry {
            name: p.name.clone(),
            rows: p.rows,
            cols: p.cols,
            monotonic: p.monotonic,
        })
        .collect();
    if layout != manifest.params {
        return Err(TrainError::Checkpoint("parameter layout does not match the tree".into()));
    }
    if blob.len() != model.store().scalar_count() * 8 {
        return Err(TrainError::Checkpoint("parameter blob has the wrong length".into()));
    }
    let mut values = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let ids: Vec<_> = model.store().iter().map(|(id, _)| id).collect();
    for id in ids {
        for v in model.store_mut().get_mut(id).value.iter_mut() {
            *v = values.next().expect("length checked");
        }
    }
    Ok((model, manifest))
}

/// Writes the epoch trace as `epoch,train_loss,val_auc`.
pub fn write_trace_csv(path: &Path, trace: &[EpochRecord]) -> Result<(), TrainError> {
    let mut out = String::from("epoch,train_loss,val_auc\n");
    for r in trace {
        out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_auc));
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(out.as_bytes()).map_err(io_err(path))
}
