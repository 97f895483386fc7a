use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::evolve::{SearchError, SearchResult};
use crate::genome::{to_dot, GenomeTree};

pub const HISTORY_CSV: &str = "history.csv";
pub const HISTORY_JSONL: &str = "history.jsonl";
pub const ARCHIVE_FILE: &str = "archive.jsonl";
pub const FRONT_DIR: &str = "front";

/// Objectives and metrics of one front member, stored next to its tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontRecord {
    pub id: String,
    pub key: String,
    pub f1: f64,
    pub f2: f64,
    pub depth: usize,
    pub breadth: usize,
    pub num_c: usize,
    #[serde(skip)]
    pub tree: Option<GenomeTree>,
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> SearchError + '_ {
    move |e| SearchError::Io(format!("{}: {e}", path.display()))
}

fn write(path: &Path, body: &str) -> Result<(), SearchError> {
    fs::write(path, body).map_err(io(path))
}

/// Writes the history, archive and front files into `dir`. Any previous
/// `front/` directory is replaced.
pub fn write_run_outputs(dir: &Path, result: &SearchResult) -> Result<(), SearchError> {
    fs::create_dir_all(dir).map_err(io(dir))?;

    let mut csv = String::from("generation,best_f1,front_size,archive_size\n");
    let mut jsonl = String::new();
    for h in &result.history {
        csv.push_str(&format!("{},{},{},{}\n", h.generation, h.best_f1, h.front_size, h.archive_size));
        jsonl.push_str(&serde_json::to_string(h).expect("history serializes"));
        jsonl.push('\n');
    }
    write(&dir.join(HISTORY_CSV), &csv)?;
    write(&dir.join(HISTORY_JSONL), &jsonl)?;

    let mut archive = String::new();
    for e in result.archive.entries() {
        archive.push_str(&serde_json::to_string(e).expect("entry serializes"));
        archive.push('\n');
    }
    write(&dir.join(ARCHIVE_FILE), &archive)?;

    let front_dir = dir.join(FRONT_DIR);
    if front_dir.exists() {
        fs::remove_dir_all(&front_dir).map_err(io(&front_dir))?;
    }
    fs::create_dir_all(&front_dir).map_err(io(&front_dir))?;
    for (i, ind) in result.front.iter().enumerate() {
        let id = format!("ind_{i:03}");
        let m = ind.metrics();
        let rec = FrontRecord {
            id: id.clone(),
            key: ind.key.clone(),
            f1: ind.f1,
            f2: ind.f2,
            depth: m.depth,
            breadth: m.breadth,
            num_c: m.num_c,
            tree: None,
        };
        write(&front_dir.join(format!("{id}.json")), &(ind.tree.to_json_pretty() + "\n"))?;
        write(&front_dir.join(format!("{id}.dot")), &to_dot(&ind.tree))?;
        let metrics = serde_json::to_string_pretty(&rec).expect("record serializes") + "\n";
        write(&front_dir.join(format!("{id}.metrics.json")), &metrics)?;
    }
    Ok(())
}

/// Loads the front written by [`write_run_outputs`], in file order.
pub fn read_front(dir: &Path) -> Result<Vec<FrontRecord>, SearchError> {
    let front_dir = dir.join(FRONT_DIR);
    let mut names: Vec<String> = fs::read_dir(&front_dir)
        .map_err(io(&front_dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".metrics.json"))
        .collect();
    names.sort();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let path = front_dir.join(&name);
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        let mut rec: FrontRecord =
            serde_json::from_str(&text).map_err(|e| SearchError::Io(format!("{}: {e}", path.display())))?;
        let tree_path = front_dir.join(format!("{}.json", rec.id));
        let tree_text = fs::read_to_string(&tree_path).map_err(io(&tree_path))?;
        let tree = GenomeTree::from_json(&tree_text)
            .map_err(|e| SearchError::Io(format!("{}: {e}", tree_path.display())))?;
        rec.tree = Some(tree);
        out.push(rec);
    }
    Ok(out)
}
