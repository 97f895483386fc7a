//! Multi-objective genetic programming over trees: variation operators,
//! NSGA-II selection, the duplicate archive and the generation loop.

mod nsga;
mod rundir;
mod search;
mod variation;

use thiserror::Error;

use crate::training::TrainError;

pub use nsga::{
    assign_rank_and_crowding, crowding_distance, dominates, environmental_selection, fast_nondominated_sort,
    nondominated_indices, tournament_select,
};
pub use rundir::{read_front, write_run_outputs, FrontRecord, ARCHIVE_FILE, FRONT_DIR, HISTORY_CSV, HISTORY_JSONL};
pub use search::{
    candidate_seed, final_front, fitness, initialize_population, resolve_threads, run_search, run_search_with,
    Archive, ArchiveEntry, FrontPoint, GenerationRecord, Individual, SearchConfig, SearchResult, THREADS_ENV,
};
pub use variation::{
    apply_single, delete_node, exchange, genetic_operation, insert_node, replace_node, Variation, VariationKind,
    MAX_DEPTH_RETRIES,
};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{0}")]
    Io(String),
}
