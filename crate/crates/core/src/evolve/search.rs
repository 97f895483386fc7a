use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::ResponseDataset;
use crate::evolve::{
    apply_single, assign_rank_and_crowding, environmental_selection, genetic_operation, nondominated_indices,
    tournament_select, SearchError, VariationKind,
};
use crate::genome::{canonical_key, random_tree, seed_tree, BaselineModel, GenomeTree, TreeMetrics};
use crate::training::{train, CandidateModel, Dims, TrainConfig};

/// Attempts at drawing an initial individual not seen before.
const MAX_DUPLICATE_RETRIES: usize = 10;

/// Environment variable that caps evaluation threads.
pub const THREADS_ENV: &str = "CDM_EVO_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub pop: usize,
    pub gen: usize,
    /// Computation-node range for random initial trees.
    pub node_range: [usize; 2],
    /// Fitness training; its seed is replaced per candidate.
    pub train: TrainConfig,
    pub seed: u64,
    /// Evaluation threads; defaults to the available cores.
    pub threads: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            pop: 100,
            gen: 100,
            node_range: [2, 4],
            train: TrainConfig::default(),
            seed: 0,
            threads: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.pop < 4 || self.pop % 2 != 0 {
            return Err(SearchError::Config(format!("pop must be even and at least 4, got {}", self.pop)));
        }
        let [lo, hi] = self.node_range;
        if lo < 1 || lo > hi {
            return Err(SearchError::Config(format!("node_range [{lo}, {hi}] must satisfy 1 <= lo <= hi")));
        }
        if self.train.epochs == 0 {
            return Err(SearchError::Config("fitness training needs at least one epoch".into()));
        }
        if self.threads == Some(0) {
            return Err(SearchError::Config("threads must be at least 1".into()));
        }
        self.train.validate().map_err(|e| SearchError::Config(e.to_string()))
    }
}

/// A tree with its objectives and selection state.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub tree: GenomeTree,
    pub key: String,
    /// Validation AUC; meaningful once `evaluated`.
    pub f1: f64,
    pub f2: f64,
    pub rank: usize,
    pub crowding: f64,
    pub evaluated: bool,
}

impl Individual {
    pub fn new(tree: GenomeTree) -> Self {
        Individual {
            key: canonical_key(&tree),
            f2: tree.interpretability(),
            tree,
            f1: 0.0,
            rank: 0,
            crowding: 0.0,
            evaluated: false,
        }
    }

    pub fn objectives(&self) -> (f64, f64) {
        (self.f1, self.f2)
    }

    pub fn metrics(&self) -> TreeMetrics {
        self.tree.metrics()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub canonical_key: String,
    pub f1: f64,
    pub f2: f64,
    #[serde(skip)]
    pub tree: Option<GenomeTree>,
}

/// Every evaluated tree of a run, by canonical key, in evaluation order.
#[derive(Clone, Debug, Default)]
pub struct Archive {
    entries: Vec<ArchiveEntry>,
    index: BTreeMap<String, usize>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&ArchiveEntry> {
        self.index.get(key).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    /// Adds an entry; returns false (and changes nothing) if the key exists.
    pub fn insert(&mut self, tree: &GenomeTree, f1: f64) -> bool {
        let key = canonical_key(tree);
        if self.index.contains_key(&key) {
            return false;
        }
        self.index.insert(key.clone(), self.entries.len());
        self.entries.push(ArchiveEntry {
            canonical_key: key,
            f1,
            f2: tree.interpretability(),
            tree: Some(tree.clone()),
        });
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn best_f1(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.f1).max_by(f64::total_cmp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub key: String,
    pub f1: f64,
    pub f2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    /// 0 is the initial population.
    pub generation: usize,
    /// Best validation AUC evaluated so far.
    pub best_f1: f64,
    /// Rank-0 members of the population.
    pub front_size: usize,
    pub archive_size: usize,
    pub front: Vec<FrontPoint>,
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    /// Non-dominated individuals over the final population and the archive,
    /// best f1 first.
    pub front: Vec<Individual>,
    pub population: Vec<Individual>,
    pub history: Vec<GenerationRecord>,
    pub archive: Archive,
}

/// Trainer seed for one candidate, independent of evaluation order.
pub fn candidate_seed(run_seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

/// Thread count from the config (or the machine), capped by `CDM_EVO_THREADS`.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    let base = requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    cap.map_or(base, |c| base.min(c)).max(1)
}

/// Half seed-derived, half random. The seed half starts with the pristine
/// IRT, MIRT, MF and NCD trees, then cycles through them applying one
/// random delete/replace/insert each. Repeats are redrawn a bounded number
/// of times.
pub fn initialize_population<R: rand::Rng + ?Sized>(cfg: &SearchConfig, rng: &mut R) -> Vec<GenomeTree> {
    let half = cfg.pop / 2;
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(cfg.pop);
    let admit = |tree: GenomeTree, seen: &mut HashSet<String>, out: &mut Vec<GenomeTree>| {
        seen.insert(canonical_key(&tree));
        out.push(tree);
    };
    for i in 0..half {
        let base = seed_tree(BaselineModel::ALL[i % BaselineModel::ALL.len()]);
        if i < BaselineModel::ALL.len() {
            admit(base, &mut seen, &mut out);
            continue;
        }
        let mut tries = 0;
        loop {
            let kind = *VariationKind::SINGLE_PARENT.choose(rng).expect("non-empty");
            let tree = apply_single(kind, &base, rng).tree;
            tries += 1;
            if !seen.contains(&canonical_key(&tree)) || tries >= MAX_DUPLICATE_RETRIES {
                admit(tree, &mut seen, &mut out);
                break;
            }
        }
    }
    let [lo, hi] = cfg.node_range;
    for _ in half..cfg.pop {
        let mut tries = 0;
        loop {
            let tree = random_tree(lo, hi, rng);
            tries += 1;
            if !seen.contains(&canonical_key(&tree)) || tries >= MAX_DUPLICATE_RETRIES {
                admit(tree, &mut seen, &mut out);
                break;
            }
        }
    }
    out
}

/// Best validation AUC of a freshly assembled and trained candidate.
pub fn fitness(tree: &GenomeTree, data: &ResponseDataset, cfg: &SearchConfig) -> Result<f64, SearchError> {
    let key = canonical_key(tree);
    let seed = candidate_seed(cfg.seed, &key);
    let dims = Dims {
        n_students: data.n_students(),
        n_exercises: data.n_exercises(),
        n_concepts: data.n_concepts(),
    };
    let mut model = CandidateModel::assemble(tree, dims, seed)?;
    let tcfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    Ok(train(&mut model, data, &tcfg)?.best_val_auc)
}

struct Evaluator<'a> {
    data: &'a ResponseDataset,
    cfg: &'a SearchConfig,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl<'a> Evaluator<'a> {
    fn new(data: &'a ResponseDataset, cfg: &'a SearchConfig) -> Result<Self, SearchError> {
        let _threads = resolve_threads(cfg.threads);
        Ok(Evaluator {
            data,
            cfg,
            #[cfg(feature = "parallel")]
            pool: if _threads > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(_threads)
                        .build()
                        .map_err(|e| SearchError::Config(format!("thread pool: {e}")))?,
                )
            } else {
                None
            },
        })
    }

    fn fitness_all(&self, trees: &[GenomeTree]) -> Vec<Result<f64, SearchError>> {
        let f = |t: &GenomeTree| fitness(t, self.data, self.cfg);
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| trees.par_iter().map(f).collect());
        }
        trees.iter().map(f).collect()
    }

    /// Evaluates trees missing from the archive (once per key), records
    /// them, and returns individuals with objectives filled in.
    fn evaluate(&self, trees: Vec<GenomeTree>, archive: &mut Archive) -> Result<Vec<Individual>, SearchError> {
        let mut fresh: Vec<GenomeTree> = Vec::new();
        let mut pending: HashSet<String> = HashSet::new();
        for t in &trees {
            let key = canonical_key(t);
            if !archive.contains(&key) && pending.insert(key) {
                fresh.push(t.clone());
            }
        }
        for (tree, f1) in fresh.iter().zip(self.fitness_all(&fresh)) {
            archive.insert(tree, f1?);
        }
        Ok(trees
            .into_iter()
            .map(|t| {
                let mut ind = Individual::new(t);
                ind.f1 = archive.get(&ind.key).expect("just evaluated").f1;
                ind.evaluated = true;
                ind
            })
            .collect())
    }
}

fn record(generation: usize, pop: &[Individual], archive: &Archive) -> GenerationRecord {
    let mut front: Vec<FrontPoint> = pop
        .iter()
        .filter(|i| i.rank == 0)
        .map(|i| FrontPoint {
            key: i.key.clone(),
            f1: i.f1,
            f2: i.f2,
        })
        .collect();
    front.sort_by(|a, b| b.f1.total_cmp(&a.f1).then(b.f2.total_cmp(&a.f2)).then(a.key.cmp(&b.key)));
    GenerationRecord {
        generation,
        best_f1: archive.best_f1().unwrap_or(0.0),
        front_size: front.len(),
        archive_size: archive.len(),
        front,
    }
}

/// Non-dominated set over the population and every archived evaluation,
/// one individual per key, sorted by f1 then f2 (descending) then key.
pub fn final_front(pop: &[Individual], archive: &Archive) -> Vec<Individual> {
    let mut pool: Vec<Individual> = Vec::new();
    let mut keys: HashSet<&str> = HashSet::new();
    for ind in pop {
        if keys.insert(&ind.key) {
            pool.push(ind.clone());
        }
    }
    for e in archive.entries() {
        if keys.insert(&e.canonical_key) {
            let tree = e.tree.clone().expect("archive entries carry trees in memory");
            let mut ind = Individual::new(tree);
            ind.f1 = e.f1;
            ind.evaluated = true;
            pool.push(ind);
        }
    }
    let points: Vec<(f64, f64)> = pool.iter().map(Individual::objectives).collect();
    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    let mut front: Vec<Individual> = nondominated_indices(&points)
        .into_iter()
        .map(|i| slots[i].take().expect("unique index"))
        .collect();
    assign_rank_and_crowding(&mut front);
    front.sort_by(|a, b| b.f1.total_cmp(&a.f1).then(b.f2.total_cmp(&a.f2)).then(a.key.cmp(&b.key)));
    front
}

pub fn run_search(cfg: &SearchConfig, data: &ResponseDataset) -> Result<SearchResult, SearchError> {
    run_search_with(cfg, data, |_| {})
}

/// Runs the search, calling `observe` after the initial population and
/// after every generation.
pub fn run_search_with(
    cfg: &SearchConfig,
    data: &ResponseDataset,
    mut observe: impl FnMut(&GenerationRecord),
) -> Result<SearchResult, SearchError> {
    cfg.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(SearchError::Config("train and validation splits must be non-empty".into()));
    }
    let evaluator = Evaluator::new(data, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut archive = Archive::new();

    let init = initialize_population(cfg, &mut rng);
    let mut pop = evaluator.evaluate(init, &mut archive)?;
    assign_rank_and_crowding(&mut pop);
    let mut history = vec![record(0, &pop, &archive)];
    observe(&history[0]);

    for generation in 1..=cfg.gen {
        let parents: Vec<GenomeTree> = tournament_select(&pop, &mut rng)
            .into_iter()
            .map(|i| pop[i].tree.clone())
            .collect();
        let offspring = genetic_operation(&parents, &mut rng);
        let offspring = evaluator.evaluate(offspring, &mut archive)?;
        let mut union = pop;
        union.extend(offspring);
        pop = environmental_selection(union, cfg.pop, &mut rng);
        history.push(record(generation, &pop, &archive));
        observe(history.last().expect("just pushed"));
    }

    Ok(SearchResult {
        front: final_front(&pop, &archive),
        population: pop,
        history,
        archive,
    })
}
