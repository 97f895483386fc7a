mod config;
mod error;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cdm_evo::data::{generate_synthetic, write_logs_csv, write_q_csv, SynthConfig};
use cdm_evo::evolve::{read_front, run_search_with, write_run_outputs, SearchError};
use cdm_evo::genome::{canonical_key, infer_shapes, parse_key, to_dot, GenomeTree};
use cdm_evo::training::{
    evaluate, save_checkpoint, train, write_trace_csv, CandidateModel, CheckpointMetrics, Dims, EvalError,
    TrainConfig, TrainError,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::{load_data, load_run_config, DataConfig, RunConfig};
use error::{CliError, CliResult, Classify, Kind};
use manifest::{to_json, write_atomic, RunManifest, RunStatus, CONFIG_FILE, SPLIT_FILE};

#[derive(Parser)]
#[command(name = "cdm-evo", version, about = "Evolutionary search over cognitive diagnosis models")]
struct Cli {
    /// Seed for splits, training and search (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Evaluation threads for `search` (capped by CDM_EVO_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output location; each command has its own default.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a logs CSV and Q-matrix, then print sizes and the split preview.
    ValidateData {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        q: PathBuf,
        #[arg(long, default_value_t = cdm_evo::data::MIN_LOGS_PER_STUDENT)]
        min_logs: usize,
    },
    /// Run a search described by a JSON or TOML config.
    Search {
        #[arg(long)]
        config: PathBuf,
        /// Continue an existing run directory (a finished run is left as is).
        #[arg(long)]
        resume: bool,
    },
    /// Train one architecture from scratch and report test metrics.
    Train(TrainArgs),
    /// Export the final front of a finished run.
    Export {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
    },
    /// Write a planted-factor synthetic dataset as CSV files.
    Synth {
        #[arg(long, default_value_t = 200)]
        students: usize,
        #[arg(long, default_value_t = 100)]
        exercises: usize,
        #[arg(long, default_value_t = 8)]
        concepts: usize,
        #[arg(long, default_value_t = 40)]
        logs_per_student: usize,
        #[arg(long, default_value_t = 2)]
        latent_dim: usize,
        #[arg(long, default_value_t = 3.0)]
        scale: f64,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Tree JSON file.
    #[arg(long, conflicts_with = "key", required_unless_present = "key")]
    tree: Option<PathBuf>,
    /// Tree as a canonical key, e.g. "Sum(Mul(H_E,H_S))".
    #[arg(long)]
    key: Option<String>,
    /// Run config whose data section selects the dataset.
    #[arg(long, conflicts_with_all = ["logs", "q"])]
    config: Option<PathBuf>,
    #[arg(long, requires = "q")]
    logs: Option<PathBuf>,
    #[arg(long, requires = "logs")]
    q: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Dot,
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let seed = cli.seed;
    let out = cli.out.clone();
    match cli.command {
        Command::ValidateData { logs, q, min_logs } => validate_data(logs, q, min_logs, seed),
        Command::Search { config, resume } => search(&config, resume, seed, cli.threads, out),
        Command::Train(args) => train_one(args, seed, out),
        Command::Export { run, format } => export(&run, format, out),
        Command::Synth {
            students,
            exercises,
            concepts,
            logs_per_student,
            latent_dim,
            scale,
        } => {
            let cfg = SynthConfig {
                n_students: students,
                n_exercises: exercises,
                n_concepts: concepts,
                logs_per_student,
                latent_dim,
                scale,
                seed: seed.unwrap_or(0),
            };
            synth(&cfg, &out.unwrap_or_else(|| PathBuf::from("synthetic")))
        }
    }
}

fn validate_data(logs: PathBuf, q: PathBuf, min_logs: usize, seed: Option<u64>) -> CliResult<()> {
    let mut cfg = DataConfig::from_files(logs, q);
    cfg.min_logs = min_logs;
    cfg.split_seed = seed.unwrap_or(0);
    let loaded = load_data(&cfg)?;
    let info = &loaded.info;
    println!("N={} M={} K={}", info.raw_students, info.n_exercises, info.n_concepts);
    println!(
        "logs={} students_kept={} students_dropped={} (minimum {min_logs} logs)",
        info.raw_logs,
        info.n_students,
        info.raw_students - info.n_students
    );
    println!("split train={} val={} test={}", info.train, info.val, info.test);
    let positives = loaded.raw.logs.iter().filter(|l| l.score == 1).count();
    println!("correct_rate={:.4}", positives as f64 / info.raw_logs.max(1) as f64);
    println!("fingerprint={}", info.fingerprint);
    Ok(())
}

fn search(
    config_path: &Path,
    resume: bool,
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let mut cfg: RunConfig = load_run_config(config_path)?;
    if let Some(s) = seed {
        cfg.search.seed = s;
    }
    if threads.is_some() {
        cfg.search.threads = threads;
    }
    cfg.search.validate().or_kind(Kind::Config)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("run"));

    if let Some(previous) = RunManifest::read(&dir)? {
        if !resume {
            return Err(CliError::new(
                Kind::RunState,
                format!("{} already holds a run; pass --resume to continue it", dir.display()),
            ));
        }
        if previous.config != cfg {
            return Err(CliError::new(
                Kind::RunState,
                format!("{} was started with a different configuration", dir.display()),
            ));
        }
        if previous.status == RunStatus::Finished {
            println!("run in {} is already finished", dir.display());
            return Ok(());
        }
        // Searches are deterministic, so an interrupted run restarts from
        // the beginning and reaches the same state.
        eprintln!("restarting unfinished run in {}", dir.display());
    }
    fs::create_dir_all(&dir).map_err(|e| CliError::new(Kind::RunState, format!("{}: {e}", dir.display())))?;

    let t = Instant::now();
    let loaded = load_data(&cfg.data)?;
    let load_secs = t.elapsed().as_secs_f64();
    let mut manifest = RunManifest::new(cfg.clone(), loaded.info.clone());
    manifest.phases.insert("load_data".into(), load_secs);
    write_atomic(&dir.join(CONFIG_FILE), &to_json(&json!({ "run": cfg, "dataset": loaded.info })))?;
    write_atomic(&dir.join(SPLIT_FILE), &to_json(&loaded.dataset.manifest))?;
    manifest.write(&dir)?;

    let t = Instant::now();
    let total = cfg.search.gen;
    let result = run_search_with(&cfg.search, &loaded.dataset, |rec| {
        eprintln!(
            "generation {}/{total}: best_f1={:.4} front={} archive={}",
            rec.generation, rec.best_f1, rec.front_size, rec.archive_size
        );
    })
    .map_err(|e| match e {
        SearchError::Config(_) => CliError::new(Kind::Config, e),
        SearchError::Train(_) => CliError::new(Kind::Data, e),
        SearchError::Io(_) => CliError::new(Kind::RunState, e),
    })?;
    manifest.phases.insert("search".into(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    write_run_outputs(&dir, &result).or_kind(Kind::RunState)?;
    manifest.phases.insert("write_outputs".into(), t.elapsed().as_secs_f64());
    manifest.status = RunStatus::Finished;
    manifest.write(&dir)?;

    println!("front ({} individuals) written to {}", result.front.len(), dir.display());
    println!("{:>8} {:>8} {:>5} {:>7} {:>5}  key", "f1", "f2", "depth", "breadth", "num_c");
    for ind in &result.front {
        let m = ind.metrics();
        println!(
            "{:>8.4} {:>8.5} {:>5} {:>7} {:>5}  {}",
            ind.f1, ind.f2, m.depth, m.breadth, m.num_c, ind.key
        );
    }
    Ok(())
}

fn read_tree(args: &TrainArgs) -> CliResult<GenomeTree> {
    if let Some(key) = &args.key {
        return parse_key(key).or_kind(Kind::Config);
    }
    let path = args.tree.as_ref().expect("clap requires --tree or --key");
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(Kind::Config, format!("cannot read {}: {e}", path.display())))?;
    GenomeTree::from_json(&text).map_err(|e| CliError::new(Kind::Config, format!("{}: {e}", path.display())))
}

fn train_one(args: TrainArgs, seed: Option<u64>, out: Option<PathBuf>) -> CliResult<()> {
    let tree = read_tree(&args)?;
    let report = infer_shapes(&tree);
    if !report.is_feasible() {
        let nodes = tree.root().preorder();
        let listed: Vec<String> = report
            .infeasible
            .iter()
            .map(|&id| format!("{id} ({})", nodes[id].op().map_or("leaf", |o| o.name())))
            .collect();
        return Err(CliError::new(
            Kind::Infeasible,
            format!("tree is not shape-feasible; infeasible nodes: {}", listed.join(", ")),
        ));
    }
    let mut data_cfg = match (&args.config, &args.logs, &args.q) {
        (Some(c), _, _) => load_run_config(c)?.data,
        (None, Some(l), Some(q)) => DataConfig::from_files(l.clone(), q.clone()),
        _ => return Err(CliError::new(Kind::Config, "train needs --config or --logs and --q")),
    };
    let seed = seed.unwrap_or(0);
    if args.config.is_none() {
        data_cfg.split_seed = seed;
    }
    let loaded = load_data(&data_cfg)?;
    let data = &loaded.dataset;
    let cfg = TrainConfig {
        epochs: args.epochs,
        lr: args.lr,
        batch_size: args.batch_size,
        patience: args.patience,
        seed,
    };
    cfg.validate().or_kind(Kind::Config)?;
    let dims = Dims {
        n_students: data.n_students(),
        n_exercises: data.n_exercises(),
        n_concepts: data.n_concepts(),
    };
    let mut model = CandidateModel::assemble(&tree, dims, seed).map_err(|e| match e {
        TrainError::Infeasible(_) => CliError::new(Kind::Infeasible, e),
        _ => CliError::new(Kind::Config, e),
    })?;
    let outcome = train(&mut model, data, &cfg).or_kind(Kind::Data)?;
    let preds = model.predict(&data.q, &data.test).or_kind(Kind::Data)?;
    let labels: Vec<u8> = data.test.iter().map(|l| l.score).collect();
    let (test_json, test_report) = match evaluate(&preds, &labels) {
        Ok(r) => (json!(r), Some(r)),
        Err(EvalError::AucUndefined { acc, rmse, n }) => (json!({ "acc": acc, "rmse": rmse, "auc": null, "n": n }), None),
        Err(e) => return Err(CliError::new(Kind::Data, e)),
    };

    let dir = out.unwrap_or_else(|| PathBuf::from("train-out"));
    let metrics = CheckpointMetrics {
        best_val_auc: outcome.best_val_auc,
        best_epoch: outcome.best_epoch,
        test: test_report,
    };
    save_checkpoint(&dir, &model, &cfg, metrics).or_kind(Kind::RunState)?;
    write_trace_csv(&dir.join("trace.csv"), &outcome.trace).or_kind(Kind::RunState)?;
    let report = json!({
        "tree_key": canonical_key(&tree),
        "output_mode": model.output_mode(),
        "epochs_run": outcome.trace.len(),
        "best_epoch": outcome.best_epoch,
        "best_val_auc": outcome.best_val_auc,
        "stop": outcome.stop,
        "test": test_json,
        "dataset": loaded.info,
    });
    write_atomic(&dir.join("eval.json"), &to_json(&report))?;
    println!("{}", to_json(&report).trim_end());
    Ok(())
}

fn export(run: &Path, format: ExportFormat, out: Option<PathBuf>) -> CliResult<()> {
    match RunManifest::read(run)? {
        Some(m) if m.status == RunStatus::Finished => {}
        Some(_) => return Err(CliError::new(Kind::RunState, format!("run in {} is not finished", run.display()))),
        None => return Err(CliError::new(Kind::RunState, format!("no run manifest in {}", run.display()))),
    }
    let front = read_front(run).or_kind(Kind::RunState)?;
    let dir = out.unwrap_or_else(|| run.join("export"));
    fs::create_dir_all(&dir).map_err(|e| CliError::new(Kind::RunState, format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    match format {
        ExportFormat::Dot => {
            for rec in &front {
                let path = dir.join(format!("{}.dot", rec.id));
                write_atomic(&path, &to_dot(rec.tree.as_ref().expect("trees are loaded")))?;
                written.push(path);
            }
        }
        ExportFormat::Json => {
            let items: Vec<_> = front.iter().map(|r| json!({ "metrics": r, "tree": r.tree })).collect();
            let path = dir.join("front.json");
            write_atomic(&path, &to_json(&items))?;
            written.push(path);
        }
        ExportFormat::Csv => {
            let mut body = String::from("id,f1,f2,depth,breadth,num_c\n");
            for r in &front {
                body.push_str(&format!("{},{},{},{},{},{}\n", r.id, r.f1, r.f2, r.depth, r.breadth, r.num_c));
            }
            let path = dir.join("front.csv");
            write_atomic(&path, &body)?;
            written.push(path);
        }
    }
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn synth(cfg: &SynthConfig, dir: &Path) -> CliResult<()> {
    if cfg.n_students == 0 || cfg.n_exercises == 0 || cfg.n_concepts == 0 || cfg.latent_dim == 0 {
        return Err(CliError::new(Kind::Config, "synthetic sizes must be positive"));
    }
    let data = generate_synthetic(cfg);
    fs::create_dir_all(dir).map_err(|e| CliError::new(Kind::RunState, format!("{}: {e}", dir.display())))?;
    let logs = dir.join("logs.csv");
    let q = dir.join("q.csv");
    write_logs_csv(&logs, &data.raw).or_kind(Kind::Data)?;
    write_q_csv(&q, &data.raw).or_kind(Kind::Data)?;
    println!("{}", logs.display());
    println!("{}", q.display());
    Ok(())
}
