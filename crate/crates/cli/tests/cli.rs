use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cdm_evo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdm-evo"))
        .args(args)
        .env_remove("CDM_EVO_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Default-sized synthetic CSVs in `dir`.
fn synth_files(dir: &Path) -> (PathBuf, PathBuf) {
    let o = cdm_evo(&["synth", "--seed", "7", "--out", p(dir)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    (dir.join("logs.csv"), dir.join("q.csv"))
}

#[test]
fn validate_data_reports_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let (logs, q) = synth_files(tmp.path());
    let o = cdm_evo(&["validate-data", "--logs", p(&logs), "--q", p(&q)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("N=200 M=100 K=8"), "{out}");
    assert!(out.contains("split train=5600 val=800 test=1600"), "{out}");
}

#[test]
fn validate_data_rejects_bad_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let (logs, q) = synth_files(tmp.path());
    let mut text = fs::read_to_string(&logs).unwrap();
    text.push_str("s0,e0,2\n");
    let lines = text.lines().count();
    fs::write(&logs, text).unwrap();
    let o = cdm_evo(&["validate-data", "--logs", p(&logs), "--q", p(&q)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains(&format!("line {lines}")), "{}", stderr(&o));

    let o = cdm_evo(&["validate-data", "--logs", p(&logs), "--q", p(&tmp.path().join("missing.csv"))]);
    assert_eq!(code(&o), 1);
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const MINI: &str = r#"
[data.synthetic]
n_students = 40
n_exercises = 30
n_concepts = 4
logs_per_student = 20
seed = 3

[search]
pop = 16
gen = 2
seed = 5

[search.train]
epochs = 2
"#;

fn front_files(run: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(run.join("front"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn search_resume_and_export() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mini.toml", MINI);
    let run = tmp.path().join("run");
    let o = cdm_evo(&["search", "--config", p(&cfg), "--out", p(&run), "--threads", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let history = fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 4, "{history}");
    assert!(history.starts_with("generation,best_f1,front_size,archive_size\n"));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "finished");
    assert_eq!(manifest["dataset"]["fingerprint"].as_str().unwrap().len(), 64);
    assert!(manifest["phases"]["search"].as_f64().unwrap() >= 0.0);
    assert!(run.join("config.json").exists());
    assert!(run.join("archive.jsonl").exists());

    // Same seed, fresh directory, different thread count: identical front.
    let again = tmp.path().join("again");
    let o = cdm_evo(&["search", "--config", p(&cfg), "--out", p(&again), "--threads", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(front_files(&run), front_files(&again));

    // Existing run: refused without --resume, no-op with it.
    let before = fs::read(run.join("run.json")).unwrap();
    let o = cdm_evo(&["search", "--config", p(&cfg), "--out", p(&run), "--threads", "1"]);
    assert_eq!(code(&o), 4);
    let o = cdm_evo(&["search", "--config", p(&cfg), "--out", p(&run), "--threads", "1", "--resume"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("already finished"));
    assert_eq!(fs::read(run.join("run.json")).unwrap(), before);
    let o = cdm_evo(&["search", "--config", p(&cfg), "--out", p(&run), "--seed", "9", "--resume"]);
    assert_eq!(code(&o), 4);

    // Exports.
    let n_front = front_files(&run).len() / 3;
    let out = tmp.path().join("export");
    let o = cdm_evo(&["export", "--run", p(&run), "--format", "csv", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("front.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("id,f1,f2,depth,breadth,num_c"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), n_front);
    for row in rows {
        let v: Vec<f64> = row.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        let f2 = 1.0 - (v[2] - 1.0) / 10.0 + v[3] / 200.0 + 0.001 - v[4] / 20000.0;
        assert!((f2 - v[1]).abs() < 1e-12, "{row}");
    }
    let o = cdm_evo(&["export", "--run", p(&run), "--format", "dot", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let dots: Vec<PathBuf> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "dot"))
        .collect();
    assert_eq!(dots.len(), n_front);
    for d in dots {
        let text = fs::read_to_string(&d).unwrap();
        assert!(text.starts_with("digraph ") && text.trim_end().ends_with('}'));
        let opens = text.matches('[').count();
        assert_eq!(opens, text.matches(']').count());
        assert_eq!(text.matches("->").count() + 1, opens);
    }
    let o = cdm_evo(&["export", "--run", p(&run), "--format", "json", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let json: Value = serde_json::from_str(&fs::read_to_string(out.join("front.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), n_front);

    // An unfinished run cannot be exported.
    let text = fs::read_to_string(run.join("run.json")).unwrap().replace("\"finished\"", "\"running\"");
    fs::write(run.join("run.json"), text).unwrap();
    let o = cdm_evo(&["export", "--run", p(&run), "--format", "csv"]);
    assert_eq!(code(&o), 4);
    let o = cdm_evo(&["export", "--run", p(tmp.path()), "--format", "csv"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = [
        ("unknown.toml", "[data.synthetic]\nseed = 1\n[search]\npopulation = 4\n"),
        ("odd.toml", "[data.synthetic]\nseed = 1\n[search]\npop = 7\n"),
        ("nodata.json", "{\"search\": {\"pop\": 4}}"),
        ("both.json", "{\"data\": {\"logs\": \"a\", \"q\": \"b\", \"synthetic\": {}}}"),
        ("syntax.json", "{"),
    ];
    for (name, body) in bad {
        let cfg = write_config(tmp.path(), name, body);
        let o = cdm_evo(&["search", "--config", p(&cfg), "--out", p(&tmp.path().join(name).with_extension("run"))]);
        assert_eq!(code(&o), 2, "{name}: {}", stderr(&o));
    }
    let o = cdm_evo(&["search", "--config", p(&tmp.path().join("absent.toml"))]);
    assert_eq!(code(&o), 2);
}

fn train_json(args: &[&str]) -> Value {
    let o = cdm_evo(args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    serde_json::from_str(&stdout(&o)).unwrap()
}

#[test]
fn train_reports_test_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let (logs, q) = synth_files(tmp.path());
    let mf_dir = tmp.path().join("mf");
    let mf = train_json(&[
        "train", "--key", "Sum(Mul(H_E,H_S))", "--logs", p(&logs), "--q", p(&q), "--epochs", "30", "--out", p(&mf_dir),
    ]);
    let mf_auc = mf["test"]["auc"].as_f64().unwrap();
    assert!(mf_auc >= 0.85, "{mf}");
    assert!(mf_dir.join("model.json").exists() && mf_dir.join("params.bin").exists());
    assert_eq!(fs::read_to_string(mf_dir.join("trace.csv")).unwrap().lines().next(), Some("epoch,train_loss,val_auc"));
    let eval: Value = serde_json::from_str(&fs::read_to_string(mf_dir.join("eval.json")).unwrap()).unwrap();
    assert_eq!(eval, mf);

    let tree = tmp.path().join("student_only.json");
    fs::write(&tree, r#"{"op": "Sigmoid", "children": [{"op": "Sum", "children": [{"leaf": "H_S"}]}]}"#).unwrap();
    let s = train_json(&[
        "train", "--tree", p(&tree), "--logs", p(&logs), "--q", p(&q), "--epochs", "30", "--out",
        p(&tmp.path().join("s")),
    ]);
    assert!(mf_auc > s["test"]["auc"].as_f64().unwrap(), "{s}");

    let z = train_json(&[
        "train", "--key", "Sum(Mul(H_E,H_S))", "--logs", p(&logs), "--q", p(&q), "--epochs", "0", "--out",
        p(&tmp.path().join("z")),
    ]);
    let z_auc = z["test"]["auc"].as_f64().unwrap();
    assert!((z_auc - 0.5).abs() <= 0.05, "{z}");
    assert_eq!(z["epochs_run"], 0);
}

#[test]
fn train_rejects_infeasible_trees() {
    let tmp = tempfile::tempdir().unwrap();
    let (logs, q) = synth_files(tmp.path());
    let o = cdm_evo(&["train", "--key", "Sum(Sum(H_S))", "--logs", p(&logs), "--q", p(&q), "--out", p(tmp.path())]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("0 (Sum)"), "{}", stderr(&o));
    let o = cdm_evo(&["train", "--key", "Bogus(H_S)", "--logs", p(&logs), "--q", p(&q)]);
    assert_eq!(code(&o), 2);
}
