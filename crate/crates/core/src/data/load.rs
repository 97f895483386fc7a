use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::data::{DataError, QMatrix, RawData, ResponseLog};

fn open(path: &Path) -> Result<csv::Reader<File>, DataError> {
    let file = File::open(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

fn malformed(path: &Path, line: u64, msg: impl Into<String>) -> DataError {
    DataError::Malformed {
        file: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn headers(reader: &mut csv::Reader<File>, path: &Path) -> Result<Vec<String>, DataError> {
    let h = reader
        .headers()
        .map_err(|e| malformed(path, 1, e.to_string()))?;
    Ok(h.iter().map(str::to_string).collect())
}

/// Reads the logs and Q-matrix CSVs and remaps raw ids to dense indices.
///
/// Students are numbered by first appearance in the logs; exercises follow
/// Q-matrix order. The Q-matrix may be dense (`exercise_id,concept_1..`) or
/// sparse pairs (`exercise_id,concept_id`).
pub fn load_dataset(logs_path: &Path, q_path: &Path) -> Result<RawData, DataError> {
    let (q, exercise_ids, concept_ids) = load_q(q_path)?;
    let exercise_index: HashMap<&str, usize> = exercise_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let mut reader = open(logs_path)?;
    let h = headers(&mut reader, logs_path)?;
    if h != ["student_id", "exercise_id", "score"] {
        return Err(malformed(
            logs_path,
            1,
            format!("expected header student_id,exercise_id,score, found {}", h.join(",")),
        ));
    }
    let mut student_index: HashMap<String, usize> = HashMap::new();
    let mut student_ids = Vec::new();
    let mut logs = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(logs_path, line, e.to_string())
        })?;
        let line = record_line(&rec);
        if rec.len() != 3 {
            return Err(malformed(logs_path, line, format!("expected 3 fields, found {}", rec.len())));
        }
        let (student, exercise, score) = (&rec[0], &rec[1], &rec[2]);
        if student.is_empty() || exercise.is_empty() {
            return Err(malformed(logs_path, line, "empty id"));
        }
        let score = match score {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(DataError::Score {
                    file: logs_path.display().to_string(),
                    line,
                    value: other.to_string(),
                })
            }
        };
        let Some(&e) = exercise_index.get(exercise) else {
            return Err(DataError::UnknownExercise {
                file: logs_path.display().to_string(),
                line,
                exercise: exercise.to_string(),
            });
        };
        let s = *student_index.entry(student.to_string()).or_insert_with(|| {
            student_ids.push(student.to_string());
            student_ids.len() - 1
        });
        logs.push(ResponseLog {
            student: s,
            exercise: e,
            score,
        });
    }
    Ok(RawData {
        logs,
        q,
        student_ids,
        exercise_ids,
        concept_ids,
    })
}

fn load_q(path: &Path) -> Result<(QMatrix, Vec<String>, Vec<String>), DataError> {
    let mut reader = open(path)?;
    let h = headers(&mut reader, path)?;
    if h.first().map(String::as_str) != Some("exercise_id") || h.len() < 2 {
        return Err(malformed(path, 1, "expected header exercise_id,<concepts...>"));
    }
    let sparse = h.len() == 2 && h[1] == "concept_id";
    let mut exercise_ids: Vec<String> = Vec::new();
    let mut exercise_index: HashMap<String, usize> = HashMap::new();
    let mut first_line: Vec<u64> = Vec::new();

    let (rows_data, concept_ids) = if sparse {
        let mut pairs: Vec<(usize, String)> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| malformed(path, e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
            let line = record_line(&rec);
            if rec.len() != 2 || rec[0].is_empty() || rec[1].is_empty() {
                return Err(malformed(path, line, "expected exercise_id,concept_id"));
            }
            let e = *exercise_index.entry(rec[0].to_string()).or_insert_with(|| {
                exercise_ids.push(rec[0].to_string());
                first_line.push(line);
                exercise_ids.len() - 1
            });
            pairs.push((e, rec[1].to_string()));
        }
        let mut concepts: Vec<String> = pairs.iter().map(|(_, c)| c.clone()).collect();
        concepts.sort_by(|a, b| match (a.parse::<i64>(), b.parse::<i64>()) {
            (Ok(x), Ok(y)) => x.cmp(&y),
            _ => a.cmp(b),
        });
        concepts.dedup();
        let concept_index: HashMap<&str, usize> =
            concepts.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let k = concepts.len();
        let mut data = vec![0u8; exercise_ids.len() * k];
        for (e, c) in &pairs {
            data[e * k + concept_index[c.as_str()]] = 1;
        }
        (data, concepts)
    } else {
        let mut data = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| malformed(path, e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
            let line = record_line(&rec);
            if rec.len() != h.len() {
                return Err(malformed(path, line, format!("expected {} fields, found {}", h.len(), rec.len())));
            }
            let id = rec[0].to_string();
            if id.is_empty() {
                return Err(malformed(path, line, "empty exercise id"));
            }
            if exercise_index.contains_key(&id) {
                return Err(malformed(path, line, format!("duplicate exercise '{id}'")));
            }
            exercise_index.insert(id.clone(), exercise_ids.len());
            exercise_ids.push(id);
            first_line.push(line);
            for cell in rec.iter().skip(1) {
                match cell {
                    "0" => data.push(0),
                    "1" => data.push(1),
                    other => return Err(malformed(path, line, format!("Q-matrix cell '{other}' is not 0 or 1"))),
                }
            }
        }
        (data, h[1..].to_vec())
    };

    let k = concept_ids.len();
    for (row, id) in exercise_ids.iter().enumerate() {
        if rows_data[row * k..(row + 1) * k].iter().all(|&v| v == 0) {
            return Err(DataError::EmptyQRow {
                row,
                exercise: id.clone(),
            });
        }
    }
    let q = QMatrix::new(exercise_ids.len(), k, rows_data)?;
    Ok((q, exercise_ids, concept_ids))
}

fn create(path: &Path) -> Result<File, DataError> {
    File::create(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> DataError + '_ {
    move |e| DataError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Writes logs in the `student_id,exercise_id,score` format.
pub fn write_logs_csv(path: &Path, raw: &RawData) -> Result<(), DataError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    let err = io_err(path);
    writeln!(out, "student_id,exercise_id,score").map_err(&err)?;
    for log in &raw.logs {
        writeln!(
            out,
            "{},{},{}",
            raw.student_ids[log.student], raw.exercise_ids[log.exercise], log.score
        )
        .map_err(&err)?;
    }
    out.flush().map_err(&err)
}

/// Writes a dense Q-matrix with `exercise_id,<concept ids>` header.
pub fn write_q_csv(path: &Path, raw: &RawData) -> Result<(), DataError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    let err = io_err(path);
    writeln!(out, "exercise_id,{}", raw.concept_ids.join(",")).map_err(&err)?;
    for (e, id) in raw.exercise_ids.iter().enumerate() {
        let cells: Vec<String> = raw.q.row(e).iter().map(u8::to_string).collect();
        writeln!(out, "{id},{}", cells.join(",")).map_err(&err)?;
    }
    out.flush().map_err(&err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn dense_ids_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let q = write(dir.path(), "q.csv", "exercise_id,concept_1,concept_2\n10,1,0\n20,0,1\n");
        let logs = write(
            dir.path(),
            "logs.csv",
            "student_id,exercise_id,score\nalice,10,1\nbob,20,0\nalice,10,1\n",
        );
        let raw = load_dataset(&logs, &q).unwrap();
        assert_eq!(raw.student_ids, vec!["alice", "bob"]);
        assert_eq!(raw.logs.len(), 3);
        assert_eq!(raw.logs[0], raw.logs[2]);
        assert_eq!(raw.logs[1].student, 1);
        assert_eq!(raw.q.cols(), 2);
        assert_eq!(raw.q.row(1), &[0, 1]);
    }

    #[test]
    fn sparse_q_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let q = write(dir.path(), "q.csv", "exercise_id,concept_id\n1,10\n1,2\n2,2\n");
        let logs = write(dir.path(), "logs.csv", "student_id,exercise_id,score\ns,2,1\n");
        let raw = load_dataset(&logs, &q).unwrap();
        assert_eq!(raw.concept_ids, vec!["2", "10"]);
        assert_eq!(raw.q.row(0), &[1, 1]);
        assert_eq!(raw.q.row(1), &[1, 0]);
        assert_eq!(raw.logs[0].exercise, 1);
    }

    #[test]
    fn rejects_bad_score_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let q = write(dir.path(), "q.csv", "exercise_id,c1\n1,1\n");
        let logs = write(dir.path(), "logs.csv", "student_id,exercise_id,score\ns,1,1\ns,1,2\n");
        match load_dataset(&logs, &q) {
            Err(DataError::Score { line, value, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(value, "2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_exercise_and_empty_q_row() {
        let dir = tempfile::tempdir().unwrap();
        let q = write(dir.path(), "q.csv", "exercise_id,c1\n1,1\n");
        let logs = write(dir.path(), "logs.csv", "student_id,exercise_id,score\ns,9,1\n");
        assert!(matches!(
            load_dataset(&logs, &q),
            Err(DataError::UnknownExercise { line: 2, .. })
        ));
        let q0 = write(dir.path(), "q0.csv", "exercise_id,c1,c2\n1,1,0\n2,0,0\n");
        assert!(matches!(
            load_dataset(&logs, &q0),
            Err(DataError::EmptyQRow { row: 1, .. })
        ));
    }

    #[test]
    fn missing_file_and_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let q = write(dir.path(), "q.csv", "exercise_id,c1\n1,1\n");
        let missing = dir.path().join("nope.csv");
        assert!(matches!(load_dataset(&missing, &q), Err(DataError::Io { .. })));
        assert!(matches!(load_dataset(&q, &missing), Err(DataError::Io { .. })));
        let logs = write(dir.path(), "logs.csv", "student_id,exercise_id,score\ns,1\n");
        assert!(matches!(
            load_dataset(&logs, &q),
            Err(DataError::Malformed { line: 2, .. })
        ));
        let qbad = write(dir.path(), "qb.csv", "exercise_id,c1\n1,x\n");
        assert!(matches!(load_dataset(&logs, &qbad), Err(DataError::Malformed { .. })));
    }

    #[test]
    fn written_files_load_back() {
        let dir = tempfile::tempdir().unwrap();
        let q = write(dir.path(), "q.csv", "exercise_id,a,b\nx,1,1\ny,0,1\n");
        let logs = write(dir.path(), "logs.csv", "student_id,exercise_id,score\nu,y,0\nv,x,1\n");
        let raw = load_dataset(&logs, &q).unwrap();
        let logs2 = dir.path().join("logs2.csv");
        let q2 = dir.path().join("q2.csv");
        write_logs_csv(&logs2, &raw).unwrap();
        write_q_csv(&q2, &raw).unwrap();
        let back = load_dataset(&logs2, &q2).unwrap();
        assert_eq!(back.logs, raw.logs);
        assert_eq!(back.q, raw.q);
        assert_eq!(fs::read_to_string(&logs2).unwrap(), fs::read_to_string(&logs).unwrap());
    }
}
