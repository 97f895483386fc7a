mod common;

use std::collections::{BTreeMap, BTreeSet};

use cdm_evo::data::{
    batches, filter_students, load_dataset, split_per_student, write_logs_csv, write_q_csv, DataError,
    ResponseDataset, ResponseLog, SplitRatios,
};
use proptest::prelude::*;

fn logs_from_counts(counts: &[usize]) -> Vec<ResponseLog> {
    let mut logs = Vec::new();
    for (s, &c) in counts.iter().enumerate() {
        for e in 0..c {
            logs.push(ResponseLog {
                student: s,
                exercise: e,
                score: ((s + e) % 2) as u8,
            });
        }
    }
    logs
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor() as usize
}

proptest! {
    #[test]
    fn split_partitions_every_student(counts in prop::collection::vec(1usize..60, 1..20), seed in any::<u64>()) {
        let logs = logs_from_counts(&counts);
        let s = split_per_student(&logs, SplitRatios::default(), seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..logs.len()).collect::<Vec<_>>());
        for (student, &n) in counts.iter().enumerate() {
            let count = |idx: &[usize]| idx.iter().filter(|&&i| logs[i].student == student).count();
            let train = round_half_up(0.7 * n as f64).min(n);
            let val = round_half_up(0.8 * n as f64).clamp(train, n) - train;
            prop_assert_eq!(count(&s.train), train);
            prop_assert_eq!(count(&s.val), val);
            prop_assert_eq!(count(&s.test), n - train - val);
        }
    }

    #[test]
    fn filtering_keeps_exactly_the_dense_students(counts in prop::collection::vec(0usize..30, 1..20)) {
        let logs = logs_from_counts(&counts);
        match filter_students(&logs, counts.len(), 15) {
            Ok(f) => {
                let want: Vec<usize> = (0..counts.len()).filter(|&s| counts[s] >= 15).collect();
                prop_assert_eq!(&f.kept, &want);
                prop_assert_eq!(f.logs.len(), want.iter().map(|&s| counts[s]).sum::<usize>());
                prop_assert!(f.logs.iter().all(|l| l.student < want.len()));
            }
            Err(DataError::NoStudents(_)) => prop_assert!(counts.iter().all(|&c| c < 15)),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn batches_cover_positions_once(len in 0usize..500, size in 1usize..200, seed in any::<u64>(), epoch in 0u64..10) {
        let b = batches(len, size, seed, epoch);
        prop_assert!(b.iter().all(|x| !x.is_empty() && x.len() <= size));
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..len).collect::<Vec<_>>());
        prop_assert_eq!(b, batches(len, size, seed, epoch));
    }
}

#[test]
fn split_examples() {
    for (n, want) in [(20, (14, 2, 4)), (15, (11, 1, 3))] {
        let logs = logs_from_counts(&[n]);
        let s = split_per_student(&logs, SplitRatios::default(), 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), want, "{n} logs");
    }
}

#[test]
fn epochs_reshuffle() {
    assert_ne!(batches(100, 10, 1, 0), batches(100, 10, 1, 1));
}

#[test]
fn csv_round_trip_through_disk() {
    let (synth, _) = common::synthetic(1);
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs.csv");
    let q = dir.path().join("q.csv");
    write_logs_csv(&logs, &synth.raw).unwrap();
    write_q_csv(&q, &synth.raw).unwrap();
    let back = load_dataset(&logs, &q).unwrap();
    assert_eq!(back.q, synth.raw.q);
    assert_eq!(back.logs.len(), synth.raw.logs.len());
    let by_id = |raw: &cdm_evo::data::RawData| -> BTreeMap<(String, String), u8> {
        raw.logs
            .iter()
            .map(|l| ((raw.student_ids[l.student].clone(), raw.exercise_ids[l.exercise].clone()), l.score))
            .collect()
    };
    assert_eq!(by_id(&back), by_id(&synth.raw));
}

#[test]
fn sparse_q_matrix_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs.csv");
    let q = dir.path().join("q.csv");
    let mut body = String::from("student_id,exercise_id,score\n");
    for s in 0..3 {
        for e in 0..2 {
            body.push_str(&format!("u{s},x{e},{}\n", (s + e) % 2));
        }
    }
    std::fs::write(&logs, body).unwrap();
    std::fs::write(&q, "exercise_id,concept_id\nx0,10\nx0,2\nx1,2\n").unwrap();
    let raw = load_dataset(&logs, &q).unwrap();
    assert_eq!(raw.concept_ids, vec!["2", "10"]);
    assert_eq!(raw.q.cols(), 2);
    let ex = |id: &str| raw.exercise_ids.iter().position(|x| x == id).unwrap();
    assert_eq!(raw.q.row(ex("x0")), &[1, 1]);
    assert_eq!(raw.q.row(ex("x1")), &[1, 0]);
}

#[test]
fn malformed_inputs_report_lines() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs.csv");
    let q = dir.path().join("q.csv");
    std::fs::write(&q, "exercise_id,c0\nx0,1\n").unwrap();
    std::fs::write(&logs, "student_id,exercise_id,score\nu0,x0,1\nu0,x0,0.5\n").unwrap();
    match load_dataset(&logs, &q) {
        Err(DataError::Score { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    std::fs::write(&logs, "student_id,exercise_id,score\nu0,x9,1\n").unwrap();
    assert!(matches!(load_dataset(&logs, &q), Err(DataError::UnknownExercise { line: 2, .. })));
    std::fs::write(&logs, "student,exercise,score\nu0,x0,1\n").unwrap();
    assert!(load_dataset(&logs, &q).is_err());
    std::fs::write(&q, "exercise_id,c0\nx0,0\n").unwrap();
    std::fs::write(&logs, "student_id,exercise_id,score\nu0,x0,1\n").unwrap();
    assert!(matches!(load_dataset(&logs, &q), Err(DataError::EmptyQRow { .. })));
}

#[test]
fn dataset_build_is_reproducible() {
    let (synth, data) = common::synthetic(4);
    let again = ResponseDataset::build(&synth.raw, 15, SplitRatios::default(), 4).unwrap();
    assert_eq!(data.train, again.train);
    assert_eq!(data.test, again.test);
    let other = ResponseDataset::build(&synth.raw, 15, SplitRatios::default(), 5).unwrap();
    assert_ne!(data.train, other.train);
    let students: BTreeSet<usize> = data.val.iter().map(|l| l.student).collect();
    assert_eq!(students.len(), data.n_students());
}
