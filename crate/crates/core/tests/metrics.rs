use std::collections::BTreeMap;

use fedwarm_core::metrics::{
    accuracy, avg_accuracy, read_round_records, weight_divergence, write_round_logs, RoundLog, CSV_HEADER,
};
use fedwarm_core::{Error, ModelWeights};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn w(p: &[f32]) -> ModelWeights {
    ModelWeights { params: p.to_vec(), layer_offsets: vec![0], frozen_prefix: 0 }
}

fn log(round: usize, global: f64, divs: &[(usize, f64)]) -> RoundLog {
    let divergence: BTreeMap<usize, f64> = divs.iter().copied().collect();
    RoundLog {
        round,
        global_accuracy: global,
        client_accuracies: BTreeMap::from([(0, 0.5), (1, 0.25)]),
        avg_accuracy: 0.375,
        selected_clients: divergence.keys().copied().collect(),
        divergence,
        wallclock_ms: 17,
    }
}

#[test]
fn binary_accuracy_examples() {
    assert_eq!(accuracy(&[1, 0], &[1, 0], Some(1)).unwrap(), 1.0);
    assert_eq!(accuracy(&[1, 1, 0, 0], &[1, 0, 1, 0], Some(1)).unwrap(), 0.5);
    assert!(matches!(accuracy(&[], &[], None), Err(Error::Contract(_))));
    assert!(accuracy(&[1], &[1, 2], None).is_err());
}

#[test]
fn accuracy_matches_confusion_tally() {
    let mut g = rand::rngs::StdRng::seed_from_u64(13);
    let preds: Vec<usize> = (0..100).map(|_| g.random_range(0..4)).collect();
    let truths: Vec<usize> = (0..100).map(|_| g.random_range(0..4)).collect();
    let mut confusion = [[0usize; 4]; 4];
    for (&p, &t) in preds.iter().zip(&truths) {
        confusion[t][p] += 1;
    }
    let diagonal: usize = (0..4).map(|c| confusion[c][c]).sum();
    assert_eq!(accuracy(&preds, &truths, None).unwrap(), diagonal as f64 / 100.0);
    for pos in 0..4 {
        let tp = confusion[pos][pos];
        let tn: usize = (0..4)
            .filter(|&t| t != pos)
            .map(|t| (0..4).filter(|&p| p != pos).map(|p| confusion[t][p]).sum::<usize>())
            .sum();
        assert_eq!(accuracy(&preds, &truths, Some(pos)).unwrap(), (tp + tn) as f64 / 100.0);
    }
}

#[test]
fn average_accuracy() {
    assert!((avg_accuracy(&[0.9, 1.0]).unwrap() - 0.95).abs() < 1e-15);
    assert_eq!(avg_accuracy(&[0.37]).unwrap(), 0.37);
    assert!(matches!(avg_accuracy(&[]), Err(Error::Contract(_))));
    let mut g = rand::rngs::StdRng::seed_from_u64(2);
    let values: Vec<f64> = (0..10).map(|_| g.random()).collect();
    let mut total = 0.0;
    for v in &values {
        total += v;
    }
    assert!((avg_accuracy(&values).unwrap() - total / 10.0).abs() < 1e-12);
}

#[test]
fn divergence_examples() {
    assert_eq!(weight_divergence(&w(&[1.5, -2.0]), &w(&[1.5, -2.0])).unwrap(), 0.0);
    assert_eq!(weight_divergence(&w(&[0.0, 0.0]), &w(&[3.0, 4.0])).unwrap(), 5.0);
    assert!(matches!(weight_divergence(&w(&[0.0]), &w(&[0.0, 1.0])), Err(Error::Shape(_))));

    let mut g = rand::rngs::StdRng::seed_from_u64(8);
    let a: Vec<f32> = (0..50).map(|_| g.random_range(-3.0..3.0)).collect();
    let b: Vec<f32> = (0..50).map(|_| g.random_range(-3.0..3.0)).collect();
    let mut sq = 0.0f64;
    for i in 0..50 {
        sq += (a[i] as f64 - b[i] as f64).powi(2);
    }
    assert!((weight_divergence(&w(&a), &w(&b)).unwrap() - sq.sqrt()).abs() < 1e-9);
}

#[test]
fn round_log_divergence_summary() {
    let l = log(1, 0.5, &[(2, 1.0), (5, 3.0)]);
    assert_eq!(l.mean_divergence(), 2.0);
    assert_eq!(l.max_divergence(), 3.0);
    let empty = log(1, 0.5, &[]);
    assert_eq!(empty.mean_divergence(), 0.0);
    assert_eq!(empty.max_divergence(), 0.0);
}

#[test]
fn empty_log_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fedavg.csv");
    write_round_logs(&[], "fedavg", &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    assert!(read_round_records(&path).unwrap().is_empty());
}

#[test]
fn one_round_writes_two_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fedavg.csv");
    write_round_logs(&[log(1, 0.123456789, &[(3, 0.5), (7, 1.25)])], "fedavg", &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1], "1,fedavg,0.123457,0.375000,0.875000,1.250000,3;7,17");
}

#[test]
fn header_mismatch_names_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "round,mode,accuracy\n").unwrap();
    let err = read_round_records(&path).unwrap_err();
    assert!(err.to_string().contains("global_accuracy"), "{err}");

    std::fs::write(&path, format!("{}\n1,fedavg,x,0,0,0,,0\n", CSV_HEADER.join(","))).unwrap();
    let err = read_round_records(&path).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 2") && msg.contains("global_accuracy"), "{msg}");
}

#[test]
fn write_to_missing_directory_reports_path() {
    let path = std::path::Path::new("/nonexistent-dir-for-test/x.csv");
    let err = write_round_logs(&[], "fedavg", path).unwrap_err();
    assert!(err.to_string().contains("/nonexistent-dir-for-test/x.csv"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn divergence_is_a_metric(seed in any::<u64>(), len in 1usize..30) {
        let mut g = rand::rngs::StdRng::seed_from_u64(seed);
        let mut v = || w(&(0..len).map(|_| g.random_range(-5.0f32..5.0)).collect::<Vec<_>>());
        let (a, b, c) = (v(), v(), v());
        let ab = weight_divergence(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, weight_divergence(&b, &a).unwrap());
        let ac = weight_divergence(&a, &c).unwrap();
        let cb = weight_divergence(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
    }

    #[test]
    fn csv_round_trips_to_six_decimals(
        rows in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, prop::collection::vec((0usize..50, 0.0f64..100.0), 0..5)), 0..8),
    ) {
        let logs: Vec<RoundLog> = rows
            .iter()
            .enumerate()
            .map(|(i, (global, avg, divs))| {
                let mut l = log(i + 1, *global, divs);
                l.avg_accuracy = *avg;
                l
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("warmup.csv");
        write_round_logs(&logs, "warmup-scratch", &path).unwrap();
        let back = read_round_records(&path).unwrap();
        prop_assert_eq!(back.len(), logs.len());
        for (r, l) in back.iter().zip(&logs) {
            prop_assert_eq!(r.round, l.round);
            prop_assert_eq!(&r.mode, "warmup-scratch");
            prop_assert!((r.global_accuracy - l.global_accuracy).abs() <= 5e-7);
            prop_assert!((r.avg_accuracy - l.avg_accuracy).abs() <= 5e-7);
            prop_assert!((r.mean_divergence - l.mean_divergence()).abs() <= 5e-7);
            prop_assert!((r.max_divergence - l.max_divergence()).abs() <= 5e-7);
            prop_assert_eq!(&r.selected_clients, &l.selected_clients);
            prop_assert_eq!(r.wallclock_ms, l.wallclock_ms);
        }
    }
}
