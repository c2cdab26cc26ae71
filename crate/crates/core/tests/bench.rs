use std::time::Instant;

use lamp_core::bench::{iqr, read_rows_csv, run_trial};
use lamp_core::{run_benchmark, BenchModel, BenchRow, BenchSpec, BenchmarkReport, ForestConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn without_timing(rows: &[BenchRow]) -> Vec<BenchRow> {
    rows.iter().cloned().map(|r| BenchRow { fit_seconds: None, ..r }).collect()
}

fn small_spec() -> BenchSpec {
    BenchSpec {
        ns: vec![300],
        hs: vec![1.0, 0.5],
        trials: 3,
        models: vec![BenchModel::Ols, BenchModel::Lamp],
        n_test: 100,
        draws: 20,
        seed: 17,
        ..BenchSpec::default()
    }
}

#[test]
fn smoke_run_is_fast() {
    let spec = BenchSpec { ns: vec![500], trials: 1, models: vec![BenchModel::Ols], ..BenchSpec::default() };
    let t = Instant::now();
    let r = run_benchmark(&spec, None, false).unwrap();
    assert!(t.elapsed().as_secs_f64() < 1.0);
    assert_eq!(r.rows.len(), 1);
    let row = &r.rows[0];
    assert!(row.ok());
    assert!(row.rmse.unwrap() > 0.0 && row.crps.is_some() && row.coverage.is_some());
    assert!(row.terminal_bandwidth.is_none());
    assert_eq!(r.summary[0].completed, 1);
}

#[test]
fn resumed_run_equals_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec();
    let full_path = dir.path().join("full.csv");
    let full = run_benchmark(&spec, Some(&full_path), false).unwrap();

    let part_path = dir.path().join("part.csv");
    run_benchmark(&BenchSpec { trials: 1, ..spec.clone() }, Some(&part_path), false).unwrap();
    let resumed = run_benchmark(&spec, Some(&part_path), true).unwrap();

    assert_eq!(without_timing(&full.rows), without_timing(&resumed.rows));
    assert_eq!(full.rows.len(), 2 * 2 * 3);
    assert_eq!(without_timing(&read_rows_csv(&part_path).unwrap()), without_timing(&resumed.rows));
    assert_eq!(read_rows_csv(&full_path).unwrap(), full.rows);

    // Resuming a finished run recomputes nothing.
    let again = run_benchmark(&spec, Some(&full_path), true).unwrap();
    assert_eq!(again.rows, full.rows);
}

#[test]
fn summaries_ignore_row_order() {
    let report = run_benchmark(&small_spec(), None, false).unwrap();
    let mut rows = report.rows.clone();
    rows.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
    let shuffled = BenchmarkReport::from_rows(rows);
    assert_eq!(shuffled, report);
    let lamp = report.cell(BenchModel::Lamp, 300, 1.0).unwrap();
    assert_eq!(lamp.completed, 3);
    let rmse = report.values(BenchModel::Lamp, 300, 1.0, |r| r.rmse);
    assert_eq!(lamp.rmse, Some(lamp_core::util::median(&rmse)));
}

#[test]
fn trials_are_reproducible_across_thread_counts() {
    let spec = BenchSpec {
        models: BenchModel::ALL.to_vec(),
        forest: ForestConfig { n_trees: 20, ..Default::default() },
        ..small_spec()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_trial(&spec, 300, 1.0, 1))
    };
    let a = run(1);
    assert_eq!(without_timing(&a), without_timing(&run(3)));
    assert!(a.iter().all(BenchRow::ok), "{a:?}");
    assert_ne!(without_timing(&a), without_timing(&run_trial(&spec, 300, 1.0, 2)));
}

#[test]
fn failed_trials_are_recorded_not_fatal() {
    let spec = BenchSpec { ns: vec![8], trials: 2, ..small_spec() };
    let r = run_benchmark(&spec, None, false).unwrap();
    assert!(r.rows.iter().all(|row| !row.ok() && row.status.starts_with("failed")));
    let cell = r.cell(BenchModel::Lamp, 8, 1.0).unwrap();
    assert_eq!((cell.completed, cell.failed), (0, 2));
    assert_eq!(cell.rmse, None);
    assert!(run_benchmark(&BenchSpec { trials: 0, ..small_spec() }, None, false).is_err());
}

#[test]
fn summary_csv_has_one_line_per_cell() {
    let r = run_benchmark(&BenchSpec { trials: 1, ..small_spec() }, None, false).unwrap();
    let mut buf = Vec::new();
    r.write_summary_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.starts_with("model,n,h,completed,failed,rmse"));
}

#[test]
fn iqr_values() {
    assert_eq!(iqr(&[1.0, 2.0, 3.0, 4.0, 5.0]), 2.0);
    assert_eq!(iqr(&[7.0; 4]), 0.0);
}
