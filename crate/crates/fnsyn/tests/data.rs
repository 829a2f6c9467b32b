use std::path::Path;

use fnsyn::data::{load_mnist, split_tasks, NormScope, FEATURES, N_TASKS};
use fnsyn::table::Table;
use proptest::prelude::*;

fn fixture() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mnist64")
}

#[test]
fn fixture_loads_and_normalizes() {
    let (train, test) = load_mnist(&fixture(), NormScope::Global).unwrap();
    assert_eq!((train.len(), test.len()), (64, 64));
    let n = train.len() * FEATURES;
    let xs: Vec<f64> = (0..train.len()).flat_map(|i| (0..FEATURES).map(move |j| (i, j))).map(|(i, j)| train.feature(i, j)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!(mean.abs() < 1e-9, "{mean}");
    assert!((std - 1.0).abs() < 1e-9, "{std}");
}

#[test]
fn tasks_partition_the_fixture() {
    let (train, test) = load_mnist(&fixture(), NormScope::Global).unwrap();
    let tasks = split_tasks(&train, &test);
    assert_eq!(tasks.len(), N_TASKS);
    assert_eq!(tasks.iter().map(|t| t.train.len()).sum::<usize>(), 64);
    assert_eq!(tasks.iter().map(|t| t.test.len()).sum::<usize>(), 64);
    for (k, t) in tasks.iter().enumerate() {
        let want = train.labels.iter().filter(|&&l| l / 2 == k as u8).count();
        assert_eq!(t.train.len(), want);
        assert!(t.train.y.iter().all(|&y| y < 2));
    }
}

#[test]
fn truncated_file_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    for f in std::fs::read_dir(fixture()).unwrap() {
        let f = f.unwrap();
        std::fs::copy(f.path(), dir.path().join(f.file_name())).unwrap();
    }
    let img = dir.path().join("train-images-idx3-ubyte");
    let bytes = std::fs::read(&img).unwrap();
    std::fs::write(&img, &bytes[..bytes.len() - 10]).unwrap();
    let e = load_mnist(dir.path(), NormScope::Global).unwrap_err();
    assert_eq!(e.exit_code(), 1, "{e}");
}

proptest! {
    #[test]
    fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(any::<f64>(), 3), 0..20)) {
        let mut t = Table::new(["a", "b", "c"]).meta("k", "v");
        for r in &rows {
            t.push(r.clone());
        }
        let back = Table::parse(std::str::from_utf8(&t.to_bytes().unwrap()).unwrap()).unwrap();
        prop_assert_eq!(back.rows.len(), rows.len());
        for (a, b) in back.rows.iter().zip(&rows) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
    }
}
