use std::fs;

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavefactor_cli::io::{load_matrix, store_matrix};
use wavefactor_cli::CliError;

#[test]
fn random_matrix_round_trips_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = DMatrix::from_fn(5, 7, |_, _| {
        rng.random_range(-1e3..1e3) * 10f64.powi(rng.random_range(-12..12))
    });
    for header in [false, true] {
        let path = dir.path().join(format!("m{header}.csv"));
        store_matrix(&m, &path, header).unwrap();
        let back = load_matrix(&path, header).unwrap();
        assert_eq!(back.shape(), (5, 7));
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn single_cell_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    store_matrix(&DMatrix::from_element(1, 1, 0.1), &path, false).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap().trim(), "0.1");
    assert_eq!(
        load_matrix(&path, false).unwrap(),
        DMatrix::from_element(1, 1, 0.1)
    );
}

#[test]
fn rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("empty.csv", "", "empty input"),
        ("blank.csv", "\n\n", "empty input"),
        ("ragged.csv", "1,2,3\n4,5\n", "ragged"),
        ("text.csv", "1,2\n3,abc\n", "non-numeric"),
        ("nan.csv", "1,NaN\n", "non-finite"),
        ("inf.csv", "inf,1\n", "non-finite"),
    ];
    for (name, body, needle) in cases {
        let path = dir.path().join(name);
        fs::write(&path, body).unwrap();
        let err = load_matrix(&path, false).unwrap_err();
        assert!(matches!(err, CliError::Data { .. }), "{name}: {err:?}");
        assert!(err.to_string().contains(needle), "{name}: {err}");
        assert_eq!(err.exit_code(), 1);
    }
    let missing = load_matrix(&dir.path().join("nope.csv"), false).unwrap_err();
    assert_eq!(missing.exit_code(), 1);
}

#[test]
fn header_row_is_skipped_only_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    fs::write(&path, "a,b\n1,2\n3,4\n").unwrap();
    assert_eq!(
        load_matrix(&path, true).unwrap(),
        DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])
    );
    assert!(load_matrix(&path, false).is_err());
}

#[test]
fn exit_codes_by_failure_kind() {
    let numerical = CliError::Core(wavefactor::Error::StepSizeFailure {
        before: 1.0,
        after: 2.0,
    });
    assert_eq!(numerical.exit_code(), 2);
    assert_eq!(CliError::Core(wavefactor::Error::EmptyMask).exit_code(), 1);
    assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
}
