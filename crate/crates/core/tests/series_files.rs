use std::fs;
use std::path::PathBuf;

use approx::assert_relative_eq;
use blendsim::series::{load_series, write_series, SeriesError, Unit};

fn data(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(file)
}

#[test]
fn fixtures_load_with_declared_units() {
    let gas = load_series(data("fixture_us_gasoline_bgal.csv"), Unit::BillionGallons).unwrap();
    assert_eq!(gas.unit(), Unit::BillionGallons);
    assert!(gas.len() >= 10);
    let mgal = gas.to_million_gallons().unwrap();
    assert_relative_eq!(mgal.values()[0], gas.values()[0] * 1000.0, max_relative = 1e-15);
}

#[test]
fn round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let src = load_series(data("fixture_us_gasoline_bgal.csv"), Unit::BillionGallons).unwrap();
    let path = dir.path().join("copy.csv");
    fs::write(&path, write_series(&src)).unwrap();
    assert_eq!(load_series(&path, Unit::BillionGallons).unwrap(), src);
}

#[test]
fn file_errors_are_typed() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    };
    let cases = [
        (write("empty.csv", ""), "missing data"),
        (write("header.csv", "year,value\n"), "missing data"),
        (write("gap.csv", "year,value\n2020,1\n2022,2\n"), "gap"),
        (write("text.csv", "year,value\n2020,abc\n"), "non-numeric"),
        (write("neg.csv", "year,value\n2020,-1\n"), "range"),
    ];
    for (path, what) in &cases {
        let err = load_series(path, Unit::BillionGallons).unwrap_err();
        let ok = match *what {
            "missing data" => matches!(err, SeriesError::MissingData(_)),
            "gap" => matches!(err, SeriesError::NonConsecutiveYears { prev: 2020, year: 2022, .. }),
            "non-numeric" => matches!(err, SeriesError::NonNumeric { .. }),
            _ => matches!(err, SeriesError::UnitRange { .. }),
        };
        assert!(ok, "{what}: {err}");
    }
    assert!(matches!(
        load_series(dir.path().join("absent.csv"), Unit::BillionGallons),
        Err(SeriesError::MissingFile(_))
    ));
}
