//! Year-indexed series with a declared unit, plus the `year,value` CSV dialect
//! used for historical inputs and for every report this crate writes.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Calendar year. No sub-annual resolution exists anywhere in the model.
pub type Year = i32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    MillionGallons,
    BillionGallons,
    ShareFraction,
    Gco2ePerMj,
    Usd,
    UsdPerGallon,
    Jobs,
    TonnesCo2e,
}

impl Unit {
    pub const ALL: [Unit; 8] = [
        Unit::MillionGallons,
        Unit::BillionGallons,
        Unit::ShareFraction,
        Unit::Gco2ePerMj,
        Unit::Usd,
        Unit::UsdPerGallon,
        Unit::Jobs,
        Unit::TonnesCo2e,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Unit::MillionGallons => "million_gallons",
            Unit::BillionGallons => "billion_gallons",
            Unit::ShareFraction => "share_fraction",
            Unit::Gco2ePerMj => "gco2e_per_mj",
            Unit::Usd => "usd",
            Unit::UsdPerGallon => "usd_per_gallon",
            Unit::Jobs => "jobs",
            Unit::TonnesCo2e => "tonnes_co2e",
        }
    }

    /// Checks the per-unit value range. Currency and emissions may be negative
    /// (avoided emissions can be), shares live in [0, 1], everything else is >= 0.
    pub fn check(self, value: f64) -> Result<(), &'static str> {
        if !value.is_finite() {
            return Err("value must be finite");
        }
        match self {
            Unit::ShareFraction if !(0.0..=1.0).contains(&value) => {
                Err("share must lie in [0, 1]")
            }
            Unit::MillionGallons
            | Unit::BillionGallons
            | Unit::Gco2ePerMj
            | Unit::Jobs
            | Unit::UsdPerGallon
                if value < 0.0 =>
            {
                Err("value must be non-negative")
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Unit {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Unit::ALL
            .into_iter()
            .find(|u| u.as_str() == s)
            .ok_or_else(|| SeriesError::UnknownUnit(s.to_string()))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("no data rows in {0}")]
    MissingData(String),
    #[error("malformed header in {path}: expected `year,value`, found `{found}`")]
    BadHeader { path: String, found: String },
    #[error("row {row}: years must be consecutive ascending, got {prev} then {year}")]
    NonConsecutiveYears { row: usize, prev: Year, year: Year },
    #[error("row {row}: `{text}` is not a number")]
    NonNumeric { row: usize, text: String },
    #[error("row {row}: {value} violates {unit} range ({reason})")]
    UnitRange {
        row: usize,
        value: f64,
        unit: Unit,
        reason: &'static str,
    },
    #[error("year {year} outside series span {first}..={last}")]
    YearOutOfRange { year: Year, first: Year, last: Year },
    #[error("unit mismatch: {left} vs {right}")]
    UnitMismatch { left: Unit, right: Unit },
    #[error("span mismatch: {left:?} vs {right:?}")]
    SpanMismatch {
        left: (Year, usize),
        right: (Year, usize),
    },
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("series must contain at least one value")]
    Empty,
    #[error("row {row}: malformed CSV record ({message})")]
    Malformed { row: usize, message: String },
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

/// A run of consecutive annual values in one unit.
///
/// Immutable after construction; every value has been range-checked against
/// the unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnualSeries {
    start_year: Year,
    values: Vec<f64>,
    unit: Unit,
}

impl AnnualSeries {
    pub fn new(start_year: Year, values: Vec<f64>, unit: Unit) -> Result<Self, SeriesError> {
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (row, &value) in values.iter().enumerate() {
            unit.check(value).map_err(|reason| SeriesError::UnitRange {
                row: row + 1,
                value,
                unit,
                reason,
            })?;
        }
        Ok(Self {
            start_year,
            values,
            unit,
        })
    }

    pub fn start_year(&self) -> Year {
        self.start_year
    }

    pub fn end_year(&self) -> Year {
        self.start_year + self.values.len() as Year - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn years(&self) -> impl Iterator<Item = Year> + '_ {
        (0..self.values.len()).map(move |i| self.start_year + i as Year)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Year, f64)> + '_ {
        self.years().zip(self.values.iter().copied())
    }

    /// Stored value for `year`. Never extrapolates.
    pub fn get(&self, year: Year) -> Result<f64, SeriesError> {
        if year < self.start_year || year > self.end_year() {
            return Err(SeriesError::YearOutOfRange {
                year,
                first: self.start_year,
                last: self.end_year(),
            });
        }
        Ok(self.values[(year - self.start_year) as usize])
    }

    /// Converts billion-gallon data to the canonical million-gallon unit.
    /// Million-gallon series are returned unchanged.
    pub fn to_million_gallons(&self) -> Result<Self, SeriesError> {
        match self.unit {
            Unit::MillionGallons => Ok(self.clone()),
            Unit::BillionGallons => Ok(Self {
                start_year: self.start_year,
                values: self.values.iter().map(|v| v * 1000.0).collect(),
                unit: Unit::MillionGallons,
            }),
            other => Err(SeriesError::UnitMismatch {
                left: other,
                right: Unit::MillionGallons,
            }),
        }
    }

    fn zip_with(
        &self,
        other: &Self,
        op: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, SeriesError> {
        if self.unit != other.unit {
            return Err(SeriesError::UnitMismatch {
                left: self.unit,
                right: other.unit,
            });
        }
        if self.start_year != other.start_year || self.len() != other.len() {
            return Err(SeriesError::SpanMismatch {
                left: (self.start_year, self.len()),
                right: (other.start_year, other.len()),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| op(*a, *b))
            .collect();
        Self::new(self.start_year, values, self.unit)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Result<Self, SeriesError> {
        Self::new(
            self.start_year,
            self.values.iter().map(|v| v * factor).collect(),
            self.unit,
        )
    }
}

/// Reads a two-column `year,value` CSV into a series of `expected_unit`.
pub fn load_series(path: impl AsRef<Path>, expected_unit: Unit) -> Result<AnnualSeries, SeriesError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    if !path.exists() {
        return Err(SeriesError::MissingFile(display));
    }
    let text = fs::read_to_string(path).map_err(|e| SeriesError::Io {
        path: display.clone(),
        message: e.to_string(),
    })?;
    parse_series(&text, expected_unit, &display)
}

pub fn parse_series(text: &str, expected_unit: Unit, origin: &str) -> Result<AnnualSeries, SeriesError> {
    let table = parse_table(text, origin)?;
    if table.columns.len() != 1 || table.columns[0].0 != "value" {
        let found = std::iter::once("year".to_string())
            .chain(table.columns.iter().map(|(n, _)| n.clone()))
            .collect::<Vec<_>>()
            .join(",");
        return Err(SeriesError::BadHeader {
            path: origin.to_string(),
            found,
        });
    }
    let (_, values) = table.columns.into_iter().next().expect("one column");
    for (i, &value) in values.iter().enumerate() {
        expected_unit
            .check(value)
            .map_err(|reason| SeriesError::UnitRange {
                row: i + 1,
                value,
                unit: expected_unit,
                reason,
            })?;
    }
    AnnualSeries::new(table.start_year, values, expected_unit)
}

/// Writes `year,value` rows. Values use Rust's shortest round-trip float
/// formatting, so a reload reproduces them bit-for-bit.
pub fn write_series(series: &AnnualSeries) -> String {
    let mut out = String::from("year,value\n");
    for (year, value) in series.iter() {
        out.push_str(&format!("{year},{}\n", format_value(value)));
    }
    out
}

pub(crate) fn format_value(value: f64) -> String {
    // `{}` on f64 is the shortest representation that parses back exactly.
    if value == 0.0 {
        "0".to_string()
    } else {
        format!("{value}")
    }
}

/// Multi-column year-indexed table in the same CSV dialect: a `year` column
/// followed by any number of numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct YearTable {
    pub start_year: Year,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl YearTable {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, |(_, v)| v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Extracts one column as a unit-checked series.
    pub fn series(&self, name: &str, unit: Unit) -> Result<AnnualSeries, SeriesError> {
        let values = self
            .column(name)
            .ok_or_else(|| SeriesError::MissingData(format!("column {name}")))?;
        AnnualSeries::new(self.start_year, values.to_vec(), unit)
    }
}

pub fn read_table(path: impl AsRef<Path>) -> Result<YearTable, SeriesError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    if !path.exists() {
        return Err(SeriesError::MissingFile(display));
    }
    let text = fs::read_to_string(path).map_err(|e| SeriesError::Io {
        path: display.clone(),
        message: e.to_string(),
    })?;
    parse_table(&text, &display)
}

pub fn parse_table(text: &str, origin: &str) -> Result<YearTable, SeriesError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = match reader.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].is_empty()) => h.clone(),
        _ => return Err(SeriesError::MissingData(origin.to_string())),
    };
    if headers.len() < 2 || &headers[0] != "year" {
        return Err(SeriesError::BadHeader {
            path: origin.to_string(),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut columns: Vec<(String, Vec<f64>)> = headers
        .iter()
        .skip(1)
        .map(|h| (h.to_string(), Vec::new()))
        .collect();
    let mut start_year = None;
    let mut prev: Option<Year> = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| SeriesError::Malformed {
            row,
            message: e.to_string(),
        })?;
        let year_text = record.get(0).unwrap_or_default();
        let year: Year = year_text.parse().map_err(|_| SeriesError::NonNumeric {
            row,
            text: year_text.to_string(),
        })?;
        if let Some(p) = prev {
            if year != p + 1 {
                return Err(SeriesError::NonConsecutiveYears { row, prev: p, year });
            }
        } else {
            start_year = Some(year);
        }
        prev = Some(year);
        for (j, (_, values)) in columns.iter_mut().enumerate() {
            let text = record.get(j + 1).unwrap_or_default();
            let value: f64 = text
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| SeriesError::NonNumeric {
                    row,
                    text: text.to_string(),
                })?;
            values.push(value);
        }
    }
    let start_year = start_year.ok_or_else(|| SeriesError::MissingData(origin.to_string()))?;
    Ok(YearTable {
        start_year,
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gasoline() -> AnnualSeries {
        AnnualSeries::new(2010, vec![138.0, 137.2], Unit::BillionGallons).unwrap()
    }

    #[test]
    fn parses_two_rows() {
        let s = parse_series("year,value\n2010,138.0\n2011,137.2\n", Unit::BillionGallons, "t").unwrap();
        assert_eq!(s, gasoline());
        assert_eq!(s.unit(), Unit::BillionGallons);
    }

    #[test]
    fn empty_file_is_missing_data() {
        assert!(matches!(
            parse_series("", Unit::BillionGallons, "t"),
            Err(SeriesError::MissingData(_))
        ));
        assert!(matches!(
            parse_series("year,value\n", Unit::BillionGallons, "t"),
            Err(SeriesError::MissingData(_))
        ));
    }

    #[test]
    fn year_gap_rejected() {
        let err = parse_series("year,value\n2010,1.0\n2012,1.0\n", Unit::Jobs, "t").unwrap_err();
        assert_eq!(
            err,
            SeriesError::NonConsecutiveYears {
                row: 2,
                prev: 2010,
                year: 2012
            }
        );
    }

    #[test]
    fn non_numeric_and_range_errors() {
        assert!(matches!(
            parse_series("year,value\n2010,abc\n", Unit::Jobs, "t"),
            Err(SeriesError::NonNumeric { row: 1, .. })
        ));
        assert!(matches!(
            parse_series("year,value\n2010,1.2\n", Unit::ShareFraction, "t"),
            Err(SeriesError::UnitRange { row: 1, .. })
        ));
        assert!(matches!(
            parse_series("year,value\n2010,1,234\n", Unit::Jobs, "t"),
            Err(SeriesError::Malformed { row: 1, .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_series("/nonexistent/series.csv", Unit::Jobs),
            Err(SeriesError::MissingFile(_))
        ));
    }

    #[test]
    fn get_by_year() {
        let s = gasoline();
        assert_eq!(s.get(2011).unwrap(), 137.2);
        assert_eq!(s.get(2010).unwrap(), 138.0);
        assert!(matches!(s.get(2009), Err(SeriesError::YearOutOfRange { .. })));
        assert!(matches!(s.get(2012), Err(SeriesError::YearOutOfRange { .. })));
    }

    #[test]
    fn billion_to_million() {
        let m = gasoline().to_million_gallons().unwrap();
        assert_eq!(m.unit(), Unit::MillionGallons);
        assert_eq!(m.values(), &[138_000.0, 137_200.0]);
    }

    #[test]
    fn cross_unit_arithmetic_rejected_for_all_pairs() {
        for a in Unit::ALL {
            for b in Unit::ALL {
                let x = AnnualSeries::new(2020, vec![0.5], a).unwrap();
                let y = AnnualSeries::new(2020, vec![0.25], b).unwrap();
                let add = x.try_add(&y);
                let sub = x.try_sub(&y);
                if a == b {
                    assert!(add.is_ok());
                } else {
                    assert!(matches!(add, Err(SeriesError::UnitMismatch { .. })));
                    assert!(matches!(sub, Err(SeriesError::UnitMismatch { .. })));
                }
            }
        }
    }

    #[test]
    fn table_reads_named_columns() {
        let t = parse_table("year,a,b\n2020,1,2\n2021,3,4\n", "t").unwrap();
        assert_eq!(t.start_year, 2020);
        assert_eq!(t.column("b").unwrap(), &[2.0, 4.0]);
        assert_eq!(t.series("a", Unit::Jobs).unwrap().values(), &[1.0, 3.0]);
    }

    proptest! {
        #[test]
        fn write_then_load_round_trips(
            start in 1900i32..2100,
            values in prop::collection::vec(0.0f64..1e9, 1..40),
        ) {
            let s = AnnualSeries::new(start, values, Unit::MillionGallons).unwrap();
            let text = write_series(&s);
            let back = parse_series(&text, Unit::MillionGallons, "t").unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
