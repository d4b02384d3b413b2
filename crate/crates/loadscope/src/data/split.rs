use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DataError, DesignMatrix};

/// Inclusive calendar interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDateRange")]
pub struct DateRange {
    start: NaiveDate,
    end: NaiveDate,
}

#[derive(Deserialize)]
struct RawDateRange {
    start: NaiveDate,
    end: NaiveDate,
}

impl TryFrom<RawDateRange> for DateRange {
    type Error = DataError;

    fn try_from(raw: RawDateRange) -> Result<Self, DataError> {
        DateRange::new(raw.start, raw.end)
    }
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, DataError> {
        if start > end {
            return Err(DataError::InvalidSplit(format!("range start {start} after end {end}")));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn num_days(&self) -> i64 {
        (self.end - self.start).num_days() + 1
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let (start, end) = (self.start, self.end);
        std::iter::successors(Some(start), move |d| d.succ_opt()).take_while(move |d| *d <= end)
    }
}

/// Train/validation/test intervals: disjoint and strictly ordered in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSplitSpec")]
pub struct SplitSpec {
    train: DateRange,
    val: DateRange,
    test: DateRange,
}

#[derive(Deserialize)]
struct RawSplitSpec {
    train: DateRange,
    val: DateRange,
    test: DateRange,
}

impl TryFrom<RawSplitSpec> for SplitSpec {
    type Error = DataError;

    fn try_from(raw: RawSplitSpec) -> Result<Self, DataError> {
        SplitSpec::new(raw.train, raw.val, raw.test)
    }
}

impl SplitSpec {
    pub fn new(train: DateRange, val: DateRange, test: DateRange) -> Result<Self, DataError> {
        if train.end >= val.start {
            return Err(DataError::InvalidSplit(format!(
                "train ends {} but validation starts {}",
                train.end, val.start
            )));
        }
        if val.end >= test.start {
            return Err(DataError::InvalidSplit(format!(
                "validation ends {} but test starts {}",
                val.end, test.start
            )));
        }
        Ok(Self { train, val, test })
    }

    pub fn train(&self) -> DateRange {
        self.train
    }

    pub fn val(&self) -> DateRange {
        self.val
    }

    pub fn test(&self) -> DateRange {
        self.test
    }

    /// First day of train through last day of test.
    pub fn full_range(&self) -> DateRange {
        DateRange { start: self.train.start, end: self.test.end }
    }
}

/// Result of [`split_by_dates`]: the three partitions plus how many input
/// rows fell outside every range.
#[derive(Debug, Clone)]
pub struct SplitParts {
    pub train: DesignMatrix,
    pub val: DesignMatrix,
    pub test: DesignMatrix,
    pub dropped: usize,
}

/// Partition rows by issue-date membership in the three ranges.
///
/// Rows outside all ranges are dropped and counted. A range that captures no
/// rows is an error: downstream fitting and evaluation both need data.
pub fn split_by_dates(matrix: &DesignMatrix, spec: &SplitSpec) -> Result<SplitParts, DataError> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    let mut dropped = 0usize;
    for (i, &d) in matrix.issue_dates().iter().enumerate() {
        if spec.train.contains(d) {
            train.push(i);
        } else if spec.val.contains(d) {
            val.push(i);
        } else if spec.test.contains(d) {
            test.push(i);
        } else {
            dropped += 1;
        }
    }
    for (which, rows) in [("train", &train), ("val", &val), ("test", &test)] {
        if rows.is_empty() {
            return Err(DataError::EmptyPartition { which });
        }
    }
    Ok(SplitParts {
        train: matrix.select_rows(&train)?,
        val: matrix.select_rows(&val)?,
        test: matrix.select_rows(&test)?,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Table;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn range(a: &str, b: &str) -> DateRange {
        DateRange::new(d(a), d(b)).unwrap()
    }

    /// One row per day over [from, to], single feature = day index.
    fn daily_matrix(from: &str, to: &str) -> DesignMatrix {
        let dates: Vec<NaiveDate> = range(from, to).days().collect();
        let col: Vec<f64> = (0..dates.len()).map(|i| i as f64).collect();
        let features = Table::new(vec!["x".into()], vec![col]).unwrap();
        let targets = vec![[1.0; 24]; dates.len()];
        DesignMatrix::new("r", 1, dates.clone(), features, targets, dates.clone(), d(from))
            .unwrap()
    }

    #[test]
    fn ranges_must_be_ordered() {
        let train = range("2020-06-01", "2022-11-30");
        let val = range("2022-11-30", "2022-12-31");
        let test = range("2023-01-01", "2023-05-31");
        assert!(matches!(SplitSpec::new(train, val, test), Err(DataError::InvalidSplit(_))));
    }

    #[test]
    fn partition_counts_match_calendar() {
        let spec = SplitSpec::new(
            range("2023-01-01", "2023-01-31"),
            range("2023-02-01", "2023-02-10"),
            range("2023-02-11", "2023-02-28"),
        )
        .unwrap();
        // Matrix starts 5 days early and ends 3 days late: 8 dropped rows.
        let m = daily_matrix("2022-12-27", "2023-03-03");
        let parts = split_by_dates(&m, &spec).unwrap();
        assert_eq!(parts.train.n_rows(), 31);
        assert_eq!(parts.val.n_rows(), 10);
        assert_eq!(parts.test.n_rows(), 18);
        assert_eq!(parts.dropped, 5 + 3);
        let total = parts.train.n_rows() + parts.val.n_rows() + parts.test.n_rows() + parts.dropped;
        assert_eq!(total, m.n_rows());
    }

    #[test]
    fn empty_partition_is_an_error() {
        let spec = SplitSpec::new(
            range("2023-01-01", "2023-01-10"),
            range("2023-06-01", "2023-06-10"),
            range("2023-07-01", "2023-07-10"),
        )
        .unwrap();
        let m = daily_matrix("2023-01-01", "2023-01-20");
        let err = split_by_dates(&m, &spec).unwrap_err();
        assert!(matches!(err, DataError::EmptyPartition { which: "val" }));
    }

    #[test]
    fn date_range_day_iteration() {
        let r = range("2023-02-27", "2023-03-02");
        let days: Vec<NaiveDate> = r.days().collect();
        assert_eq!(days.len(), 4);
        assert_eq!(r.num_days(), 4);
        assert_eq!(days[2], d("2023-03-01"));
    }

    #[test]
    fn date_range_parses_from_json_strings() {
        let r: DateRange =
            serde_json::from_str(r#"{"start":"2020-06-01","end":"2022-11-30"}"#).unwrap();
        assert_eq!(r.num_days(), 913);
        assert!(serde_json::from_str::<DateRange>(r#"{"start":"2021-01-01","end":"2020-01-01"}"#)
            .is_err());
    }
}
