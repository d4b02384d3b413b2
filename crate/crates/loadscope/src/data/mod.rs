//! Shared domain types: hourly and daily series, named-column tables,
//! train-based standardization, design matrices, and date-range splitting.
//!
//! All types are immutable after construction and safe to share across
//! parallel workers. Dates are explicit calendar dates; all timestamps UTC.

mod matrix;
mod series;
mod split;
mod standardize;
mod table;

pub use matrix::{DesignMatrix, PointForecastSet, ProbForecastSet, HOURS};
pub use series::{DailyFeatureSeries, HourlyDemandSeries, HourlySeries};
pub use split::{split_by_dates, DateRange, SplitParts, SplitSpec};
pub use standardize::Standardizer;
pub use table::Table;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("column {0} is constant; cannot standardize")]
    ConstantColumn(String),
    #[error("non-finite value in column {column} at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("column mismatch: {0}")]
    ColumnMismatch(String),
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("{which} partition selected no rows")]
    EmptyPartition { which: &'static str },
    #[error("duplicate column name {0}")]
    DuplicateColumn(String),
    #[error("invalid series {name}: {reason}")]
    InvalidSeries { name: String, reason: String },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("row {row}: feature sourced from {source_date} is later than issue day {issue}")]
    LeakageViolation {
        row: usize,
        source_date: chrono::NaiveDate,
        issue: chrono::NaiveDate,
    },
    #[error("sigma must be > 0 (day {day}, hour {hour})")]
    NonPositiveSigma { day: chrono::NaiveDate, hour: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}
