//! Statistical causality analysis on daily series: Granger tests between
//! textual factors and demand, and double machine learning effect
//! estimation with cross-fitting.

mod dml;
mod granger;

use thiserror::Error;

use crate::data::DataError;
use crate::gbdt::GbdtError;

pub use dml::{causal_profile, dml_effect, DmlResult};
pub use granger::{granger_test, Direction, DirectionStat, GrangerResult, ADF_CRIT_5PCT};

#[derive(Debug, Error)]
pub enum CausalityError {
    #[error("need at least {needed} aligned days, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series {0} has zero variance")]
    ConstantSeries(String),
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("treatment is fully determined by the covariates; no residual variation to identify an effect")]
    DegenerateTreatment,
    #[error("feature {0} not present in the panel")]
    UnknownFeature(String),
    #[error("region {0} not present in the panel")]
    UnknownRegion(String),
    #[error("singular regression in lag model (collinear lags)")]
    SingularRegression,
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
    #[error(transparent)]
    Data(#[from] DataError),
}
