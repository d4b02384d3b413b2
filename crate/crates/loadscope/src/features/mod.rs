//! Feature engineering: the per-(region, horizon) design matrix, training
//! -range temperature climatology, and Ward clustering of the wide textual
//! table into a handful of social-factor series.

mod climatology;
mod cluster;
mod design;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;

pub use climatology::Climatology;
pub use cluster::{
    centroid_source_name, cluster_textual_features, extract_centroids, select_k_elbow,
    ClusterResult, Merge,
};
pub use design::build_design_matrix;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("issue day {0}: required inputs not available on or before this day")]
    InsufficientHistory(chrono::NaiveDate),
    #[error("social features enabled but no centroid series supplied")]
    MissingCentroids,
    #[error("no training-range temperature observations for month {month}, hour {hour}")]
    NoObservations { month: u32, hour: u32 },
    #[error("clustering needs at least 3 feature columns, got {0}")]
    TooFewFeatures(usize),
    #[error("elbow selection needs at least 4 merges, got {0}")]
    TooFewMerges(usize),
    #[error("cannot cut {items} items into {k} clusters")]
    BadK { k: usize, items: usize },
    #[error("region {0} not present in the panel")]
    UnknownRegion(String),
    #[error("invalid feature spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// How many social-factor series to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SocialKRaw", into = "SocialKRaw")]
pub enum SocialK {
    /// Pick k at the elbow of the Ward variance profile.
    Auto,
    /// Use exactly this many clusters (must be >= 2).
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SocialKRaw {
    Count(usize),
    Name(String),
}

impl TryFrom<SocialKRaw> for SocialK {
    type Error = String;

    fn try_from(raw: SocialKRaw) -> Result<Self, String> {
        match raw {
            SocialKRaw::Count(k) if k >= 2 => Ok(SocialK::Fixed(k)),
            SocialKRaw::Count(k) => Err(format!("social_k must be >= 2, got {k}")),
            SocialKRaw::Name(s) if s == "auto" => Ok(SocialK::Auto),
            SocialKRaw::Name(s) => Err(format!("social_k must be a count or \"auto\", got {s:?}")),
        }
    }
}

impl From<SocialK> for SocialKRaw {
    fn from(k: SocialK) -> Self {
        match k {
            SocialK::Auto => SocialKRaw::Name("auto".into()),
            SocialK::Fixed(n) => SocialKRaw::Count(n),
        }
    }
}

/// Which optional feature blocks to include and how.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub use_economics: bool,
    pub use_social: bool,
    pub social_k: SocialK,
    /// Trailing window (days) for smoothing social series; 1 = none.
    pub text_smoothing_window: usize,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            use_economics: false,
            use_social: false,
            social_k: SocialK::Auto,
            text_smoothing_window: 1,
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if let SocialK::Fixed(k) = self.social_k {
            if k < 2 {
                return Err(FeatureError::InvalidSpec(format!("social_k must be >= 2, got {k}")));
            }
        }
        if self.text_smoothing_window == 0 {
            return Err(FeatureError::InvalidSpec("text_smoothing_window must be >= 1".into()));
        }
        Ok(())
    }

    /// Short label for the model family this spec produces.
    pub fn family(&self) -> &'static str {
        match (self.use_economics, self.use_social) {
            (false, false) => "gbm",
            (true, false) => "gbm-e",
            (false, true) => "gbm-s",
            (true, true) => "gbm-es",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn social_k_parses_counts_and_auto() {
        let auto: SocialK = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(auto, SocialK::Auto);
        let fixed: SocialK = serde_json::from_str("7").unwrap();
        assert_eq!(fixed, SocialK::Fixed(7));
        assert!(serde_json::from_str::<SocialK>("1").is_err());
        assert!(serde_json::from_str::<SocialK>("\"elbow\"").is_err());
    }

    #[test]
    fn family_labels() {
        let mut spec = FeatureSpec::default();
        assert_eq!(spec.family(), "gbm");
        spec.use_economics = true;
        assert_eq!(spec.family(), "gbm-e");
        spec.use_social = true;
        assert_eq!(spec.family(), "gbm-es");
        spec.use_economics = false;
        assert_eq!(spec.family(), "gbm-s");
    }
}
