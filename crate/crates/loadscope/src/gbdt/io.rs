use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ensemble::Ensemble;
use super::gaussian::GaussianEnsemble;
use super::GbdtError;

/// On-disk model format version; bump on any incompatible layout change.
pub const FORMAT_VERSION: u32 = 1;

/// A saveable model of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelPayload {
    Point(Ensemble),
    Gaussian(GaussianEnsemble),
}

impl ModelPayload {
    pub fn as_point(&self) -> Option<&Ensemble> {
        match self {
            ModelPayload::Point(e) => Some(e),
            _ => None,
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianEnsemble> {
        match self {
            ModelPayload::Gaussian(g) => Some(g),
            _ => None,
        }
    }
}

impl From<Ensemble> for ModelPayload {
    fn from(e: Ensemble) -> Self {
        ModelPayload::Point(e)
    }
}

impl From<GaussianEnsemble> for ModelPayload {
    fn from(g: GaussianEnsemble) -> Self {
        ModelPayload::Gaussian(g)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: ModelPayload,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

/// Write a model as versioned JSON. Floats serialize with shortest
/// round-trip formatting, so load(save(m)) reproduces every split
/// threshold and leaf value bit for bit.
pub fn save_model(path: &Path, model: &ModelPayload) -> Result<(), GbdtError> {
    let file = ModelFile { format_version: FORMAT_VERSION, model: model.clone() };
    let json = serde_json::to_string_pretty(&file).map_err(|e| GbdtError::Serde(e.to_string()))?;
    fs::write(path, json).map_err(|source| GbdtError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load a model saved by [`save_model`], rejecting unknown format versions
/// before attempting to parse the payload.
pub fn load_model(path: &Path) -> Result<ModelPayload, GbdtError> {
    let text = fs::read_to_string(path).map_err(|source| GbdtError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let probe: VersionProbe =
        serde_json::from_str(&text).map_err(|e| GbdtError::Serde(e.to_string()))?;
    if probe.format_version != FORMAT_VERSION {
        return Err(GbdtError::UnsupportedVersion(probe.format_version));
    }
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| GbdtError::Serde(e.to_string()))?;
    Ok(file.model)
}
