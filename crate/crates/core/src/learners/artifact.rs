use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Model;
use crate::dataprep::ImputationModel;

pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("artifact io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupted artifact: {0}")]
    Corrupt(String),
    #[error("unsupported artifact format version {found} (expected {expected})")]
    Version { found: u64, expected: u32 },
}

/// A fitted learner with everything inference needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub seed: u64,
    pub config_hash: String,
    /// Names of the registry slots the model consumes, in model column order.
    pub feature_names: Vec<String>,
    pub feature_indices: Vec<usize>,
    pub imputation: Option<ImputationModel>,
    pub model: Model,
}

/// Serializes any versioned artifact to pretty JSON.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, ArtifactError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| ArtifactError::Corrupt(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parses a JSON artifact, checking `format_version` before the full decode.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, ArtifactError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ArtifactError::Corrupt(e.to_string()))?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| ArtifactError::Corrupt("missing format_version".into()))?;
    if found != u64::from(ARTIFACT_FORMAT_VERSION) {
        return Err(ArtifactError::Version { found, expected: ARTIFACT_FORMAT_VERSION });
    }
    serde_json::from_value(value).map_err(|e| ArtifactError::Corrupt(e.to_string()))
}

pub fn save_model<T: Serialize>(artifact: &T, path: &Path) -> Result<(), ArtifactError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, to_json(artifact)?)?;
    Ok(())
}

pub fn load_model<T: DeserializeOwned>(path: &Path) -> Result<T, ArtifactError> {
    from_json(&fs::read_to_string(path)?)
}
