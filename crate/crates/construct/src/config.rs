//! Config-file handling. Settings resolve in precedence order: built-in
//! defaults, then the TOML config file, then command-line flags.

use std::path::Path;

use serde::Deserialize;

use crate::engine::ScoringConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
}

/// The TOML config file shape. Every key is optional; unset keys keep their
/// defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub base_url: Option<String>,
    pub deadline_ms: Option<u64>,
    pub adaptive_timeout: Option<bool>,
    pub adaptive_floor_ms: Option<u64>,
    pub field_threshold: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub temperature: Option<f64>,
    pub harmonic_doc_from_likert: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    /// Applies the file's settings on top of `config`.
    pub fn apply(&self, config: &mut ScoringConfig) {
        if let Some(model) = &self.model {
            config.model = model.clone();
        }
        if let Some(v) = self.deadline_ms {
            config.deadline_ms = v;
        }
        if let Some(v) = self.adaptive_timeout {
            config.adaptive_timeout = v;
        }
        if let Some(v) = self.adaptive_floor_ms {
            config.adaptive_floor_ms = v;
        }
        if let Some(v) = self.field_threshold {
            config.field_threshold = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.beta {
            config.beta = v;
        }
        if let Some(v) = self.temperature {
            config.temperature = v;
        }
        if let Some(v) = self.harmonic_doc_from_likert {
            config.harmonic_doc_from_likert = v;
        }
    }
}
