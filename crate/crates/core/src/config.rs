//! Run configuration file.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::InferenceConfig;
use crate::pattern::PosPattern;
use crate::text::Pos;

/// Where RE and EAE get entities from in task mode when no gold spans are
/// supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntitySource {
    /// Gold spans only; RE/EAE without them is a configuration error.
    #[default]
    None,
    /// Run the entailment-based NER stage first.
    Te,
}

fn default_patterns() -> Vec<PosPattern> {
    vec![PosPattern::proper_nouns()]
}

fn default_trigger_tags() -> Vec<Pos> {
    vec![Pos::Verb]
}

fn default_max_batch() -> usize {
    32
}

fn default_max_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub inference: InferenceConfig,
    #[serde(default = "default_patterns")]
    pub pos_patterns: Vec<PosPattern>,
    #[serde(default = "default_trigger_tags")]
    pub trigger_tags: Vec<Pos>,
    #[serde(default)]
    pub task_entity_source: EntitySource,
    /// Base URL of the entailment service; `None` uses the in-process mock.
    #[serde(default)]
    pub entailment_url: Option<String>,
    /// Base URL of the tagger service; `None` uses the built-in rule tagger.
    #[serde(default)]
    pub tagger_url: Option<String>,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inference: InferenceConfig::default(),
            pos_patterns: default_patterns(),
            trigger_tags: default_trigger_tags(),
            task_entity_source: EntitySource::None,
            entailment_url: None,
            tagger_url: None,
            max_batch: default_max_batch(),
            max_in_flight: default_max_in_flight(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = self.inference.problems();
        if self.pos_patterns.is_empty() {
            problems.push("pos_patterns must not be empty".into());
        }
        if self.max_batch == 0 {
            problems.push("max_batch must be positive".into());
        }
        if self.max_in_flight == 0 {
            problems.push("max_in_flight must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems.join("; ")))
        }
    }
}

pub fn load_config(source: &[u8]) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = serde_json::from_slice(source).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}
