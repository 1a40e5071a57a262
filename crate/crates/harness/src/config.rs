//! Optional TOML configuration. Every key mirrors a command-line flag and
//! a flag given on the command line always wins.
//!
//! ```toml
//! [serve]
//! pool = "pool.jsonl"
//! judges = "judges.txt"
//! log = "judgments.jsonl"
//! addr = "127.0.0.1:8080"
//! seed = 7
//!
//! [generate]
//! endpoint = "http://127.0.0.1:9000/generate"
//! timeout_secs = 30
//! max_length = 512
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    pub pool: Option<PathBuf>,
    pub judges: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub addr: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub endpoint: Option<String>,
    pub timeout_secs: Option<f64>,
    pub max_length: Option<u32>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub serve: ServeConfig,
    #[serde(default)]
    pub generate: GenerateConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn parse(text: &str) -> Result<Config, toml::de::Error> {
        toml::from_str(text)
    }
}
