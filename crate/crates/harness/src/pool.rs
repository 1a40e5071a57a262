//! File formats for evaluation pools, pool candidates and judge lists.
//!
//! Pools and candidates are JSON lines, one `PoolItem` / `PoolCandidate`
//! per line. A judge list is plain text with one id per line; blank lines
//! and lines starting with `#` are ignored.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use defgraph::evalstats::{PoolCandidate, PoolItem};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PoolFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("{path}: duplicate id `{id}`")]
    Duplicate { path: PathBuf, id: String },
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PoolFileError> {
    let text = fs::read_to_string(path).map_err(|source| PoolFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PoolFileError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PoolFileError> {
    let io_err = |source| PoolFileError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    for item in items {
        let line = serde_json::to_string(item).expect("pool records serialize");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn unique<'a>(path: &Path, ids: impl Iterator<Item = &'a str>) -> Result<(), PoolFileError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(PoolFileError::Duplicate {
                path: path.to_path_buf(),
                id: id.to_string(),
            });
        }
    }
    Ok(())
}

pub fn read_pool(path: &Path) -> Result<Vec<PoolItem>, PoolFileError> {
    let pool: Vec<PoolItem> = read_lines(path)?;
    unique(path, pool.iter().map(|p| p.query.id.as_str()))?;
    Ok(pool)
}

pub fn read_candidates(path: &Path) -> Result<Vec<PoolCandidate>, PoolFileError> {
    let candidates: Vec<PoolCandidate> = read_lines(path)?;
    unique(path, candidates.iter().map(|p| p.query.id.as_str()))?;
    Ok(candidates)
}

pub fn read_judges(path: &Path) -> Result<Vec<String>, PoolFileError> {
    let text = fs::read_to_string(path).map_err(|source| PoolFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let judges: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    unique(path, judges.iter().map(String::as_str))?;
    Ok(judges)
}
