//! Append-only judgment log: one JSON record per line.
//!
//! Every append is written, flushed and synced before it is acknowledged.
//! A crash can leave a torn, newline-less line at the end of the file. The
//! next writer starts on a fresh line instead of rewriting it, and readers
//! skip lines that do not parse, reporting their line numbers.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use defgraph::evalstats::JudgmentRecord;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Replay {
    pub records: Vec<JudgmentRecord>,
    /// 1-based numbers of lines that did not parse as a record.
    pub skipped_lines: Vec<usize>,
}

fn parse(bytes: &[u8]) -> Replay {
    let text = String::from_utf8_lossy(bytes);
    let mut replay = Replay::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<JudgmentRecord>(line) {
            Ok(record) => replay.records.push(record),
            Err(_) => replay.skipped_lines.push(i + 1),
        }
    }
    replay
}

/// Reads every complete record in the log.
pub fn read_log(path: &Path) -> Result<Replay, JournalError> {
    let bytes = std::fs::read(path).map_err(|source| JournalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse(&bytes))
}

pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Opens (creating if needed) the log and returns its existing records.
    pub fn open(path: &Path) -> Result<(Journal, Replay), JournalError> {
        let io_err = |source| JournalError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io_err)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io_err)?;
        let replay = parse(&bytes);
        if bytes.last().is_some_and(|&b| b != b'\n') {
            file.write_all(b"\n").map_err(io_err)?;
            file.sync_data().map_err(io_err)?;
        }
        Ok((
            Journal {
                path: path.to_path_buf(),
                file,
            },
            replay,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Durably appends one record.
    pub fn append(&mut self, record: &JudgmentRecord) -> Result<(), JournalError> {
        let mut line = serde_json::to_string(record).expect("judgment records serialize");
        line.push('\n');
        let io_err = |source| JournalError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(line.as_bytes()).map_err(io_err)?;
        self.file.flush().map_err(io_err)?;
        self.file.sync_data().map_err(io_err)
    }
}
