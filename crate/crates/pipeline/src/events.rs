//! Append-only JSON-lines event log with a gapless sequence number.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::PipelineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RunStarted,
    FrameProcessed,
    Detection,
    /// A frame or face that could not be used (unreadable file, flat crop).
    Skipped,
    CheckRequested,
    Verdict,
    Alert,
    /// Something unexpected but not fatal, e.g. a verdict nobody asked for.
    Anomaly,
    RunFinished,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    pub kind: EventKind,
    pub payload: Value,
}

struct Writer {
    file: File,
    next_seq: u64,
}

/// Serialized writer: each append takes the next sequence number and is
/// flushed before the lock is released, so lines are totally ordered.
pub struct EventLog {
    path: PathBuf,
    writer: Mutex<Writer>,
}

pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<EventRecord>, PipelineError> {
    let path = path.as_ref();
    let io = |source| PipelineError::Io { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(io)?;
    let mut out = vec![];
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| PipelineError::EventLog { path: path.into(), line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

impl EventLog {
    /// Opens (or creates) the log for appending. Existing records are returned
    /// and numbering continues after the last one.
    pub fn open(path: impl AsRef<Path>) -> Result<(EventLog, Vec<EventRecord>), PipelineError> {
        let path = path.as_ref().to_path_buf();
        let existing = if path.exists() { read_events(&path)? } else { vec![] };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| PipelineError::Io { path: parent.into(), source })?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
        let next_seq = existing.last().map_or(0, |r| r.seq + 1);
        Ok((EventLog { path, writer: Mutex::new(Writer { file, next_seq }) }, existing))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, kind: EventKind, payload: impl Serialize) -> Result<EventRecord, PipelineError> {
        let payload = serde_json::to_value(payload).expect("event payloads serialize");
        let mut w = self.writer.lock().expect("event log lock poisoned");
        let rec = EventRecord { seq: w.next_seq, ts: Utc::now(), kind, payload };
        let mut line = serde_json::to_vec(&rec).expect("event records serialize");
        line.push(b'\n');
        w.file.write_all(&line).and_then(|_| w.file.flush()).map_err(|source| PipelineError::Io { path: self.path.clone(), source })?;
        w.next_seq += 1;
        Ok(rec)
    }
}
