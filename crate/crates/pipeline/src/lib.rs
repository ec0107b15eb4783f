//! The screening pipeline: read camera frames in order, detect and classify,
//! snapshot the full frame and each face separately, check every face against
//! the watchlists in the background, and turn verdicts into alerts. Every step
//! is recorded in an append-only JSON-lines event log.

mod alerts;
pub mod config;
pub mod events;
pub mod flags;
pub mod frames;
mod pipeline;
pub mod process;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use alerts::{Alert, AlertSinks, FlagRef, Severity};
pub use config::{CascadeEntry, DetectConfig, ObjectClass, PipelineConfig, WatchlistConfig};
pub use events::{read_events, EventKind, EventLog, EventRecord};
pub use flags::{Flag, FlagStore};
pub use pipeline::Pipeline;
pub use process::{process_frame, CascadeRegistry, FrameParams, PersonSnapshot, RegisteredCascade};
pub use run::{run, RunSummary};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("event log {path}, line {line}: {message}")]
    EventLog { path: PathBuf, line: usize, message: String },
    #[error("cascade {path}: {source}")]
    Cascade { path: PathBuf, source: sentinel_core::cascade_xml::CascadeXmlError },
    #[error("cannot write {path}: {source}")]
    Image { path: PathBuf, source: sentinel_core::imaging::ImageError },
    #[error(transparent)]
    Detect(#[from] sentinel_core::haar::ParamError),
    #[error(transparent)]
    Watchlist(#[from] sentinel_watchlist::ClientError),
    #[error("no watchlist database is reachable: {0}")]
    Unreachable(String),
    #[error("snapshot {0} has no signature and cannot be checked")]
    NoSignature(String),
    #[error("worker task failed: {0}")]
    Task(String),
}
