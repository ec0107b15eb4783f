use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use sentinel_core::haar::{DetectParams, DEFAULT_GROUP_EPS, DEFAULT_STEP_FRACTION};
use sentinel_core::signature::DEFAULT_TAU;
use sentinel_watchlist::Endpoint;
use serde::{Deserialize, Serialize};

use crate::PipelineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Human,
    Animal,
    Object,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeEntry {
    pub path: PathBuf,
    pub class: ObjectClass,
    #[serde(default = "yes")]
    pub enabled: bool,
}

fn yes() -> bool {
    true
}

/// Serializable mirror of [`DetectParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    pub scale_factor: f64,
    pub min_neighbors: usize,
    pub min_size: Option<(u32, u32)>,
    pub step_fraction: f64,
    pub group_eps: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig { scale_factor: 1.1, min_neighbors: 4, min_size: None, step_fraction: DEFAULT_STEP_FRACTION, group_eps: DEFAULT_GROUP_EPS }
    }
}

impl From<&DetectConfig> for DetectParams {
    fn from(c: &DetectConfig) -> Self {
        DetectParams {
            scale_factor: c.scale_factor,
            min_neighbors: c.min_neighbors,
            min_size: c.min_size,
            step_fraction: c.step_fraction,
            group_eps: c.group_eps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatchlistConfig {
    pub endpoints: Vec<Endpoint>,
    /// Per-database timeout.
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    2000
}

impl WatchlistConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

pub const DEFAULT_QUEUE_BOUND: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub camera_id: String,
    pub frames_dir: PathBuf,
    pub cascades: Vec<CascadeEntry>,
    #[serde(default)]
    pub detect: DetectConfig,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Face crops are grown by this fraction of the detection size on every side.
    #[serde(default)]
    pub crop_margin: f64,
    pub watchlist: WatchlistConfig,
    /// Maximum number of background checks in flight.
    #[serde(default = "default_queue_bound")]
    pub queue_bound: usize,
    pub snapshots_dir: PathBuf,
    pub event_log: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub webhook_url: Option<String>,
    /// Wait for every check of a frame before reading the next one.
    #[serde(default)]
    pub drain_each_frame: bool,
    /// Timestamp of the first frame; defaults to the wall clock at start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_time: Option<DateTime<Utc>>,
    #[serde(default = "default_interval_ms")]
    pub frame_interval_ms: u64,
    /// Print alerts on standard error.
    #[serde(default = "yes")]
    pub stderr_alerts: bool,
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_queue_bound() -> usize {
    DEFAULT_QUEUE_BOUND
}

fn default_interval_ms() -> u64 {
    1000
}

impl PipelineConfig {
    /// Reads a config file; relative paths inside it are resolved against its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.frames_dir);
        fix(&mut cfg.snapshots_dir);
        fix(&mut cfg.event_log);
        cfg.cascades.iter_mut().for_each(|c| fix(&mut c.path));
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.camera_id.is_empty() {
            return bad("camera_id must be nonempty".into());
        }
        if !self.cascades.iter().any(|c| c.enabled && c.class == ObjectClass::Human) {
            return bad("at least one enabled cascade must map to class human".into());
        }
        if self.watchlist.endpoints.is_empty() {
            return bad("no watchlist endpoints configured".into());
        }
        if self.queue_bound == 0 {
            return bad("queue_bound must be at least 1".into());
        }
        if !(self.tau > -1.0 && self.tau <= 1.0) {
            return bad(format!("tau {} outside (-1, 1]", self.tau));
        }
        if !(self.crop_margin >= 0.0 && self.crop_margin.is_finite()) {
            return bad(format!("crop_margin {} must be a finite non-negative number", self.crop_margin));
        }
        DetectParams::from(&self.detect).validate().map_err(|e| PipelineError::Config(e.to_string()))
    }
}
