use std::path::Path;
use std::sync::atomic::Ordering;
use std::sync::Arc;

use chrono::Utc;
use sentinel_core::DetectParams;
use sentinel_watchlist::WatchlistClient;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::alerts::AlertSinks;
use crate::config::PipelineConfig;
use crate::events::{EventKind, EventLog};
use crate::flags::FlagStore;
use crate::frames::{frame_ts, list_frames};
use crate::pipeline::Pipeline;
use crate::process::{process_frame, CascadeRegistry, FrameParams};
use crate::PipelineError;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub frames: usize,
    pub frames_unreadable: usize,
    pub snapshots: usize,
    pub checks: usize,
    pub admissible: usize,
    pub inadmissible: usize,
    pub indeterminate: usize,
    pub alarm_alerts: usize,
    pub review_alerts: usize,
    pub breach_alerts: usize,
    pub anomalies: usize,
}

/// Runs the whole flow over `cfg.frames_dir` and returns once every check
/// has been handled and the log is complete.
pub async fn run(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    let registry = Arc::new(CascadeRegistry::load(&cfg.cascades)?);
    let frames = list_frames(&cfg.frames_dir)?;

    let client = WatchlistClient::new(cfg.watchlist.endpoints.clone(), cfg.watchlist.timeout())?;
    let health = client.health().await;
    let down: Vec<String> = health.iter().filter_map(|(_, r)| r.as_ref().err().map(|e| e.to_string())).collect();
    if down.len() == health.len() {
        return Err(PipelineError::Unreachable(down.join("; ")));
    }
    for d in &down {
        log::warn!("watchlist unavailable at startup: {d}");
    }

    std::fs::create_dir_all(&cfg.snapshots_dir).map_err(|source| PipelineError::Io { path: cfg.snapshots_dir.clone(), source })?;
    let (log, history) = EventLog::open(&cfg.event_log)?;
    let log = Arc::new(log);
    let flags = FlagStore::rebuild(cfg.tau, &history);
    if !flags.is_empty() {
        log::info!("{} flagged signature(s) restored from {}", flags.len(), cfg.event_log.display());
    }
    let pipeline = Pipeline::new(client, log.clone(), flags, cfg.queue_bound, AlertSinks::new(cfg.stderr_alerts, cfg.webhook_url.clone()));

    log.append(
        EventKind::RunStarted,
        json!({
            "camera_id": cfg.camera_id, "frames_dir": cfg.frames_dir, "frames": frames.len(), "tau": cfg.tau,
            "databases": cfg.watchlist.endpoints.iter().map(|e| &e.database).collect::<Vec<_>>(),
            "unavailable_at_start": down,
        }),
    )?;

    let start = cfg.start_time.unwrap_or_else(Utc::now);
    let detect = DetectParams::from(&cfg.detect);
    let mut summary = RunSummary::default();
    for (index, file) in frames.iter().enumerate() {
        let ts = frame_ts(start, cfg.frame_interval_ms, index);
        let job = {
            let (registry, log, file) = (registry.clone(), log.clone(), file.clone());
            let (camera, dir, detect, margin) = (cfg.camera_id.clone(), cfg.snapshots_dir.clone(), detect.clone(), cfg.crop_margin);
            tokio::task::spawn_blocking(move || {
                let frame = match file.read() {
                    Ok(f) => f,
                    Err(e) => return Ok(Err(e)),
                };
                let params = FrameParams { detect, crop_margin: margin, snapshots_dir: Path::new(&dir) };
                process_frame(&frame, ts, &camera, file.number, &registry, &params, &log).map(Ok)
            })
        };
        let snapshots = match job.await.map_err(|e| PipelineError::Task(e.to_string()))?? {
            Ok(s) => s,
            Err(e) => {
                log::warn!("skipping unreadable frame {}: {e}", file.path.display());
                summary.frames_unreadable += 1;
                log.append(EventKind::Skipped, json!({"frame": file.number, "path": file.path, "reason": format!("unreadable frame: {e}")}))?;
                continue;
            }
        };
        summary.frames += 1;
        summary.snapshots += snapshots.len();
        for snap in snapshots.into_iter().filter(|s| s.signature.is_some()) {
            pipeline.resight_check(&snap).await?;
            pipeline.submit_check(snap).await?;
        }
        if cfg.drain_each_frame {
            pipeline.drain().await?;
        }
    }
    pipeline.drain().await?;

    let c = pipeline.counters();
    let load = |a: &std::sync::atomic::AtomicUsize| a.load(Ordering::Relaxed);
    summary.checks = load(&c.checks);
    summary.admissible = load(&c.admissible);
    summary.inadmissible = load(&c.inadmissible);
    summary.indeterminate = load(&c.indeterminate);
    summary.alarm_alerts = load(&c.alarm);
    summary.review_alerts = load(&c.review);
    summary.breach_alerts = load(&c.breach);
    summary.anomalies = load(&c.anomalies);
    log.append(EventKind::RunFinished, &summary)?;
    Ok(summary)
}
