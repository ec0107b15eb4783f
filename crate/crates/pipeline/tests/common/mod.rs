//! Scenario builders shared by the pipeline tests and the acceptance suite.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use sentinel_core::cascade_xml::load_cascade;
use sentinel_core::haar::detect_multiscale;
use sentinel_core::imaging::{crop, read_image, resize_bilinear, to_grayscale, write_image, AnyImage};
use sentinel_core::{Cascade, ColorImage, DetectParams, GrayImage, Signature};
use sentinel_pipeline::{CascadeEntry, EventKind, EventRecord, ObjectClass, PipelineConfig, WatchlistConfig};
use sentinel_watchlist::service::{LatencyRange, RunningService};
use sentinel_watchlist::{Endpoint, ServiceConfig, Status, WatchRecord, WatchlistService};
use serde_json::Value;

pub const FRAME_W: u32 = 480;
pub const FRAME_H: u32 = 360;
/// Where a person's face sits in scenario frames.
pub const FACE_AT: (u32, u32) = (150, 40);
/// Torso region used for the printed-shirt face.
pub const SHIRT_AT: (u32, u32) = (195, 240);

pub fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

pub fn frontal_path() -> PathBuf {
    assets().join("cascades/haarcascade_frontalface_default.xml")
}

pub fn frontal() -> Cascade {
    load_cascade(frontal_path()).unwrap()
}

pub fn face(i: usize) -> GrayImage {
    read_image(assets().join(format!("faces/face{i}.pgm"))).unwrap().to_gray()
}

/// Smooth, face-free backdrop; `k` shifts the brightness so cameras differ.
pub fn backdrop(k: u32) -> ColorImage {
    GrayImage::from_fn(FRAME_W, FRAME_H, |x, y| (90 + k * 10 + x * 60 / FRAME_W + y * 40 / FRAME_H) as u8).to_color()
}

pub fn person_frame(face_idx: usize, k: u32) -> ColorImage {
    let mut f = backdrop(k);
    f.paste_gray(&face(face_idx), FACE_AT.0, FACE_AT.1);
    f
}

/// A person whose shirt carries a printed face.
pub fn shirt_frame(face_idx: usize, printed_idx: usize) -> ColorImage {
    let mut f = person_frame(face_idx, 0);
    f.paste_gray(&resize_bilinear(&face(printed_idx), 90, 90), SHIRT_AT.0, SHIRT_AT.1);
    f
}

/// Signature the pipeline will compute for the single face in `frame` (no crop margin).
pub fn signature_in(frame: &ColorImage) -> Signature {
    let gray = to_grayscale(frame);
    let found = detect_multiscale(&frontal(), &gray, &DetectParams::default()).unwrap();
    assert_eq!(found.len(), 1, "scenario frame must hold exactly one face: {found:?}");
    Signature::from_crop(&crop(&gray, found[0], 0.0).unwrap()).unwrap()
}

pub fn write_frames(dir: &Path, frames: &[ColorImage]) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, f) in frames.iter().enumerate() {
        write_image(&AnyImage::Color(f.clone()), dir.join(format!("{:04}.ppm", i + 1))).unwrap();
    }
}

pub fn record(id: &str, status: Status, signature: Signature) -> WatchRecord {
    WatchRecord { record_id: id.into(), name: format!("subject {id}"), status, signature, details: format!("{id}: file on record") }
}

/// Starts one mock service per database so each has its own endpoint.
pub async fn start_databases(dbs: Vec<(&str, Vec<WatchRecord>)>, latency: Option<LatencyRange>) -> (Vec<RunningService>, Vec<Endpoint>) {
    let mut servers = vec![];
    let mut endpoints = vec![];
    for (name, records) in dbs {
        let svc = WatchlistService::new(&ServiceConfig { latency_ms: latency, ..Default::default() }).unwrap();
        // an always-present clear record makes empty databases exist
        svc.upsert(name, record("_placeholder", Status::Clear, Signature::from_crop(&face(7)).unwrap()));
        for r in records {
            svc.upsert(name, r);
        }
        let srv = svc.spawn(([127, 0, 0, 1], 0).into()).await.unwrap();
        endpoints.push(Endpoint::new(name, srv.base_url()));
        servers.push(srv);
    }
    (servers, endpoints)
}

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 3, 1, 8, 0, 0).unwrap()
}

pub fn config(root: &Path, camera: &str, frames_dir: &Path, endpoints: Vec<Endpoint>) -> PipelineConfig {
    PipelineConfig {
        camera_id: camera.into(),
        frames_dir: frames_dir.into(),
        cascades: vec![CascadeEntry { path: frontal_path(), class: ObjectClass::Human, enabled: true }],
        detect: Default::default(),
        tau: 0.9,
        crop_margin: 0.0,
        watchlist: WatchlistConfig { endpoints, timeout_ms: 2000 },
        queue_bound: 1024,
        snapshots_dir: root.join("snapshots"),
        event_log: root.join("events.jsonl"),
        webhook_url: None,
        drain_each_frame: true,
        start_time: Some(t0()),
        frame_interval_ms: 1000,
        stderr_alerts: false,
    }
}

pub fn of_kind(log: &[EventRecord], kind: EventKind) -> Vec<&EventRecord> {
    log.iter().filter(|r| r.kind == kind).collect()
}

pub fn alerts(log: &[EventRecord], severity: &str) -> Vec<Value> {
    of_kind(log, EventKind::Alert).into_iter().filter(|r| r.payload["severity"] == severity).map(|r| r.payload.clone()).collect()
}

pub fn verdicts(log: &[EventRecord], decision: &str) -> usize {
    of_kind(log, EventKind::Verdict).into_iter().filter(|r| r.payload["decision"] == decision).count()
}

/// Gapless seq (relative to the first record) and every verdict preceded by its request.
pub fn check_log_invariants(log: &[EventRecord]) -> Result<(), String> {
    let first = log.first().map_or(0, |r| r.seq);
    if let Some((i, r)) = log.iter().enumerate().find(|(i, r)| r.seq != first + *i as u64) {
        return Err(format!("seq gap at line {}: {}", i + 1, r.seq));
    }
    let mut requested = std::collections::HashSet::new();
    for r in log {
        match r.kind {
            EventKind::CheckRequested => {
                if !requested.insert(r.payload["request_id"].as_str().unwrap_or_default().to_string()) {
                    return Err(format!("duplicate check_requested at seq {}", r.seq));
                }
            }
            EventKind::Verdict => {
                let id = r.payload["request_id"].as_str().unwrap_or_default();
                if !requested.contains(id) {
                    return Err(format!("verdict {id} at seq {} has no earlier check_requested", r.seq));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Runs a short-lived multi-thread runtime; the acceptance target has no async harness.
pub fn block_on<F: std::future::Future>(f: F) -> F::Output {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap().block_on(f)
}

pub const GENEROUS: Duration = Duration::from_secs(5);
