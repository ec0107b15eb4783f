mod common;

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use sentinel_core::haar::{HaarFeature, Stage, WeakTree, WeightedRect};
use sentinel_core::imaging::{crop, read_image, to_grayscale};
use sentinel_core::{Cascade, ColorImage, DetectParams};
use sentinel_pipeline::{
    process_frame, read_events, run, AlertSinks, CascadeRegistry, EventKind, EventLog, FlagStore, FrameParams, ObjectClass, PersonSnapshot,
    Pipeline, PipelineError, RegisteredCascade, Severity,
};
use sentinel_watchlist::{DbHit, Decision, Endpoint, Status, Verdict, WatchlistClient};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpListener;

fn human_registry() -> CascadeRegistry {
    CascadeRegistry::new(vec![RegisteredCascade { path: frontal_path(), class: ObjectClass::Human, cascade: frontal() }]).unwrap()
}

/// Accepts every window.
fn everywhere() -> Cascade {
    let f = HaarFeature::new(vec![WeightedRect::new(0, 0, 24, 24, -1.0), WeightedRect::new(0, 0, 12, 24, 2.0)]).unwrap();
    Cascade::new(24, 24, vec![Stage { trees: vec![WeakTree::stump(f, 0.0, 1.0, 1.0)], threshold: f64::NEG_INFINITY }]).unwrap()
}

fn frame_snapshots(frame: &ColorImage, camera: &str, dir: &Path, log: &EventLog) -> Vec<PersonSnapshot> {
    std::fs::create_dir_all(dir).unwrap();
    let params = FrameParams { detect: DetectParams::default(), crop_margin: 0.0, snapshots_dir: dir };
    process_frame(frame, t0(), camera, 1, &human_registry(), &params, log).unwrap()
}

fn open_log(dir: &Path) -> Arc<EventLog> {
    Arc::new(EventLog::open(dir.join("events.jsonl")).unwrap().0)
}

fn pipeline(endpoints: Vec<Endpoint>, log: Arc<EventLog>, bound: usize, timeout: Duration) -> Pipeline {
    Pipeline::new(WatchlistClient::new(endpoints, timeout).unwrap(), log, FlagStore::new(0.9), bound, AlertSinks::default())
}

#[test]
fn two_faces_give_two_snapshots_and_one_full_frame() {
    let dir = tempfile::tempdir().unwrap();
    let log = open_log(dir.path());
    let frame = shirt_frame(0, 1);
    let snaps = frame_snapshots(&frame, "gate-1", &dir.path().join("snaps"), &log);
    assert_eq!(snaps.len(), 2);
    let mut files: Vec<String> = std::fs::read_dir(dir.path().join("snaps")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(files.iter().filter(|f| f.ends_with("_full.ppm")).count(), 1);
    assert_eq!(files.iter().filter(|f| f.contains("_face")).count(), 2);
    assert!(files[0].starts_with("gate-1_20260301T080000.000Z_1_"));

    let gray = to_grayscale(&frame);
    for s in &snaps {
        let saved = read_image(&s.face_image_path).unwrap().to_gray();
        assert_eq!(saved, crop(&gray, s.face_rect, 0.0).unwrap());
        assert!(s.signature.is_some());
        let full = read_image(&s.full_image_path).unwrap().to_color();
        // the box is drawn on the top-left corner of each face
        assert_eq!(full.get(s.face_rect.x, s.face_rect.y), [255, 0, 0]);
    }
    let events = read_events(log.path()).unwrap();
    assert_eq!(of_kind(&events, EventKind::Detection).len(), 2);
    assert_eq!(events.last().unwrap().kind, EventKind::FrameProcessed);
}

#[test]
fn empty_frame_logs_only_frame_processed() {
    let dir = tempfile::tempdir().unwrap();
    let log = open_log(dir.path());
    let snaps = frame_snapshots(&backdrop(0), "gate-1", &dir.path().join("snaps"), &log);
    assert!(snaps.is_empty());
    let events = read_events(log.path()).unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].kind, EventKind::FrameProcessed);
    assert_eq!(std::fs::read_dir(dir.path().join("snaps")).unwrap().count(), 0);
}

#[test]
fn flat_crops_are_skipped_and_other_classes_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let log = open_log(dir.path());
    let snaps_dir = dir.path().join("snaps");
    std::fs::create_dir_all(&snaps_dir).unwrap();
    let params = FrameParams { detect: DetectParams { scale_factor: 2.0, ..DetectParams::default() }, crop_margin: 0.0, snapshots_dir: &snaps_dir };
    let flat = ColorImage::filled(96, 96, [120, 120, 120]);

    let human = CascadeRegistry::new(vec![RegisteredCascade { path: "everywhere.xml".into(), class: ObjectClass::Human, cascade: everywhere() }]).unwrap();
    let snaps = process_frame(&flat, t0(), "cam", 1, &human, &params, &log).unwrap();
    assert!(!snaps.is_empty());
    assert!(snaps.iter().all(|s| s.signature.is_none()));
    let events = read_events(log.path()).unwrap();
    assert_eq!(of_kind(&events, EventKind::Skipped).len(), snaps.len());

    let mixed = CascadeRegistry::new(vec![
        RegisteredCascade { path: frontal_path(), class: ObjectClass::Human, cascade: frontal() },
        RegisteredCascade { path: "animals.xml".into(), class: ObjectClass::Animal, cascade: everywhere() },
    ])
    .unwrap();
    let before = read_events(log.path()).unwrap().len();
    let snaps = process_frame(&flat, t0(), "cam", 2, &mixed, &params, &log).unwrap();
    assert!(snaps.is_empty(), "animal detections never become snapshots");
    let new: Vec<_> = read_events(log.path()).unwrap().split_off(before);
    let ignored = of_kind(&new, EventKind::Detection);
    assert!(!ignored.is_empty());
    assert!(ignored.iter().all(|r| r.payload["class"] == "animal" && r.payload["ignored"] == true));

    assert!(CascadeRegistry::new(vec![RegisteredCascade { path: "a.xml".into(), class: ObjectClass::Animal, cascade: everywhere() }]).is_err());
}

#[tokio::test(flavor = "multi_thread")]
async fn every_submit_logs_one_request() {
    let dir = tempfile::tempdir().unwrap();
    let log = open_log(dir.path());
    let snap = frame_snapshots(&person_frame(2, 0), "cam", &dir.path().join("snaps"), &log).remove(0);
    let (_srv, eps) = start_databases(vec![("police", vec![])], None).await;
    let p = pipeline(eps, log.clone(), 1024, GENEROUS);

    let id = p.submit_check(snap.clone()).await.unwrap();
    p.drain().await.unwrap();
    let events = read_events(log.path()).unwrap();
    let requested = of_kind(&events, EventKind::CheckRequested);
    assert_eq!(requested.len(), 1);
    assert_eq!(requested[0].payload["request_id"], id.as_str());
    assert_eq!(id.len(), 36, "UUID format");

    let mut ids = std::collections::HashSet::new();
    for _ in 0..100 {
        ids.insert(p.submit_check(snap.clone()).await.unwrap());
    }
    p.drain().await.unwrap();
    assert_eq!(ids.len(), 100);
    let events = read_events(log.path()).unwrap();
    assert_eq!(of_kind(&events, EventKind::Verdict).len(), 101);
    check_log_invariants(&events).unwrap();

    let mut flat = snap;
    flat.signature = None;
    assert!(matches!(p.submit_check(flat).await, Err(PipelineError::NoSignature(_))));
}

/// Accepts connections and never answers.
async fn silent_endpoint(name: &str) -> Endpoint {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        let mut held = vec![];
        while let Ok((sock, _)) = listener.accept().await {
            held.push(sock);
        }
    });
    Endpoint::new(name, format!("http://{addr}"))
}

#[tokio::test(flavor = "multi_thread")]
async fn full_queue_blocks_instead_of_dropping() {
    let dir = tempfile::tempdir().unwrap();
    let log = open_log(dir.path());
    let snap = frame_snapshots(&person_frame(2, 0), "cam", &dir.path().join("snaps"), &log).remove(0);
    let stalled = silent_endpoint("police").await;
    let p = pipeline(vec![stalled], log.clone(), 2, Duration::from_millis(1200));

    let t = Instant::now();
    p.submit_check(snap.clone()).await.unwrap();
    p.submit_check(snap.clone()).await.unwrap();
    assert!(t.elapsed() < Duration::from_millis(500));
    let third = tokio::time::timeout(Duration::from_millis(400), p.submit_check(snap.clone())).await;
    assert!(third.is_err(), "third submit must wait for a free slot");
    assert_eq!(p.in_flight(), 2);

    // once the stalled checks time out, the slot frees up and the submit goes through
    p.submit_check(snap).await.unwrap();
    assert!(t.elapsed() >= Duration::from_millis(1100));
    p.drain().await.unwrap();
    let events = read_events(log.path()).unwrap();
    assert_eq!(of_kind(&events, EventKind::CheckRequested).len(), 3);
    assert_eq!(verdicts(&events, "indeterminate"), 3);
    assert_eq!(alerts(&events, "review").len(), 3);
}

#[tokio::test(flavor = "multi_thread")]
async fn verdicts_become_alerts() {
    let dir = tempfile::tempdir().unwrap();
    let log = open_log(dir.path());
    let snap = frame_snapshots(&person_frame(3, 0), "cam", &dir.path().join("snaps"), &log).remove(0);
    // the real checks stall, so the verdicts handed in below always arrive first
    let p = pipeline(vec![silent_endpoint("police").await], log.clone(), 8, Duration::from_millis(1500));

    let hit = DbHit { database: "interpol".into(), record_id: "x1".into(), status: Status::Wanted, score: 0.97, details: "armed robbery".into() };
    let mut outcomes = vec![];
    for decision in [Decision::Inadmissible, Decision::Admissible, Decision::Indeterminate] {
        let mut v = Verdict {
            request_id: p.submit_check(snap.clone()).await.unwrap(),
            decision,
            hits: vec![],
            databases_queried: vec!["interpol".into(), "police".into()],
            databases_unavailable: vec![],
        };
        match decision {
            Decision::Inadmissible => v.hits.push(hit.clone()),
            Decision::Indeterminate => v.databases_unavailable.push("police".into()),
            Decision::Admissible => {}
        }
        outcomes.push(v);
    }
    let mut handled = vec![];
    for v in outcomes {
        handled.push(p.handle_verdict(v).await.unwrap());
    }
    let alarm = handled[0].as_ref().expect("inadmissible raises an alarm");
    assert_eq!(alarm.severity, Severity::Alarm);
    assert_eq!(alarm.hits[0].database, "interpol");
    assert_eq!(alarm.hits[0].details, "armed robbery");
    assert!(alarm.face_image_path.exists() && alarm.full_image_path.exists());
    assert!(handled[1].is_none(), "admissible never alerts");
    let review = handled[2].as_ref().expect("indeterminate raises a review");
    assert_eq!(review.severity, Severity::Review);
    assert_eq!(review.databases_unavailable, vec!["police"]);

    // the stalled checks time out later and find nothing pending
    p.drain().await.unwrap();
    let events = read_events(log.path()).unwrap();
    assert_eq!(of_kind(&events, EventKind::Anomaly).len(), 3);
    assert_eq!(verdicts(&events, "admissible"), 1);
    check_log_invariants(&events).unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_verdict_is_an_anomaly() {
    let dir = tempfile::tempdir().unwrap();
    let log = open_log(dir.path());
    let (_srv, eps) = start_databases(vec![("police", vec![])], None).await;
    let p = pipeline(eps, log.clone(), 8, GENEROUS);
    let v = Verdict { request_id: "nobody".into(), decision: Decision::Inadmissible, hits: vec![], databases_queried: vec![], databases_unavailable: vec![] };
    assert!(p.handle_verdict(v).await.unwrap().is_none());
    let events = read_events(log.path()).unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].kind, EventKind::Anomaly);
}

#[tokio::test(flavor = "multi_thread")]
async fn resighting_escalates() {
    let dir = tempfile::tempdir().unwrap();
    let log = open_log(dir.path());
    let snaps_dir = dir.path().join("snaps");
    let first = frame_snapshots(&person_frame(4, 0), "gate-1", &snaps_dir, &log).remove(0);
    let other = frame_snapshots(&person_frame(5, 0), "gate-1", &snaps_dir, &log).remove(0);
    let sig = first.signature.clone().unwrap();
    let (_srv, eps) = start_databases(vec![("police", vec![record("p9", Status::Wanted, sig)])], None).await;
    let p = pipeline(eps, log.clone(), 8, GENEROUS);

    assert!(p.resight_check(&first).await.unwrap().is_none(), "nothing flagged yet");
    p.submit_check(first.clone()).await.unwrap();
    p.drain().await.unwrap();
    assert_eq!(p.flags().len(), 1);
    let alarm_seq = of_kind(&read_events(log.path()).unwrap(), EventKind::Alert)[0].seq;

    let again = p.resight_check(&first).await.unwrap().expect("breach");
    assert_eq!(again.severity, Severity::Breach);
    assert_eq!(again.flag.as_ref().unwrap().alert_seq, alarm_seq);
    assert!(p.resight_check(&other).await.unwrap().is_none(), "unflagged face");

    let mut elsewhere = first.clone();
    elsewhere.camera_id = "gate-2".into();
    let b = p.resight_check(&elsewhere).await.unwrap().expect("breach on another camera");
    assert_eq!(b.camera_id, "gate-2");
    assert_eq!(b.flag.unwrap().camera_id, "gate-1");
}

fn scenario(dir: &Path, placement: &[(usize, usize)], n: usize) -> std::path::PathBuf {
    let frames: Vec<ColorImage> = (1..=n)
        .map(|i| placement.iter().find(|(at, _)| *at == i).map_or_else(|| backdrop(0), |&(_, f)| person_frame(f, 0)))
        .collect();
    let frames_dir = dir.join("frames");
    write_frames(&frames_dir, &frames);
    frames_dir
}

#[tokio::test(flavor = "multi_thread")]
async fn ten_frames_with_a_returning_suspect() {
    let dir = tempfile::tempdir().unwrap();
    let frames = scenario(dir.path(), &[(3, 6), (7, 6)], 10);
    let flagged = signature_in(&person_frame(6, 0));
    let (_srv, eps) = start_databases(vec![("police", vec![record("p1", Status::Wanted, flagged)]), ("interpol", vec![])], None).await;
    let cfg = config(dir.path(), "gate-1", &frames, eps);
    let summary = run(&cfg).await.unwrap();
    let log = read_events(&cfg.event_log).unwrap();
    check_log_invariants(&log).unwrap();
    assert!(of_kind(&log, EventKind::Detection).len() >= 2);
    assert_eq!(of_kind(&log, EventKind::CheckRequested).len(), 2);
    assert_eq!(alerts(&log, "breach").len(), 1);
    // every detection is checked, so the return visit is inadmissible too
    assert_eq!(verdicts(&log, "inadmissible"), 2);
    assert_eq!(summary.frames, 10);
    assert_eq!(summary.breach_alerts, 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn empty_directory_and_all_clear_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (_srv, eps) = start_databases(vec![("police", vec![])], None).await;
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let cfg = config(&dir.path().join("a"), "cam", &empty, eps.clone());
    run(&cfg).await.unwrap();
    let kinds: Vec<EventKind> = read_events(&cfg.event_log).unwrap().iter().map(|r| r.kind).collect();
    assert_eq!(kinds, vec![EventKind::RunStarted, EventKind::RunFinished]);

    let frames = scenario(&dir.path().join("b"), &[(1, 0), (2, 1), (4, 2)], 5);
    let cfg = config(&dir.path().join("b"), "cam", &frames, eps);
    let s = run(&cfg).await.unwrap();
    let log = read_events(&cfg.event_log).unwrap();
    assert_eq!(of_kind(&log, EventKind::Alert).len(), 0);
    assert_eq!(verdicts(&log, "admissible"), 3);
    assert_eq!(s.checks, 3);
}

#[tokio::test(flavor = "multi_thread")]
async fn unreadable_frames_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let frames = scenario(dir.path(), &[(2, 0)], 3);
    std::fs::write(frames.join("0002.ppm"), b"P6\n10 10\n255\n").unwrap();
    let (_srv, eps) = start_databases(vec![("police", vec![])], None).await;
    let cfg = config(dir.path(), "cam", &frames, eps);
    let s = run(&cfg).await.unwrap();
    assert_eq!((s.frames, s.frames_unreadable), (2, 1));
    let log = read_events(&cfg.event_log).unwrap();
    let skipped = of_kind(&log, EventKind::Skipped);
    assert_eq!(skipped.len(), 1);
    assert_eq!(skipped[0].payload["frame"], 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn unreachable_watchlists_abort_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let frames = scenario(dir.path(), &[], 1);
    let cfg = config(dir.path(), "cam", &frames, vec![Endpoint::new("police", "http://127.0.0.1:9")]);
    assert!(matches!(run(&cfg).await, Err(PipelineError::Unreachable(_))));
    assert!(!cfg.event_log.exists());
}

fn normalized(log: &[sentinel_pipeline::EventRecord]) -> Vec<serde_json::Value> {
    let ids: Vec<String> = of_kind(log, EventKind::CheckRequested).iter().map(|r| r.payload["request_id"].as_str().unwrap().to_string()).collect();
    log.iter()
        .map(|r| {
            let mut text = serde_json::to_string(&(r.seq, r.kind, &r.payload)).unwrap();
            for (i, id) in ids.iter().enumerate() {
                text = text.replace(id, &format!("request-{i}"));
            }
            serde_json::from_str(&text).unwrap()
        })
        .collect()
}

#[tokio::test(flavor = "multi_thread")]
async fn replay_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let frames = scenario(dir.path(), &[(1, 0), (2, 3), (3, 3)], 4);
    let flagged = signature_in(&person_frame(3, 0));
    let (_srv, eps) = start_databases(vec![("police", vec![record("p1", Status::Wanted, flagged)]), ("gov", vec![])], None).await;
    let mut logs = vec![];
    for run_dir in ["r1", "r2"] {
        let mut cfg = config(&dir.path().join(run_dir), "cam", &frames, eps.clone());
        cfg.snapshots_dir = dir.path().join("snaps");
        run(&cfg).await.unwrap();
        logs.push(normalized(&read_events(&cfg.event_log).unwrap()));
    }
    assert_eq!(logs[0], logs[1]);
}

#[tokio::test(flavor = "multi_thread")]
async fn flags_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let flagged = signature_in(&person_frame(1, 0));
    let (_srv, eps) = start_databases(vec![("police", vec![record("p1", Status::Wanted, flagged)])], None).await;
    let day1 = scenario(&dir.path().join("d1"), &[(1, 1)], 1);
    let day2 = scenario(&dir.path().join("d2"), &[(1, 1)], 1);
    let cfg1 = config(dir.path(), "cam", &day1, eps.clone());
    assert_eq!(run(&cfg1).await.unwrap().breach_alerts, 0);
    let cfg2 = config(dir.path(), "cam", &day2, eps);
    assert_eq!(run(&cfg2).await.unwrap().breach_alerts, 1, "flag rebuilt from the event log");
    let log = read_events(&cfg2.event_log).unwrap();
    check_log_invariants(&log).unwrap();
    let breach = &alerts(&log, "breach")[0];
    let alarm_seq = of_kind(&log, EventKind::Alert)[0].seq;
    assert_eq!(breach["flag"]["alert_seq"], alarm_seq);
}

/// Minimal HTTP sink that records request bodies.
async fn webhook() -> (String, tokio::sync::mpsc::UnboundedReceiver<serde_json::Value>) {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}/hook", listener.local_addr().unwrap());
    let (tx, rx) = tokio::sync::mpsc::unbounded_channel();
    tokio::spawn(async move {
        while let Ok((mut sock, _)) = listener.accept().await {
            let tx = tx.clone();
            tokio::spawn(async move {
                let mut buf = vec![];
                let mut chunk = [0u8; 4096];
                loop {
                    let n = sock.read(&mut chunk).await.unwrap_or(0);
                    if n == 0 {
                        return;
                    }
                    buf.extend_from_slice(&chunk[..n]);
                    let text = String::from_utf8_lossy(&buf).to_string();
                    if let Some(end) = text.find("\r\n\r\n") {
                        let len: usize = text[..end]
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse().unwrap()))
                            .unwrap_or(0);
                        if buf.len() >= end + 4 + len {
                            let _ = tx.send(serde_json::from_slice(&buf[end + 4..end + 4 + len]).unwrap());
                            let _ = sock.write_all(b"HTTP/1.1 200 OK\r\ncontent-length: 0\r\nconnection: close\r\n\r\n").await;
                            return;
                        }
                    }
                }
            });
        }
    });
    (url, rx)
}

#[tokio::test(flavor = "multi_thread")]
async fn alerts_are_posted_to_the_webhook() {
    let dir = tempfile::tempdir().unwrap();
    let frames = scenario(dir.path(), &[(1, 5)], 1);
    let flagged = signature_in(&person_frame(5, 0));
    let (_srv, eps) = start_databases(vec![("police", vec![record("p1", Status::Extremist, flagged)])], None).await;
    let (url, mut rx) = webhook().await;
    let mut cfg = config(dir.path(), "cam", &frames, eps);
    cfg.webhook_url = Some(url);
    run(&cfg).await.unwrap();
    let posted = rx.recv().await.unwrap();
    let logged = of_kind(&read_events(&cfg.event_log).unwrap(), EventKind::Alert)[0].clone();
    assert_eq!(posted, serde_json::to_value(&logged).unwrap());
    assert_eq!(posted["payload"]["hits"][0]["status"], "extremist");
}
