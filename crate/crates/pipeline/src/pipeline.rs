use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use sentinel_watchlist::{CheckRequest, Decision, Verdict, WatchlistClient};
use serde_json::json;
use tokio::sync::Semaphore;
use tokio::task::JoinSet;

use crate::alerts::{Alert, AlertSinks, Severity};
use crate::events::{EventKind, EventLog, EventRecord};
use crate::flags::{Flag, FlagStore};
use crate::process::PersonSnapshot;
use crate::PipelineError;

#[derive(Default)]
pub(crate) struct Counters {
    pub checks: AtomicUsize,
    pub admissible: AtomicUsize,
    pub inadmissible: AtomicUsize,
    pub indeterminate: AtomicUsize,
    pub alarm: AtomicUsize,
    pub review: AtomicUsize,
    pub breach: AtomicUsize,
    pub anomalies: AtomicUsize,
}

struct Inner {
    client: WatchlistClient,
    log: Arc<EventLog>,
    flags: Mutex<FlagStore>,
    pending: Mutex<HashMap<String, PersonSnapshot>>,
    permits: Arc<Semaphore>,
    tasks: Mutex<JoinSet<()>>,
    sinks: AlertSinks,
    counters: Counters,
}

/// Submits background checks and turns their verdicts into alerts.
///
/// At most `queue_bound` checks are in flight; [`Pipeline::submit_check`]
/// waits for a free slot instead of dropping work. Cheap to clone.
#[derive(Clone)]
pub struct Pipeline {
    inner: Arc<Inner>,
}

impl Pipeline {
    pub fn new(client: WatchlistClient, log: Arc<EventLog>, flags: FlagStore, queue_bound: usize, sinks: AlertSinks) -> Self {
        assert!(queue_bound >= 1, "queue bound must be at least 1");
        Pipeline {
            inner: Arc::new(Inner {
                client,
                log,
                flags: Mutex::new(flags),
                pending: Mutex::new(HashMap::new()),
                permits: Arc::new(Semaphore::new(queue_bound)),
                tasks: Mutex::new(JoinSet::new()),
                sinks,
                counters: Counters::default(),
            }),
        }
    }

    pub fn log(&self) -> &Arc<EventLog> {
        &self.inner.log
    }

    pub fn flags(&self) -> FlagStore {
        self.inner.flags.lock().expect("flag lock poisoned").clone()
    }

    /// Checks whose verdict has not been handled yet.
    pub fn in_flight(&self) -> usize {
        self.inner.pending.lock().expect("pending lock poisoned").len()
    }

    pub(crate) fn counters(&self) -> &Counters {
        &self.inner.counters
    }

    /// Raises a breach alert if the snapshot matches a flagged signature.
    pub async fn resight_check(&self, snap: &PersonSnapshot) -> Result<Option<Alert>, PipelineError> {
        let Some(signature) = &snap.signature else { return Ok(None) };
        let found = {
            let flags = self.inner.flags.lock().expect("flag lock poisoned");
            flags.find(signature).map(|(f, score)| (f.to_ref(), score))
        };
        let Some((flag, score)) = found else { return Ok(None) };
        let alert = Alert {
            severity: Severity::Breach,
            camera_id: snap.camera_id.clone(),
            captured_at: snap.ts,
            full_image_path: snap.full_image_path.clone(),
            face_image_path: snap.face_image_path.clone(),
            request_id: None,
            hits: vec![],
            databases_unavailable: vec![],
            flag: Some(flag),
            similarity: Some(score),
            signature: None,
        };
        self.inner.raise(&alert).await?;
        Ok(Some(alert))
    }

    /// Queues a background check for `snap` and returns its request id.
    /// Waits while `queue_bound` checks are already in flight.
    pub async fn submit_check(&self, snap: PersonSnapshot) -> Result<String, PipelineError> {
        let Some(signature) = snap.signature.clone() else {
            return Err(PipelineError::NoSignature(snap.face_image_path.display().to_string()));
        };
        let permit = self.inner.permits.clone().acquire_owned().await.expect("semaphore is never closed");
        let req = CheckRequest::new(signature, &snap.face, &snap.camera_id, snap.ts);
        let request_id = req.request_id.clone();
        self.inner.log.append(
            EventKind::CheckRequested,
            json!({
                "request_id": request_id, "camera_id": snap.camera_id, "frame": snap.frame, "face_index": snap.face_index,
                "full_image_path": snap.full_image_path, "face_image_path": snap.face_image_path,
            }),
        )?;
        self.inner.pending.lock().expect("pending lock poisoned").insert(request_id.clone(), snap);
        self.inner.counters.checks.fetch_add(1, Ordering::Relaxed);

        let inner = self.inner.clone();
        self.inner.tasks.lock().expect("task lock poisoned").spawn(async move {
            let verdict = inner.client.check(&req).await;
            if let Err(e) = inner.handle_verdict(verdict).await {
                log::error!("request {}: {e}", req.request_id);
            }
            drop(permit);
        });
        Ok(request_id)
    }

    /// Logs the verdict and raises the matching alert, if any.
    pub async fn handle_verdict(&self, v: Verdict) -> Result<Option<Alert>, PipelineError> {
        self.inner.handle_verdict(v).await
    }

    /// Waits until every submitted check has been handled.
    pub async fn drain(&self) -> Result<(), PipelineError> {
        loop {
            let mut set = std::mem::take(&mut *self.inner.tasks.lock().expect("task lock poisoned"));
            if set.is_empty() {
                return Ok(());
            }
            while let Some(r) = set.join_next().await {
                r.map_err(|e| PipelineError::Task(e.to_string()))?;
            }
        }
    }
}

impl Inner {
    async fn raise(&self, alert: &Alert) -> Result<EventRecord, PipelineError> {
        let rec = self.log.append(EventKind::Alert, alert)?;
        let counter = match alert.severity {
            Severity::Alarm => &self.counters.alarm,
            Severity::Review => &self.counters.review,
            Severity::Breach => &self.counters.breach,
        };
        counter.fetch_add(1, Ordering::Relaxed);
        self.sinks.deliver(alert, &rec).await;
        Ok(rec)
    }

    async fn handle_verdict(&self, v: Verdict) -> Result<Option<Alert>, PipelineError> {
        let snap = self.pending.lock().expect("pending lock poisoned").remove(&v.request_id);
        let Some(snap) = snap else {
            self.counters.anomalies.fetch_add(1, Ordering::Relaxed);
            self.log.append(EventKind::Anomaly, json!({"message": "verdict for unknown request", "request_id": v.request_id, "decision": v.decision}))?;
            return Ok(None);
        };
        self.log.append(EventKind::Verdict, &v)?;
        let severity = match v.decision {
            Decision::Admissible => {
                self.counters.admissible.fetch_add(1, Ordering::Relaxed);
                return Ok(None);
            }
            Decision::Inadmissible => {
                self.counters.inadmissible.fetch_add(1, Ordering::Relaxed);
                Severity::Alarm
            }
            Decision::Indeterminate => {
                self.counters.indeterminate.fetch_add(1, Ordering::Relaxed);
                Severity::Review
            }
        };
        let alert = Alert {
            severity,
            camera_id: snap.camera_id.clone(),
            captured_at: snap.ts,
            full_image_path: snap.full_image_path.clone(),
            face_image_path: snap.face_image_path.clone(),
            request_id: Some(v.request_id.clone()),
            hits: v.hits,
            databases_unavailable: v.databases_unavailable,
            flag: None,
            similarity: None,
            signature: if severity == Severity::Alarm { snap.signature.clone() } else { None },
        };
        let rec = self.raise(&alert).await?;
        if let (Severity::Alarm, Some(signature)) = (severity, snap.signature) {
            self.flags.lock().expect("flag lock poisoned").add(Flag {
                signature,
                first_flagged_ts: snap.ts,
                request_id: v.request_id,
                camera_id: snap.camera_id,
                alert_seq: rec.seq,
            });
        }
        Ok(Some(alert))
    }
}
