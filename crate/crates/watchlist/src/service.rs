//! Embedded mock watchlist: named in-memory databases behind a JSON HTTP API.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use rand::Rng;
use sentinel_core::imaging::read_image;
use sentinel_core::signature::DEFAULT_TAU;
use sentinel_core::Signature;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::net::TcpListener;

use crate::model::{CheckRequest, CheckResponse, Hit, RecordBody, Status, WatchRecord};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid service config: {0}")]
    Config(String),
    #[error("record {record}: {message}")]
    Record { record: String, message: String },
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server error: {0}")]
    Serve(std::io::Error),
}

/// Inclusive artificial latency range in milliseconds, written `LO:HI` (or a single `N`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatencyRange {
    pub lo_ms: u64,
    pub hi_ms: u64,
}

impl LatencyRange {
    pub fn new(lo_ms: u64, hi_ms: u64) -> Result<Self, String> {
        if lo_ms > hi_ms {
            return Err(format!("latency range {lo_ms}:{hi_ms} is empty"));
        }
        Ok(LatencyRange { lo_ms, hi_ms })
    }

    pub fn fixed(ms: u64) -> Self {
        LatencyRange { lo_ms: ms, hi_ms: ms }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Duration {
        Duration::from_millis(rng.random_range(self.lo_ms..=self.hi_ms))
    }
}

impl FromStr for LatencyRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("bad latency {s:?}, expected LO:HI in ms"));
        match s.split_once(':') {
            Some((lo, hi)) => LatencyRange::new(num(lo)?, num(hi)?),
            None => Ok(LatencyRange::fixed(num(s)?)),
        }
    }
}

impl fmt::Display for LatencyRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo_ms, self.hi_ms)
    }
}

impl Serialize for LatencyRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LatencyRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Ms(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Ms(ms) => Ok(LatencyRange::fixed(ms)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// One seeded record in a config file. Exactly one of `signature` or
/// `face_image` (a PGM/PPM path, relative to the config file) must be given.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRecord {
    pub record_id: String,
    pub name: String,
    pub status: Status,
    #[serde(default)]
    pub details: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<Signature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_image: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedDatabase {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<LatencyRange>,
    #[serde(default)]
    pub records: Vec<SeedRecord>,
}

/// On-disk service configuration; also the format of shutdown snapshots.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<LatencyRange>,
    #[serde(default)]
    pub databases: BTreeMap<String, SeedDatabase>,
    /// Where to write the store on shutdown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { tau: DEFAULT_TAU, latency_ms: None, databases: BTreeMap::new(), snapshot: None }
    }
}

impl ServiceConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ServiceError::Io { path: path.into(), source })?;
        let mut cfg: ServiceConfig = serde_json::from_str(&text).map_err(|e| ServiceError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for db in cfg.databases.values_mut() {
            for r in &mut db.records {
                if let Some(p) = r.face_image.as_mut().filter(|p| p.is_relative()) {
                    *p = base.join(&*p);
                }
            }
        }
        if let Some(p) = cfg.snapshot.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        Ok(cfg)
    }
}

fn resolve(r: &SeedRecord) -> Result<WatchRecord, ServiceError> {
    let err = |message: String| ServiceError::Record { record: r.record_id.clone(), message };
    let signature = match (&r.signature, &r.face_image) {
        (Some(s), None) => s.clone(),
        (None, Some(path)) => {
            let img = read_image(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
            Signature::from_crop(&img.to_gray()).map_err(|e| err(e.to_string()))?
        }
        _ => return Err(err("exactly one of signature or face_image is required".into())),
    };
    Ok(WatchRecord { record_id: r.record_id.clone(), name: r.name.clone(), status: r.status, signature, details: r.details.clone() })
}

type Store = BTreeMap<String, BTreeMap<String, WatchRecord>>;

struct Shared {
    tau: f64,
    latency: Option<LatencyRange>,
    db_latency: HashMap<String, LatencyRange>,
    store: RwLock<Store>,
    snapshot: Option<PathBuf>,
}

/// The service state; cheap to clone, all clones share one store.
#[derive(Clone)]
pub struct WatchlistService {
    shared: Arc<Shared>,
}

impl WatchlistService {
    pub fn new(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        if !(cfg.tau > -1.0 && cfg.tau <= 1.0) {
            return Err(ServiceError::Config(format!("tau {} outside (-1, 1]", cfg.tau)));
        }
        let mut store = Store::new();
        let mut db_latency = HashMap::new();
        for (name, db) in &cfg.databases {
            let table = store.entry(name.clone()).or_default();
            for r in &db.records {
                table.insert(r.record_id.clone(), resolve(r)?);
            }
            if let Some(l) = db.latency_ms {
                db_latency.insert(name.clone(), l);
            }
        }
        Ok(WatchlistService {
            shared: Arc::new(Shared {
                tau: cfg.tau,
                latency: cfg.latency_ms,
                db_latency,
                store: RwLock::new(store),
                snapshot: cfg.snapshot.clone(),
            }),
        })
    }

    pub fn tau(&self) -> f64 {
        self.shared.tau
    }

    pub fn upsert(&self, db: &str, record: WatchRecord) {
        let mut store = self.shared.store.write().expect("store lock poisoned");
        store.entry(db.to_string()).or_default().insert(record.record_id.clone(), record);
    }

    pub fn records(&self, db: &str) -> Option<Vec<WatchRecord>> {
        let store = self.shared.store.read().expect("store lock poisoned");
        store.get(db).map(|t| t.values().cloned().collect())
    }

    pub fn databases(&self) -> Vec<String> {
        self.shared.store.read().expect("store lock poisoned").keys().cloned().collect()
    }

    /// Scores every non-clear record; `None` if the database does not exist.
    pub fn check(&self, db: &str, signature: &Signature) -> Option<Vec<Hit>> {
        let store = self.shared.store.read().expect("store lock poisoned");
        let table = store.get(db)?;
        let mut hits: Vec<Hit> = table
            .values()
            .filter(|r| r.status != Status::Clear)
            .filter_map(|r| {
                let score = r.signature.similarity(signature);
                (score >= self.shared.tau).then(|| Hit { record_id: r.record_id.clone(), status: r.status, score, details: r.details.clone() })
            })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.record_id.cmp(&b.record_id)));
        Some(hits)
    }

    /// Current store in config form, with inline signatures.
    pub fn to_config(&self) -> ServiceConfig {
        let store = self.shared.store.read().expect("store lock poisoned");
        let databases = store
            .iter()
            .map(|(name, table)| {
                let records = table
                    .values()
                    .map(|r| SeedRecord {
                        record_id: r.record_id.clone(),
                        name: r.name.clone(),
                        status: r.status,
                        details: r.details.clone(),
                        signature: Some(r.signature.clone()),
                        face_image: None,
                    })
                    .collect();
                (name.clone(), SeedDatabase { latency_ms: self.shared.db_latency.get(name).copied(), records })
            })
            .collect();
        ServiceConfig { tau: self.shared.tau, latency_ms: self.shared.latency, databases, snapshot: None }
    }

    /// Writes the store to the configured snapshot path, if any.
    pub fn write_snapshot(&self) -> Result<Option<PathBuf>, ServiceError> {
        let Some(path) = &self.shared.snapshot else { return Ok(None) };
        let text = serde_json::to_string_pretty(&self.to_config()).expect("config serializes");
        std::fs::write(path, text).map_err(|source| ServiceError::Io { path: path.clone(), source })?;
        Ok(Some(path.clone()))
    }

    fn latency_for(&self, db: &str) -> Option<LatencyRange> {
        self.shared.db_latency.get(db).copied().or(self.shared.latency)
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/v1/health", get(health))
            .route("/v1/databases/{db}/records", get(list_records))
            .route("/v1/databases/{db}/records/{id}", axum::routing::put(put_record))
            .route("/v1/databases/{db}/check", post(check))
            .with_state(self.clone())
    }

    /// Serves on `listener` until `shutdown` resolves, then writes the snapshot.
    pub async fn serve(self, listener: TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServiceError> {
        axum::serve(listener, self.router()).with_graceful_shutdown(shutdown).await.map_err(ServiceError::Serve)?;
        if let Some(path) = self.write_snapshot()? {
            log::info!("store snapshot written to {}", path.display());
        }
        Ok(())
    }

    /// Binds `addr` and serves in a background task. Dropping the handle stops the server.
    pub async fn spawn(self, addr: SocketAddr) -> Result<RunningService, ServiceError> {
        let listener = TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind { addr, source })?;
        let local = listener.local_addr().map_err(ServiceError::Serve)?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let task = tokio::spawn(self.serve(listener, async {
            let _ = rx.await;
        }));
        Ok(RunningService { addr: local, stop: Some(tx), task: Some(task) })
    }
}

/// A server started with [`WatchlistService::spawn`].
pub struct RunningService {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    task: Option<tokio::task::JoinHandle<Result<(), ServiceError>>>,
}

impl RunningService {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn shutdown(mut self) -> Result<(), ServiceError> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.task.take() {
            Some(task) => task.await.map_err(|e| ServiceError::Serve(std::io::Error::other(e)))?,
            None => Ok(()),
        }
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        if let Some(task) = &self.task {
            task.abort();
        }
    }
}

fn error(code: StatusCode, message: impl fmt::Display) -> Response {
    (code, Json(json!({ "error": message.to_string() }))).into_response()
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn list_records(State(svc): State<WatchlistService>, UrlPath(db): UrlPath<String>) -> Response {
    match svc.records(&db) {
        Some(records) => Json(json!({ "database": db, "records": records })).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown database {db:?}")),
    }
}

async fn put_record(State(svc): State<WatchlistService>, UrlPath((db, id)): UrlPath<(String, String)>, body: Bytes) -> Response {
    let body: RecordBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    log::debug!("upsert {db}/{id}");
    svc.upsert(&db, WatchRecord::from_body(id.clone(), body));
    Json(json!({ "database": db, "record_id": id })).into_response()
}

fn parse_check(body: &[u8]) -> Result<CheckRequest, String> {
    let req: CheckRequest = serde_json::from_slice(body).map_err(|e| e.to_string())?;
    if req.request_id.is_empty() {
        return Err("request_id must be nonempty".into());
    }
    base64::engine::general_purpose::STANDARD.decode(&req.face_image).map_err(|e| format!("face_image: {e}"))?;
    Ok(req)
}

async fn check(State(svc): State<WatchlistService>, UrlPath(db): UrlPath<String>, body: Bytes) -> Response {
    if svc.records(&db).is_none() {
        return error(StatusCode::NOT_FOUND, format!("unknown database {db:?}"));
    }
    let req = match parse_check(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    if let Some(range) = svc.latency_for(&db) {
        let delay = range.sample(&mut rand::rng());
        tokio::time::sleep(delay).await;
    }
    let hits = svc.check(&db, &req.signature).unwrap_or_default();
    log::info!("check {} on {db}: {} hit(s)", req.request_id, hits.len());
    Json(CheckResponse { request_id: req.request_id, database: db, hits }).into_response()
}
