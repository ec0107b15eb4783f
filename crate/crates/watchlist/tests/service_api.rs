use chrono::Utc;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sentinel_core::{GrayImage, Signature};
use sentinel_watchlist::service::SeedDatabase;
use sentinel_watchlist::{CheckRequest, CheckResponse, ServiceConfig, Status, WatchRecord, WatchlistService};
use serde_json::{json, Value};

fn face(seed: u32) -> GrayImage {
    GrayImage::from_fn(40, 40, |x, y| ((x * 7 + y * 13 + seed * 31) % 251) as u8 ^ ((x * y + seed) % 17) as u8)
}

fn sig(seed: u32) -> Signature {
    Signature::from_crop(&face(seed)).unwrap()
}

fn noise_sig(rng: &mut ChaCha8Rng) -> Signature {
    use rand::Rng;
    let img = GrayImage::from_fn(32, 32, |_, _| rng.random());
    Signature::from_crop(&img).unwrap()
}

fn record(id: &str, status: Status, s: Signature) -> WatchRecord {
    WatchRecord { record_id: id.into(), name: format!("person {id}"), status, signature: s, details: format!("details of {id}") }
}

async fn start(svc: &WatchlistService) -> (sentinel_watchlist::service::RunningService, reqwest::Client) {
    (svc.clone().spawn(([127, 0, 0, 1], 0).into()).await.unwrap(), reqwest::Client::new())
}

fn check_body(s: &Signature) -> Value {
    serde_json::to_value(CheckRequest::new(s.clone(), &face(1), "cam-1", Utc::now())).unwrap()
}

#[tokio::test]
async fn health_is_ok() {
    let svc = WatchlistService::new(&ServiceConfig::default()).unwrap();
    let (srv, http) = start(&svc).await;
    let body: Value = http.get(format!("{}/v1/health", srv.base_url())).send().await.unwrap().json().await.unwrap();
    assert_eq!(body, json!({"status": "ok"}));
}

#[tokio::test]
async fn put_then_list_and_upsert_semantics() {
    let svc = WatchlistService::new(&ServiceConfig::default()).unwrap();
    let (srv, http) = start(&svc).await;
    let url = format!("{}/v1/databases/police/records/p1", srv.base_url());
    let put = |name: &str| json!({"name": name, "status": "wanted", "signature": sig(3), "details": "armed"});
    assert_eq!(http.put(&url).json(&put("first")).send().await.unwrap().status(), 200);
    assert_eq!(http.put(&url).json(&put("second")).send().await.unwrap().status(), 200);

    let list: Value = http.get(format!("{}/v1/databases/police/records", srv.base_url())).send().await.unwrap().json().await.unwrap();
    let records = list["records"].as_array().unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["record_id"], "p1");
    assert_eq!(records[0]["name"], "second");
    assert_eq!(records[0]["status"], "wanted");
}

#[tokio::test]
async fn invalid_record_bodies_are_rejected() {
    let svc = WatchlistService::new(&ServiceConfig::default()).unwrap();
    let (srv, http) = start(&svc).await;
    let url = format!("{}/v1/databases/police/records/p1", srv.base_url());
    let short: Vec<f64> = sig(1).components()[..1000].to_vec();
    let bad = [
        json!({"name": "x", "status": "wanted", "signature": short, "details": ""}),
        json!({"name": "x", "status": "missing", "signature": sig(1), "details": ""}),
        json!({"name": "x", "status": "wanted", "signature": vec![0.5; 1024], "details": ""}),
    ];
    for body in bad {
        assert_eq!(http.put(&url).json(&body).send().await.unwrap().status(), 400, "{body}");
    }
    assert_eq!(http.put(&url).body("not json").send().await.unwrap().status(), 400);
    assert!(svc.records("police").is_none(), "rejected puts must not create the database");
}

#[tokio::test]
async fn check_errors() {
    let svc = WatchlistService::new(&ServiceConfig::default()).unwrap();
    svc.upsert("police", record("p1", Status::Wanted, sig(1)));
    let (srv, http) = start(&svc).await;
    let unknown = http.post(format!("{}/v1/databases/nowhere/check", srv.base_url())).json(&check_body(&sig(1))).send().await.unwrap();
    assert_eq!(unknown.status(), 404);
    assert_eq!(http.get(format!("{}/v1/databases/nowhere/records", srv.base_url())).send().await.unwrap().status(), 404);

    let url = format!("{}/v1/databases/police/check", srv.base_url());
    assert_eq!(http.post(&url).body("{").send().await.unwrap().status(), 400);
    let mut empty_id = check_body(&sig(1));
    empty_id["request_id"] = json!("");
    assert_eq!(http.post(&url).json(&empty_id).send().await.unwrap().status(), 400);
    let mut bad_b64 = check_body(&sig(1));
    bad_b64["face_image"] = json!("***");
    assert_eq!(http.post(&url).json(&bad_b64).send().await.unwrap().status(), 400);
}

#[tokio::test]
async fn self_match_scores_one_and_echoes_request_id() {
    let svc = WatchlistService::new(&ServiceConfig::default()).unwrap();
    svc.upsert("police", record("p1", Status::Wanted, sig(1)));
    svc.upsert("police", record("p2", Status::Criminal, sig(2)));
    let (srv, http) = start(&svc).await;
    let body = check_body(&sig(1));
    let resp: CheckResponse =
        http.post(format!("{}/v1/databases/police/check", srv.base_url())).json(&body).send().await.unwrap().json().await.unwrap();
    assert_eq!(resp.request_id, body["request_id"].as_str().unwrap());
    assert_eq!(resp.hits.len(), 1);
    assert_eq!(resp.hits[0].record_id, "p1");
    assert!((resp.hits[0].score - 1.0).abs() <= 1e-6);
}

#[test]
fn hits_are_sorted_and_clear_never_hits() {
    let svc = WatchlistService::new(&ServiceConfig { tau: -0.99, ..Default::default() }).unwrap();
    let q = sig(1);
    svc.upsert("db", record("same", Status::Wanted, q.clone()));
    svc.upsert("db", record("clear", Status::Clear, q.clone()));
    svc.upsert("db", record("other", Status::Extremist, sig(9)));
    let hits = svc.check("db", &q).unwrap();
    assert!(hits.iter().all(|h| h.record_id != "clear"));
    assert_eq!(hits.len(), 2);
    assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
    assert_eq!(hits[0].record_id, "same");
}

#[test]
fn noise_database_has_no_hits() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let svc = WatchlistService::new(&ServiceConfig::default()).unwrap();
        for i in 0..200 {
            svc.upsert("noise", record(&format!("n{i}"), Status::Wanted, noise_sig(&mut rng)));
        }
        let probe = noise_sig(&mut rng);
        assert_eq!(svc.check("noise", &probe).unwrap(), vec![], "seed {seed}");
    }
}

#[test]
fn config_file_with_face_images_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    sentinel_core::imaging::write_image(&face(4).into(), dir.path().join("f.pgm")).unwrap();
    let cfg = json!({
        "tau": 0.9,
        "latency_ms": "0:5",
        "databases": {
            "police": {"records": [{"record_id": "a", "name": "A", "status": "wanted", "face_image": "f.pgm"}]},
            "interpol": {"latency_ms": 3, "records": [{"record_id": "b", "name": "B", "status": "criminal", "signature": sig(5)}]}
        },
        "snapshot": "snap.json"
    });
    std::fs::write(dir.path().join("dbs.json"), cfg.to_string()).unwrap();
    let cfg = ServiceConfig::from_file(dir.path().join("dbs.json")).unwrap();
    let svc = WatchlistService::new(&cfg).unwrap();
    assert_eq!(svc.databases(), vec!["interpol", "police"]);
    assert_eq!(svc.check("police", &sig(4)).unwrap().len(), 1);

    let path = svc.write_snapshot().unwrap().unwrap();
    let reloaded = WatchlistService::new(&ServiceConfig::from_file(&path).unwrap()).unwrap();
    assert_eq!(reloaded.records("police"), svc.records("police"));
    assert_eq!(reloaded.records("interpol"), svc.records("interpol"));

    let both = ServiceConfig {
        databases: [("x".to_string(), SeedDatabase::default())].into(),
        ..Default::default()
    };
    assert!(WatchlistService::new(&both).unwrap().records("x").unwrap().is_empty());
}

#[test]
fn seed_record_needs_exactly_one_signature_source() {
    let cfg: ServiceConfig = serde_json::from_value(json!({
        "databases": {"d": {"records": [{"record_id": "a", "name": "A", "status": "wanted"}]}}
    }))
    .unwrap();
    assert!(WatchlistService::new(&cfg).is_err());
}

#[tokio::test]
async fn snapshot_written_on_shutdown() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("s.json");
    let svc = WatchlistService::new(&ServiceConfig { snapshot: Some(snap.clone()), ..Default::default() }).unwrap();
    let (srv, http) = start(&svc).await;
    let url = format!("{}/v1/databases/gov/records/g1", srv.base_url());
    http.put(&url).json(&json!({"name": "G", "status": "undocumented", "signature": sig(8), "details": ""})).send().await.unwrap();
    srv.shutdown().await.unwrap();
    let back = ServiceConfig::from_file(&snap).unwrap();
    assert_eq!(back.databases["gov"].records[0].record_id, "g1");
}
