use std::io::Write;
use std::path::Path;
use std::time::Duration;

use sentinel_core::boost::{build_cascade, gen_features, load_windows, BuildStatus, CascadeTargets, WindowSource};
use sentinel_core::cascade_xml::{load_cascade, save_cascade};
use sentinel_core::haar::detect_multiscale;
use sentinel_core::imaging::{draw_rect, read_image, write_image, AnyImage};
use sentinel_core::{DetectParams, Signature};
use sentinel_pipeline::PipelineConfig;
use sentinel_watchlist::{CheckRequest, Endpoint, ServiceConfig, WatchlistClient, WatchlistService};
use serde_json::json;

use crate::{CheckArgs, CliError, DetectArgs, TrainArgs, WatchArgs, WatchlistdArgs};

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn print_json(v: &impl serde::Serialize) {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, v).expect("stdout JSON");
    let _ = writeln!(out);
    let _ = out.flush();
}

fn tokio_runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(runtime)
}

pub fn detect(a: DetectArgs) -> Result<(), CliError> {
    let params = DetectParams { scale_factor: a.scale_factor, min_neighbors: a.min_neighbors, min_size: a.min_size, step_fraction: a.step_fraction, ..DetectParams::default() };
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let cascade = load_cascade(&a.cascade).map_err(|e| CliError::Runtime(format!("{}: {e}", a.cascade.display())))?;
    let image = read_image(&a.input).map_err(|e| CliError::Runtime(format!("{}: {e}", a.input.display())))?;
    let found = detect_multiscale(&cascade, &image.to_gray(), &params).map_err(runtime)?;
    log::info!("{} detection(s) in {}", found.len(), a.input.display());
    if let Some(path) = &a.out {
        std::fs::write(path, serde_json::to_vec(&found).expect("rects serialize")).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &a.annotated {
        let boxed = found.iter().fold(image.to_color(), |img, &r| draw_rect(&img, r, [255, 0, 0], 2));
        write_image(&AnyImage::Color(boxed), path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    print_json(&found);
    Ok(())
}

fn status_name(s: BuildStatus) -> &'static str {
    match s {
        BuildStatus::Complete => "complete",
        BuildStatus::NegativesExhausted => "negatives_exhausted",
        BuildStatus::MaxStages => "max_stages",
    }
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let targets = CascadeTargets { d_min: a.dmin, f_max: a.fmax, f_target: a.ftarget, max_stages: a.stages };
    targets.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if a.window < 4 {
        return Err(CliError::Usage(format!("--window {} is below the 4 pixel minimum", a.window)));
    }
    if a.feature_stride == 0 {
        return Err(CliError::Usage("--feature-stride must be at least 1".into()));
    }
    let load = |dir: &Path, source| load_windows(dir, a.window, a.window, source).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())));
    let pos = load(&a.pos, WindowSource::Resize)?;
    let neg = load(&a.neg, WindowSource::RandomCrops { per_image: a.neg_crops, seed: a.seed })?;
    if pos.is_empty() || neg.is_empty() {
        return Err(CliError::Runtime(format!("need labelled samples: {} positive, {} negative windows", pos.len(), neg.len())));
    }
    let features = gen_features(a.window, a.window, a.feature_stride);
    log::info!("training on {} positives, {} negatives, {} features", pos.len(), neg.len(), features.len());
    let out = build_cascade(&pos, &neg, &targets, &features).map_err(runtime)?;
    save_cascade(&out.cascade, &a.out).map_err(|e| CliError::Runtime(format!("{}: {e}", a.out.display())))?;

    eprintln!("{:>5} {:>6} {:>7} {:>7} {:>9}", "stage", "stumps", "TPR", "FPR", "negatives");
    for (i, s) in out.stages.iter().enumerate() {
        eprintln!("{:>5} {:>6} {:>7.4} {:>7.4} {:>9}", i + 1, s.stumps, s.tpr, s.fpr, s.negatives);
    }
    print_json(&json!({
        "out": a.out,
        "status": status_name(out.status),
        "cumulative_fpr": out.cumulative_fpr,
        "stages": out.stages.iter().map(|s| json!({"stumps": s.stumps, "tpr": s.tpr, "fpr": s.fpr, "negatives": s.negatives})).collect::<Vec<_>>(),
    }));
    match out.status {
        BuildStatus::Complete => Ok(()),
        BuildStatus::MaxStages => {
            log::warn!("stopped at {} stages before reaching the false-positive target", out.stages.len());
            Ok(())
        }
        BuildStatus::NegativesExhausted => Err(CliError::Runtime(format!(
            "negatives exhausted after {} stage(s); partial cascade written to {}",
            out.stages.len(),
            a.out.display()
        ))),
    }
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()).expect("SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = tokio::signal::ctrl_c().await;
}

pub fn watchlistd(a: WatchlistdArgs) -> Result<(), CliError> {
    let mut cfg = ServiceConfig::from_file(&a.config).map_err(runtime)?;
    if a.latency_ms.is_some() {
        cfg.latency_ms = a.latency_ms;
    }
    let service = WatchlistService::new(&cfg).map_err(runtime)?;
    tokio_runtime()?.block_on(async {
        let addr = std::net::SocketAddr::new(a.bind, a.port);
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::Runtime(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(runtime)?;
        log::info!("serving databases {:?} on http://{local}", service.databases());
        print_json(&json!({"listening": format!("http://{local}"), "databases": service.databases()}));
        service.serve(listener, shutdown_signal()).await.map_err(runtime)
    })
}

pub fn watch(a: WatchArgs) -> Result<(), CliError> {
    let cfg = PipelineConfig::from_file(&a.config).map_err(runtime)?;
    let summary = tokio_runtime()?.block_on(sentinel_pipeline::run(&cfg)).map_err(runtime)?;
    log::info!("{} frame(s), {} check(s), event log {}", summary.frames, summary.checks, cfg.event_log.display());
    print_json(&summary);
    Ok(())
}

pub fn check(a: CheckArgs) -> Result<(), CliError> {
    let endpoints = Endpoint::parse_list(&a.endpoints).map_err(|e| CliError::Usage(e.to_string()))?;
    let client = WatchlistClient::new(endpoints, Duration::from_millis(a.timeout_ms)).map_err(|e| CliError::Usage(e.to_string()))?;
    let face = read_image(&a.face).map_err(|e| CliError::Runtime(format!("{}: {e}", a.face.display())))?.to_gray();
    let signature = Signature::from_crop(&face).map_err(|e| CliError::Runtime(format!("{}: {e}", a.face.display())))?;
    let req = CheckRequest::new(signature, &face, a.camera_id, chrono::Utc::now());
    let verdict = tokio_runtime()?.block_on(client.check(&req)).with_min_score(a.tau);
    print_json(&verdict);
    Ok(())
}
