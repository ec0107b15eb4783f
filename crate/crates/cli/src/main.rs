//! `sentinel`: command-line front end for detection, training, the mock
//! watchlist service, the screening pipeline and one-off checks.
//!
//! Machine-readable output goes to standard output as JSON; diagnostics go to
//! standard error. Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sentinel_core::haar::DEFAULT_STEP_FRACTION;
use sentinel_core::signature::DEFAULT_TAU;
use thiserror::Error;

#[derive(Parser, Debug)]
#[command(name = "sentinel", version, about = "Face screening against watchlists from camera frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect faces (or other objects) in one image with a cascade model.
    Detect(DetectArgs),
    /// Train a cascade model from positive and negative image directories.
    Train(TrainArgs),
    /// Serve the mock watchlist HTTP API.
    Watchlistd(WatchlistdArgs),
    /// Run the screening pipeline over a directory of frames.
    Watch(WatchArgs),
    /// Check one face image against watchlist databases and print the verdict.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// Cascade model (XML).
    #[arg(long)]
    cascade: PathBuf,
    /// Input image (binary PGM or PPM).
    #[arg(long)]
    input: PathBuf,
    /// Scale step between detection passes.
    #[arg(long, default_value_t = 1.1)]
    scale_factor: f64,
    /// Minimum number of overlapping raw detections needed to report a face.
    #[arg(long, default_value_t = 4)]
    min_neighbors: usize,
    /// Smallest reported window, as WxH (default: the model's window).
    #[arg(long, value_parser = parse_size)]
    min_size: Option<(u32, u32)>,
    /// Scan stride as a fraction of the window width.
    #[arg(long, default_value_t = DEFAULT_STEP_FRACTION)]
    step_fraction: f64,
    /// Also write the detections JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a copy of the image with detections boxed (PPM).
    #[arg(long)]
    annotated: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory of positive (face) images; each is resized to the window.
    #[arg(long)]
    pos: PathBuf,
    /// Directory of negative images; larger ones are sampled with random crops.
    #[arg(long)]
    neg: PathBuf,
    /// Where to write the cascade XML.
    #[arg(long)]
    out: PathBuf,
    /// Maximum number of stages.
    #[arg(long, default_value_t = 10)]
    stages: usize,
    /// Minimum per-stage detection rate.
    #[arg(long, default_value_t = 0.99)]
    dmin: f64,
    /// Maximum per-stage false-positive rate.
    #[arg(long, default_value_t = 0.5)]
    fmax: f64,
    /// Overall false-positive target; training stops once reached.
    #[arg(long, default_value_t = 0.125)]
    ftarget: f64,
    /// Seed for negative crop sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Square training window side in pixels.
    #[arg(long, default_value_t = 24)]
    window: u32,
    /// Grid step for feature positions and sizes (1 = exhaustive, slow).
    #[arg(long, default_value_t = 2)]
    feature_stride: u32,
    /// Random crops taken from each negative image larger than the window.
    #[arg(long, default_value_t = 10)]
    neg_crops: usize,
}

#[derive(Args, Debug)]
struct WatchlistdArgs {
    /// TCP port (0 picks a free one).
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    /// Databases and seed records (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Artificial response latency for every database, LO:HI in milliseconds.
    #[arg(long)]
    latency_ms: Option<sentinel_watchlist::LatencyRange>,
}

#[derive(Args, Debug)]
struct WatchArgs {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Face crop (PGM or PPM).
    #[arg(long)]
    face: PathBuf,
    /// Comma-separated NAME=URL list, e.g. police=http://127.0.0.1:8080.
    #[arg(long)]
    endpoints: String,
    /// Minimum similarity for a hit.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Per-database timeout in milliseconds.
    #[arg(long, default_value_t = 2000)]
    timeout_ms: u64,
    /// Camera id sent with the request.
    #[arg(long, default_value = "cli")]
    camera_id: String,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let n = |t: &str| t.parse::<u32>().map_err(|_| format!("expected WxH, got {s:?}"));
    Ok((n(w)?, n(h)?))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect(a) => commands::detect(a),
        Command::Train(a) => commands::train(a),
        Command::Watchlistd(a) => commands::watchlistd(a),
        Command::Watch(a) => commands::watch(a),
        Command::Check(a) => commands::check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
