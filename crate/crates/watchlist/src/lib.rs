//! The watchlist side of screening: an embedded HTTP service hosting several
//! named record databases, and a client that checks one face signature
//! against all of them concurrently and folds the answers into a [`Verdict`].

pub mod client;
pub mod model;
pub mod service;

pub use client::{fan_out_check, ClientError, Endpoint, WatchlistClient};
pub use model::{CheckRequest, CheckResponse, DbHit, Decision, Hit, RecordBody, Status, Verdict, WatchRecord};
pub use service::{LatencyRange, ServiceConfig, WatchlistService};
