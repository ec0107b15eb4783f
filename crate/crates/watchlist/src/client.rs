//! Concurrent fan-out of one check request to every configured database.

use std::str::FromStr;
use std::time::Duration;

use futures::future::join_all;
use thiserror::Error;

use crate::model::{CheckRequest, CheckResponse, Hit, Verdict};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("no watchlist endpoints configured")]
    NoEndpoints,
    #[error("bad endpoint {0:?}, expected NAME=URL")]
    BadEndpoint(String),
    #[error("{database}: timed out after {ms} ms")]
    Timeout { database: String, ms: u128 },
    #[error("{database}: {source}")]
    Http { database: String, source: reqwest::Error },
    #[error("{database}: HTTP {status}: {body}")]
    Status { database: String, status: u16, body: String },
    #[error("{database}: response echoes request {got:?}, expected {expected:?}")]
    Mismatch { database: String, expected: String, got: String },
}

/// A logical database and the base URL of the service hosting it.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Endpoint {
    pub database: String,
    pub base_url: String,
}

impl Endpoint {
    pub fn new(database: impl Into<String>, base_url: impl Into<String>) -> Self {
        Endpoint { database: database.into(), base_url: base_url.into().trim_end_matches('/').to_string() }
    }

    fn check_url(&self) -> String {
        format!("{}/v1/databases/{}/check", self.base_url, self.database)
    }

    /// Parses a comma-separated `name=URL` list.
    pub fn parse_list(s: &str) -> Result<Vec<Endpoint>, ClientError> {
        s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
    }
}

impl FromStr for Endpoint {
    type Err = ClientError;

    fn from_str(s: &str) -> Result<Self, ClientError> {
        match s.trim().split_once('=') {
            Some((name, url)) if !name.is_empty() && !url.is_empty() => Ok(Endpoint::new(name, url)),
            _ => Err(ClientError::BadEndpoint(s.to_string())),
        }
    }
}

#[derive(Clone, Debug)]
pub struct WatchlistClient {
    http: reqwest::Client,
    endpoints: Vec<Endpoint>,
    timeout: Duration,
}

impl WatchlistClient {
    /// `timeout` applies to each database separately.
    pub fn new(endpoints: Vec<Endpoint>, timeout: Duration) -> Result<Self, ClientError> {
        if endpoints.is_empty() {
            return Err(ClientError::NoEndpoints);
        }
        Ok(WatchlistClient { http: reqwest::Client::new(), endpoints, timeout })
    }

    pub fn endpoints(&self) -> &[Endpoint] {
        &self.endpoints
    }

    async fn check_one(&self, ep: &Endpoint, req: &CheckRequest) -> Result<Vec<Hit>, ClientError> {
        let database = ep.database.clone();
        let call = async {
            let resp = self.http.post(ep.check_url()).json(req).send().await.map_err(|source| ClientError::Http { database: database.clone(), source })?;
            let status = resp.status();
            if !status.is_success() {
                let body = resp.text().await.unwrap_or_default();
                return Err(ClientError::Status { database: database.clone(), status: status.as_u16(), body });
            }
            let body: CheckResponse = resp.json().await.map_err(|source| ClientError::Http { database: database.clone(), source })?;
            if body.request_id != req.request_id {
                return Err(ClientError::Mismatch { database: database.clone(), expected: req.request_id.clone(), got: body.request_id });
            }
            Ok(body.hits)
        };
        match tokio::time::timeout(self.timeout, call).await {
            Ok(r) => r,
            Err(_) => Err(ClientError::Timeout { database, ms: self.timeout.as_millis() }),
        }
    }

    /// Queries every database concurrently and aggregates the answers.
    pub async fn check(&self, req: &CheckRequest) -> Verdict {
        let calls = self.endpoints.iter().map(|ep| async move { (ep.database.clone(), self.check_one(ep, req).await) });
        let outcomes = join_all(calls).await;
        for (_, o) in &outcomes {
            if let Err(e) = o {
                log::warn!("request {}: {e}", req.request_id);
            }
        }
        Verdict::aggregate(&req.request_id, outcomes)
    }

    /// Probes `/v1/health` on every endpoint concurrently.
    pub async fn health(&self) -> Vec<(String, Result<(), ClientError>)> {
        let probes = self.endpoints.iter().map(|ep| async move {
            let database = ep.database.clone();
            let call = async {
                let resp = self
                    .http
                    .get(format!("{}/v1/health", ep.base_url))
                    .send()
                    .await
                    .map_err(|source| ClientError::Http { database: database.clone(), source })?;
                match resp.status() {
                    s if s.is_success() => Ok(()),
                    s => Err(ClientError::Status { database: database.clone(), status: s.as_u16(), body: String::new() }),
                }
            };
            let r = match tokio::time::timeout(self.timeout, call).await {
                Ok(r) => r,
                Err(_) => Err(ClientError::Timeout { database: database.clone(), ms: self.timeout.as_millis() }),
            };
            (database, r)
        });
        join_all(probes).await
    }
}

/// One-shot convenience over [`WatchlistClient::check`].
pub async fn fan_out_check(endpoints: &[Endpoint], req: &CheckRequest, timeout: Duration) -> Result<Verdict, ClientError> {
    Ok(WatchlistClient::new(endpoints.to_vec(), timeout)?.check(req).await)
}
