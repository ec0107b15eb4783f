use std::path::PathBuf;
use std::time::Duration;

use chrono::{DateTime, Utc};
use sentinel_core::Signature;
use sentinel_watchlist::DbHit;
use serde::{Deserialize, Serialize};

use crate::events::EventRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    /// Inadmissible verdict.
    Alarm,
    /// No hits, but a database could not be consulted.
    Review,
    /// A previously flagged face was seen again.
    Breach,
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Severity::Alarm => "alarm",
            Severity::Review => "review",
            Severity::Breach => "breach",
        })
    }
}

/// Points back at the alarm that first flagged a face.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlagRef {
    pub alert_seq: u64,
    pub request_id: String,
    pub camera_id: String,
    pub first_flagged_ts: DateTime<Utc>,
}

/// Payload of an `alert` event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub severity: Severity,
    pub camera_id: String,
    pub captured_at: DateTime<Utc>,
    pub full_image_path: PathBuf,
    pub face_image_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    #[serde(default)]
    pub hits: Vec<DbHit>,
    #[serde(default)]
    pub databases_unavailable: Vec<String>,
    /// Breach only: the original flag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<FlagRef>,
    /// Breach only: similarity to the flagged signature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
    /// Alarm only: kept so flags can be rebuilt from the log.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<Signature>,
}

impl Alert {
    fn summary(&self) -> String {
        let mut s = format!("ALERT [{}] camera={} face={} full={}", self.severity, self.camera_id, self.face_image_path.display(), self.full_image_path.display());
        for h in &self.hits {
            s += &format!(" hit={}/{}({}, {:.3})", h.database, h.record_id, serde_json::to_value(h.status).unwrap_or_default().as_str().unwrap_or("?"), h.score);
        }
        if !self.databases_unavailable.is_empty() {
            s += &format!(" unavailable={}", self.databases_unavailable.join(","));
        }
        if let Some(f) = &self.flag {
            s += &format!(" flagged_by=#{} ({})", f.alert_seq, f.request_id);
        }
        s
    }
}

/// Where alerts go besides the event log.
#[derive(Clone, Debug, Default)]
pub struct AlertSinks {
    pub stderr: bool,
    webhook: Option<(reqwest::Client, String)>,
}

const WEBHOOK_TIMEOUT: Duration = Duration::from_secs(5);

impl AlertSinks {
    pub fn new(stderr: bool, webhook_url: Option<String>) -> Self {
        AlertSinks { stderr, webhook: webhook_url.map(|u| (reqwest::Client::new(), u)) }
    }

    /// Delivers an already logged alert event. Webhook failures are reported, not fatal.
    pub async fn deliver(&self, alert: &Alert, event: &EventRecord) {
        if self.stderr {
            eprintln!("{}", alert.summary());
        }
        if let Some((http, url)) = &self.webhook {
            match http.post(url).json(event).timeout(WEBHOOK_TIMEOUT).send().await {
                Ok(r) if r.status().is_success() => {}
                Ok(r) => log::warn!("webhook {url} answered {}", r.status()),
                Err(e) => log::warn!("webhook {url}: {e}"),
            }
        }
    }
}
