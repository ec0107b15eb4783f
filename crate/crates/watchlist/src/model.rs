use base64::Engine;
use chrono::{DateTime, Utc};
use sentinel_core::imaging::{encode, AnyImage};
use sentinel_core::{GrayImage, Signature};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Wanted,
    Undocumented,
    Extremist,
    Criminal,
    /// On file but not of interest; never reported as a hit.
    Clear,
}

/// Body of `PUT /v1/databases/{db}/records/{id}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordBody {
    pub name: String,
    pub status: Status,
    pub signature: Signature,
    #[serde(default)]
    pub details: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WatchRecord {
    pub record_id: String,
    pub name: String,
    pub status: Status,
    pub signature: Signature,
    pub details: String,
}

impl WatchRecord {
    pub fn from_body(record_id: impl Into<String>, body: RecordBody) -> Self {
        WatchRecord { record_id: record_id.into(), name: body.name, status: body.status, signature: body.signature, details: body.details }
    }
}

/// Body of `POST /v1/databases/{db}/check`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRequest {
    pub request_id: String,
    pub signature: Signature,
    /// Base64 of the face crop encoded as binary PGM.
    pub face_image: String,
    pub camera_id: String,
    pub captured_at: DateTime<Utc>,
}

impl CheckRequest {
    /// Builds a request with a fresh UUID v4 `request_id`.
    pub fn new(signature: Signature, face: &GrayImage, camera_id: impl Into<String>, captured_at: DateTime<Utc>) -> Self {
        CheckRequest {
            request_id: uuid::Uuid::new_v4().to_string(),
            signature,
            face_image: base64::engine::general_purpose::STANDARD.encode(encode(&AnyImage::Gray(face.clone()))),
            camera_id: camera_id.into(),
            captured_at,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub record_id: String,
    pub status: Status,
    pub score: f64,
    pub details: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResponse {
    pub request_id: String,
    pub database: String,
    pub hits: Vec<Hit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbHit {
    pub database: String,
    pub record_id: String,
    pub status: Status,
    pub score: f64,
    pub details: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Admissible,
    Inadmissible,
    /// No hits, but at least one database did not answer.
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub request_id: String,
    pub decision: Decision,
    pub hits: Vec<DbHit>,
    pub databases_queried: Vec<String>,
    pub databases_unavailable: Vec<String>,
}

impl Verdict {
    /// Folds per-database outcomes into a verdict. The result does not depend
    /// on the order of `outcomes`: all lists are sorted, hits by (database, record_id).
    /// `Clear` records are dropped even if a database reports them.
    pub fn aggregate<E>(request_id: &str, outcomes: impl IntoIterator<Item = (String, Result<Vec<Hit>, E>)>) -> Verdict {
        let mut hits = vec![];
        let mut queried = vec![];
        let mut unavailable = vec![];
        for (database, outcome) in outcomes {
            match outcome {
                Ok(found) => hits.extend(found.into_iter().filter(|h| h.status != Status::Clear).map(|h| DbHit {
                    database: database.clone(),
                    record_id: h.record_id,
                    status: h.status,
                    score: h.score,
                    details: h.details,
                })),
                Err(_) => unavailable.push(database.clone()),
            }
            queried.push(database);
        }
        hits.sort_by(|a, b| (&a.database, &a.record_id).cmp(&(&b.database, &b.record_id)));
        queried.sort();
        unavailable.sort();
        let decision = if !hits.is_empty() {
            Decision::Inadmissible
        } else if unavailable.is_empty() {
            Decision::Admissible
        } else {
            Decision::Indeterminate
        };
        Verdict { request_id: request_id.to_string(), decision, hits, databases_queried: queried, databases_unavailable: unavailable }
    }

    /// Drops hits scoring below `tau` and re-derives the decision.
    pub fn with_min_score(mut self, tau: f64) -> Verdict {
        self.hits.retain(|h| h.score >= tau);
        if self.decision == Decision::Inadmissible && self.hits.is_empty() {
            self.decision = if self.databases_unavailable.is_empty() { Decision::Admissible } else { Decision::Indeterminate };
        }
        self
    }

    /// Checks the decision/hit consistency rules.
    pub fn is_consistent(&self) -> bool {
        match self.decision {
            Decision::Inadmissible => !self.hits.is_empty(),
            Decision::Admissible => self.hits.is_empty() && self.databases_unavailable.is_empty(),
            Decision::Indeterminate => self.hits.is_empty() && !self.databases_unavailable.is_empty(),
        }
    }
}
