//! Signatures of people with an inadmissible verdict, for re-sighting checks.

use chrono::{DateTime, Utc};
use sentinel_core::signature::matches;
use sentinel_core::Signature;

use crate::alerts::{Alert, FlagRef, Severity};
use crate::events::{EventKind, EventRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct Flag {
    pub signature: Signature,
    pub first_flagged_ts: DateTime<Utc>,
    pub request_id: String,
    pub camera_id: String,
    /// Sequence number of the alarm alert that raised the flag.
    pub alert_seq: u64,
}

impl Flag {
    pub fn to_ref(&self) -> FlagRef {
        FlagRef { alert_seq: self.alert_seq, request_id: self.request_id.clone(), camera_id: self.camera_id.clone(), first_flagged_ts: self.first_flagged_ts }
    }
}

#[derive(Clone, Debug)]
pub struct FlagStore {
    tau: f64,
    flags: Vec<Flag>,
}

impl FlagStore {
    pub fn new(tau: f64) -> Self {
        FlagStore { tau, flags: vec![] }
    }

    /// Replays alarm alerts from an event log.
    pub fn rebuild<'a>(tau: f64, events: impl IntoIterator<Item = &'a EventRecord>) -> Self {
        let mut store = FlagStore::new(tau);
        for rec in events.into_iter().filter(|r| r.kind == EventKind::Alert) {
            let Ok(alert) = serde_json::from_value::<Alert>(rec.payload.clone()) else { continue };
            if let (Severity::Alarm, Some(signature), Some(request_id)) = (alert.severity, alert.signature, alert.request_id) {
                store.add(Flag { signature, first_flagged_ts: alert.captured_at, request_id, camera_id: alert.camera_id, alert_seq: rec.seq });
            }
        }
        store
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn flags(&self) -> &[Flag] {
        &self.flags
    }

    /// Best matching flag and its similarity; ties go to the earliest flag.
    pub fn find(&self, signature: &Signature) -> Option<(&Flag, f64)> {
        self.flags
            .iter()
            .filter(|f| matches(&f.signature, signature, self.tau))
            .map(|f| (f, f.signature.similarity(signature)))
            .fold(None, |best: Option<(&Flag, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
    }

    /// Adds a flag unless an existing one already covers the signature, in
    /// which case the original (first) flag is kept. Returns whether it was added.
    pub fn add(&mut self, flag: Flag) -> bool {
        if self.find(&flag.signature).is_some() {
            return false;
        }
        self.flags.push(flag);
        true
    }
}
