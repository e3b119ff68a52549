//! Watches on opted-in series and the alert outbox.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tse_core::similarity::DEFAULT_NEIGHBORS;
use tse_core::SimilarityIndex;

use crate::ids::{AlertId, SeriesId, WatchId};

/// What counts as a match for a watched series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum WatchMode {
    /// The new series is among the `k` nearest neighbors of the watched one.
    Rank { k: usize },
    /// The new series lies strictly closer than `r`.
    Radius {
        #[serde(with = "extended_f64")]
        r: f64,
    },
}

impl Default for WatchMode {
    fn default() -> Self {
        WatchMode::Rank { k: DEFAULT_NEIGHBORS }
    }
}

impl WatchMode {
    pub fn is_valid(&self) -> bool {
        match *self {
            WatchMode::Rank { k } => k >= 1,
            WatchMode::Radius { r } => r > 0.0,
        }
    }
}

/// JSON has no infinity, so an unbounded radius is written as `"inf"`.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("`{t}` is not a radius"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatchRegistration {
    pub watch_id: WatchId,
    pub series_id: SeriesId,
    pub contact_email: Option<String>,
    pub mode: WatchMode,
    pub created_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub alert_id: AlertId,
    pub watch_id: WatchId,
    pub watched_series_id: SeriesId,
    pub new_series_id: SeriesId,
    pub distance: f64,
    pub epoch: u64,
    pub created_at: i64,
    pub delivered: bool,
}

/// Watches matched by `new_id`, as `(watch, distance)` pairs, evaluated
/// against `index` as it stands.
pub fn evaluate_watches<'a>(
    index: &SimilarityIndex<SeriesId>,
    watches: impl IntoIterator<Item = &'a WatchRegistration>,
    new_id: SeriesId,
) -> Vec<(&'a WatchRegistration, f64)> {
    let mut hits = Vec::new();
    if !index.contains(&new_id) {
        return hits;
    }
    for w in watches {
        if w.series_id == new_id || !index.contains(&w.series_id) {
            continue;
        }
        let hit = match w.mode {
            WatchMode::Rank { k } => index
                .k_nearest(&w.series_id, k)
                .ok()
                .and_then(|ns| ns.into_iter().find(|n| n.id == new_id))
                .map(|n| n.distance),
            WatchMode::Radius { r } => index.distance_between(&w.series_id, &new_id).ok().filter(|&d| d < r),
        };
        if let Some(d) = hit {
            hits.push((w, d));
        }
    }
    hits
}

/// Flat document handed to a sink for one alert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertPayload {
    pub alert_id: AlertId,
    pub watch_id: WatchId,
    pub watched_series_id: SeriesId,
    pub new_series_id: SeriesId,
    pub distance: f64,
    pub epoch: u64,
    pub created_at: i64,
    pub contact_email: Option<String>,
}

impl AlertPayload {
    pub fn new(alert: &AlertRecord, contact_email: Option<String>) -> Self {
        AlertPayload {
            alert_id: alert.alert_id,
            watch_id: alert.watch_id,
            watched_series_id: alert.watched_series_id,
            new_series_id: alert.new_series_id,
            distance: alert.distance,
            epoch: alert.epoch,
            created_at: alert.created_at,
            contact_email,
        }
    }
}

/// Destination for outbox deliveries. A successful return is the hand-off
/// point after which the alert is marked delivered.
pub trait AlertSink: Send + Sync {
    fn deliver(&self, alert: &AlertPayload) -> Result<(), String>;
}

/// Appends one JSON line per alert and syncs before returning.
#[derive(Debug, Clone)]
pub struct FileSink {
    path: PathBuf,
}

impl FileSink {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        FileSink { path: path.into() }
    }
}

impl AlertSink for FileSink {
    fn deliver(&self, alert: &AlertPayload) -> Result<(), String> {
        let mut line = serde_json::to_vec(alert).map_err(|e| e.to_string())?;
        line.push(b'\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path).map_err(|e| e.to_string())?;
        f.write_all(&line).map_err(|e| e.to_string())?;
        f.sync_data().map_err(|e| e.to_string())
    }
}

/// POSTs the payload as JSON; any non-2xx status is a failure.
#[derive(Debug, Clone)]
pub struct WebhookSink {
    url: String,
    agent: ureq::Agent,
}

impl WebhookSink {
    pub fn new(url: impl Into<String>) -> Self {
        WebhookSink { url: url.into(), agent: ureq::Agent::new_with_defaults() }
    }
}

impl AlertSink for WebhookSink {
    fn deliver(&self, alert: &AlertPayload) -> Result<(), String> {
        self.agent.post(&self.url).send_json(alert).map(|_| ()).map_err(|e| e.to_string())
    }
}
