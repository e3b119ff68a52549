//! Durable single-directory store.
//!
//! Everything lives in one append-only log, `library.log`. Each frame is
//!
//! ```text
//! [payload_len: u32 LE][crc32(payload): u32 LE][payload]
//! payload = [kind: u8][json_len: u32 LE][json][blob]
//! ```
//!
//! where the blob carries the raw little-endian `f64` values of a series and
//! is empty for every other kind. On open the log is replayed into memory and
//! cut back to the end of the last intact frame, so a write torn by a crash
//! leaves either the whole record or nothing.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use tse_core::signal::{FEATURE_COUNT, FEATURE_SET_ID, MIN_SERIES_LEN};
use tse_core::{FeatureVector, NormalizationStats};

use crate::alerts::{AlertRecord, WatchRegistration};
use crate::error::{LibraryError, Result};
use crate::ids::{AlertId, SeriesId, WatchId};
use crate::ingest::MAX_SAMPLES;
use crate::metadata::{Metadata, LICENSE};

pub const LOG_FILE: &str = "library.log";
const FRAME_HEADER: usize = 8;

pub fn unix_now() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub id: SeriesId,
    #[serde(skip)]
    pub values: Vec<f64>,
    pub metadata: Metadata,
    pub features: FeatureVector,
    pub created_at: i64,
    pub license: String,
    /// The upload was longer than the stored prefix.
    #[serde(default)]
    pub truncated: bool,
}

/// Input to [`LibraryStore::put_series`]; the store assigns id and timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct NewSeries {
    pub values: Vec<f64>,
    pub metadata: Metadata,
    pub features: FeatureVector,
    pub truncated: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ListFilter {
    /// Segment-wise category prefix such as `synthetic/map`.
    pub category_prefix: Option<String>,
    pub tag: Option<String>,
}

impl ListFilter {
    pub fn matches(&self, m: &Metadata) -> bool {
        self.category_prefix.as_deref().is_none_or(|p| m.category.has_prefix(p))
            && self.tag.as_deref().is_none_or(|t| m.tags.contains(&t.trim().to_lowercase()))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
enum Event {
    Series(SeriesRecord),
    Epoch(NormalizationStats),
    Watch(WatchRegistration),
    Alert(AlertRecord),
    Delivered(AlertId),
    Matched(SeriesId),
    Tombstone(SeriesId),
}

impl Event {
    fn kind(&self) -> u8 {
        match self {
            Event::Series(_) => 1,
            Event::Epoch(_) => 2,
            Event::Watch(_) => 3,
            Event::Alert(_) => 4,
            Event::Delivered(_) => 5,
            Event::Matched(_) => 6,
            Event::Tombstone(_) => 7,
        }
    }

    fn encode(&self) -> Vec<u8> {
        let json = match self {
            Event::Series(r) => serde_json::to_vec(r),
            Event::Epoch(s) => serde_json::to_vec(s),
            Event::Watch(w) => serde_json::to_vec(w),
            Event::Alert(a) => serde_json::to_vec(a),
            Event::Delivered(id) => serde_json::to_vec(id),
            Event::Matched(id) | Event::Tombstone(id) => serde_json::to_vec(id),
        }
        .expect("store events serialize");
        let blob: &[f64] = match self {
            Event::Series(r) => &r.values,
            _ => &[],
        };
        let mut payload = Vec::with_capacity(5 + json.len() + blob.len() * 8);
        payload.push(self.kind());
        payload.extend_from_slice(&(json.len() as u32).to_le_bytes());
        payload.extend_from_slice(&json);
        for v in blob {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        let mut frame = Vec::with_capacity(FRAME_HEADER + payload.len());
        frame.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        frame.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        frame.extend_from_slice(&payload);
        frame
    }

    fn decode(payload: &[u8]) -> Option<Event> {
        let kind = *payload.first()?;
        let json_len = u32::from_le_bytes(payload.get(1..5)?.try_into().ok()?) as usize;
        let json = payload.get(5..5 + json_len)?;
        let blob = payload.get(5 + json_len..)?;
        Some(match kind {
            1 => {
                if blob.len() % 8 != 0 {
                    return None;
                }
                let mut r: SeriesRecord = serde_json::from_slice(json).ok()?;
                r.values = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
                Event::Series(r)
            }
            2 => Event::Epoch(serde_json::from_slice(json).ok()?),
            3 => Event::Watch(serde_json::from_slice(json).ok()?),
            4 => Event::Alert(serde_json::from_slice(json).ok()?),
            5 => Event::Delivered(serde_json::from_slice(json).ok()?),
            6 => Event::Matched(serde_json::from_slice(json).ok()?),
            7 => Event::Tombstone(serde_json::from_slice(json).ok()?),
            _ => return None,
        })
    }
}

#[derive(Debug, Default)]
struct State {
    series: HashMap<SeriesId, Arc<SeriesRecord>>,
    order: BTreeSet<(i64, SeriesId)>,
    tombstones: HashSet<SeriesId>,
    stats: Option<Arc<NormalizationStats>>,
    watches: Vec<WatchRegistration>,
    alerts: Vec<AlertRecord>,
    alert_pos: HashMap<AlertId, usize>,
    alert_keys: HashSet<(WatchId, SeriesId)>,
    matched: HashSet<SeriesId>,
}

impl State {
    fn apply(&mut self, event: Event) {
        match event {
            Event::Series(r) => {
                if !self.tombstones.contains(&r.id) {
                    self.order.insert((r.created_at, r.id));
                    self.series.insert(r.id, Arc::new(r));
                }
            }
            Event::Epoch(s) => self.stats = Some(Arc::new(s)),
            Event::Watch(w) => self.watches.push(w),
            Event::Alert(a) => {
                self.alert_keys.insert((a.watch_id, a.new_series_id));
                self.alert_pos.insert(a.alert_id, self.alerts.len());
                self.alerts.push(a);
            }
            Event::Delivered(id) => {
                if let Some(&i) = self.alert_pos.get(&id) {
                    self.alerts[i].delivered = true;
                }
            }
            Event::Matched(id) => {
                self.matched.insert(id);
            }
            Event::Tombstone(id) => {
                if let Some(r) = self.series.remove(&id) {
                    self.order.remove(&(r.created_at, id));
                }
                self.tombstones.insert(id);
            }
        }
    }
}

/// What replay found when the store was opened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Recovery {
    pub frames: usize,
    /// Bytes cut from the end of a torn or corrupt log.
    pub discarded_bytes: u64,
}

/// Many concurrent readers; writers are serialized by the log mutex and
/// publish to the in-memory state only after the frame is synced.
#[derive(Debug)]
pub struct LibraryStore {
    dir: PathBuf,
    writer: Mutex<File>,
    state: RwLock<State>,
    recovery: Recovery,
}

impl LibraryStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let mut file =
            OpenOptions::new().read(true).write(true).create(true).truncate(false).open(dir.join(LOG_FILE))?;
        if file.try_lock().is_err() {
            return Err(LibraryError::Locked);
        }
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let mut state = State::default();
        let mut at = 0usize;
        let mut frames = 0;
        while at + FRAME_HEADER <= bytes.len() {
            let len = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
            let crc = u32::from_le_bytes(bytes[at + 4..at + 8].try_into().unwrap());
            let Some(payload) = bytes.get(at + FRAME_HEADER..at + FRAME_HEADER + len) else { break };
            if crc32fast::hash(payload) != crc {
                break;
            }
            let Some(event) = Event::decode(payload) else { break };
            state.apply(event);
            frames += 1;
            at += FRAME_HEADER + len;
        }
        let discarded_bytes = (bytes.len() - at) as u64;
        if discarded_bytes > 0 {
            file.set_len(at as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(LibraryStore {
            dir,
            writer: Mutex::new(file),
            state: RwLock::new(state),
            recovery: Recovery { frames, discarded_bytes },
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn recovery(&self) -> Recovery {
        self.recovery
    }

    /// Append `event` when `check` returns true for the current state; false
    /// skips the write. The frame is synced to disk before the state changes.
    fn append_if(&self, event: Event, check: impl FnOnce(&State) -> Result<bool>) -> Result<bool> {
        let mut file = self.writer.lock();
        if !check(&self.state.read())? {
            return Ok(false);
        }
        let frame = event.encode();
        file.write_all(&frame)?;
        file.sync_data()?;
        self.state.write().apply(event);
        Ok(true)
    }

    fn append(&self, event: Event) -> Result<()> {
        self.append_if(event, |_| Ok(true)).map(|_| ())
    }

    pub fn put_series(&self, new: NewSeries) -> Result<Arc<SeriesRecord>> {
        new.metadata.check()?;
        if new.features.len() != FEATURE_COUNT || new.features.feature_set_id != FEATURE_SET_ID {
            return Err(LibraryError::InvalidParameter("feature vector does not match the feature set".into()));
        }
        if !(MIN_SERIES_LEN..=MAX_SAMPLES).contains(&new.values.len()) || new.values.iter().any(|v| !v.is_finite()) {
            return Err(LibraryError::InvalidParameter("series values violate length or finiteness rules".into()));
        }
        let mut record = SeriesRecord {
            id: SeriesId::random(),
            values: new.values,
            metadata: new.metadata,
            features: new.features,
            created_at: unix_now(),
            license: LICENSE.to_string(),
            truncated: new.truncated,
        };
        {
            let s = self.state.read();
            while s.series.contains_key(&record.id) || s.tombstones.contains(&record.id) {
                record.id = SeriesId::random();
            }
        }
        let id = record.id;
        self.append(Event::Series(record))?;
        self.get_series(&id)
    }

    pub fn get_series(&self, id: &SeriesId) -> Result<Arc<SeriesRecord>> {
        self.state.read().series.get(id).cloned().ok_or(LibraryError::NotFound)
    }

    pub fn contains(&self, id: &SeriesId) -> bool {
        self.state.read().series.contains_key(id)
    }

    /// Live records matching `filter`, ordered by creation time then id.
    pub fn list_series(&self, filter: &ListFilter) -> Vec<Arc<SeriesRecord>> {
        let s = self.state.read();
        s.order.iter().map(|(_, id)| &s.series[id]).filter(|r| filter.matches(&r.metadata)).cloned().collect()
    }

    pub fn series_count(&self) -> usize {
        self.state.read().series.len()
    }

    pub fn tombstone(&self, id: &SeriesId) -> Result<()> {
        let id = *id;
        self.append_if(Event::Tombstone(id), |s| {
            if s.series.contains_key(&id) {
                Ok(true)
            } else {
                Err(LibraryError::NotFound)
            }
        })
        .map(|_| ())
    }

    pub fn record_epoch(&self, stats: &NormalizationStats) -> Result<()> {
        self.append(Event::Epoch(stats.clone()))
    }

    pub fn latest_stats(&self) -> Option<Arc<NormalizationStats>> {
        self.state.read().stats.clone()
    }

    /// Register a watch unless one with the same series and mode exists;
    /// either way the stored registration is returned.
    pub fn add_watch(&self, watch: WatchRegistration) -> Result<WatchRegistration> {
        let mut existing = None;
        self.append_if(Event::Watch(watch.clone()), |s| {
            if !s.series.contains_key(&watch.series_id) {
                return Err(LibraryError::NotFound);
            }
            existing = s.watches.iter().find(|w| w.series_id == watch.series_id && w.mode == watch.mode).cloned();
            Ok(existing.is_none())
        })?;
        Ok(existing.unwrap_or(watch))
    }

    pub fn watches(&self) -> Vec<WatchRegistration> {
        self.state.read().watches.clone()
    }

    /// Append an alert unless its (watch, new series) pair was alerted before.
    pub fn add_alert(&self, alert: AlertRecord) -> Result<bool> {
        let key = (alert.watch_id, alert.new_series_id);
        self.append_if(Event::Alert(alert), |s| Ok(!s.alert_keys.contains(&key)))
    }

    pub fn alerts(&self) -> Vec<AlertRecord> {
        self.state.read().alerts.clone()
    }

    /// Oldest undelivered alerts first.
    pub fn undelivered(&self, limit: usize) -> Vec<AlertRecord> {
        self.state.read().alerts.iter().filter(|a| !a.delivered).take(limit).cloned().collect()
    }

    pub fn mark_delivered(&self, id: &AlertId) -> Result<()> {
        let id = *id;
        self.append_if(Event::Delivered(id), |s| match s.alert_pos.get(&id) {
            Some(&i) => Ok(!s.alerts[i].delivered),
            None => Err(LibraryError::NotFound),
        })
        .map(|_| ())
    }

    /// Record that watches were evaluated for a new series.
    pub fn mark_matched(&self, id: &SeriesId) -> Result<()> {
        self.append(Event::Matched(*id))
    }

    /// Live series whose insertion event has not been processed yet, oldest first.
    pub fn unmatched(&self) -> Vec<SeriesId> {
        let s = self.state.read();
        s.order.iter().map(|(_, id)| *id).filter(|id| !s.matched.contains(id)).collect()
    }
}
