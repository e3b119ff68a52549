use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, SystemTime};

use parking_lot::Mutex;
use tse_core::FeatureVector;

use crate::ids::StagingId;
use crate::ingest::UploadEnvelope;

pub const STAGING_TTL: Duration = Duration::from_secs(24 * 60 * 60);

#[derive(Debug, Clone, PartialEq)]
pub struct StagedUpload {
    pub envelope: UploadEnvelope,
    pub features: FeatureVector,
    pub staged_at: SystemTime,
}

/// In-memory holding area for uploads that lack metadata. Entries expire
/// after the TTL; expired entries are dropped on the next access.
#[derive(Debug)]
pub struct StagingArea {
    ttl: Duration,
    entries: Mutex<HashMap<StagingId, Arc<StagedUpload>>>,
}

impl Default for StagingArea {
    fn default() -> Self {
        Self::new(STAGING_TTL)
    }
}

impl StagingArea {
    pub fn new(ttl: Duration) -> Self {
        StagingArea { ttl, entries: Mutex::new(HashMap::new()) }
    }

    fn sweep(&self, entries: &mut HashMap<StagingId, Arc<StagedUpload>>, now: SystemTime) {
        entries.retain(|_, e| now.duration_since(e.staged_at).map_or(true, |age| age < self.ttl));
    }

    pub fn insert(&self, envelope: UploadEnvelope, features: FeatureVector) -> StagingId {
        self.insert_at(envelope, features, SystemTime::now())
    }

    pub fn insert_at(&self, envelope: UploadEnvelope, features: FeatureVector, now: SystemTime) -> StagingId {
        let mut entries = self.entries.lock();
        self.sweep(&mut entries, now);
        let id = StagingId::random();
        entries.insert(id, Arc::new(StagedUpload { envelope, features, staged_at: now }));
        id
    }

    pub fn get(&self, id: &StagingId) -> Option<Arc<StagedUpload>> {
        self.get_at(id, SystemTime::now())
    }

    pub fn get_at(&self, id: &StagingId, now: SystemTime) -> Option<Arc<StagedUpload>> {
        let mut entries = self.entries.lock();
        self.sweep(&mut entries, now);
        entries.get(id).cloned()
    }

    pub fn remove(&self, id: &StagingId) -> Option<Arc<StagedUpload>> {
        self.entries.lock().remove(id)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
