use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::{Mutex, RwLock};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tse_core::projection::{filter_columns, pca, tsne, TsneParams};
use tse_core::signal::{compute_feature_vector, descriptors, FeatureCategory};
use tse_core::similarity::{
    build_neighbor_graph, fit_normalization, EdgeThreshold, FeaturePercentile, RefitPolicy, DEFAULT_NEIGHBORS,
};
use tse_core::{CoreError, FeatureVector, Neighbor, NeighborGraph, PercentileTable, SimilarityIndex};

use crate::alerts::{evaluate_watches, AlertPayload, AlertRecord, AlertSink, WatchMode, WatchRegistration};
use crate::error::{LibraryError, Result};
use crate::ids::{AlertId, SeriesId, StagingId, WatchId};
use crate::ingest::bulk::{read_bundle, write_manifest, write_zip};
use crate::ingest::{read_upload, write_csv, FileFormat, IngestError, UploadEnvelope};
use crate::metadata::{CategoryPath, Metadata, MetadataDraft};
use crate::staging::{StagedUpload, StagingArea, STAGING_TTL};
use crate::store::{unix_now, LibraryStore, ListFilter, NewSeries, SeriesRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LibraryConfig {
    pub refit: RefitPolicy,
    pub staging_ttl: Duration,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig { refit: RefitPolicy::default(), staging_ttl: STAGING_TTL }
    }
}

/// Normalized search structure over every live series at one epoch.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub index: SimilarityIndex<SeriesId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum IngestOutcome {
    Added { id: SeriesId },
    Staged { staging_id: StagingId },
}

/// Result of a single upload: where it went, what was computed, and its
/// nearest library members at the current epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    #[serde(flatten)]
    pub outcome: IngestOutcome,
    pub filename: String,
    pub format: FileFormat,
    pub length: usize,
    pub truncated: bool,
    pub source_sampling_rate: Option<f64>,
    pub features: FeatureVector,
    pub epoch: Option<u64>,
    pub preview: Vec<Neighbor<SeriesId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum BulkOutcome {
    Added { id: SeriesId },
    Staged { staging_id: StagingId },
    Failed { code: String, message: String, fields: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkItem {
    pub filename: String,
    #[serde(flatten)]
    pub outcome: BulkOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphQuery {
    pub k: usize,
    /// Fixed neighbor-neighbor edge threshold; adaptive when absent.
    pub tau: Option<f64>,
    /// Category prefixes; neighbors outside all of them are dropped.
    pub categories: Vec<String>,
}

impl Default for GraphQuery {
    fn default() -> Self {
        GraphQuery { k: DEFAULT_NEIGHBORS, tau: None, categories: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilteredGraph {
    #[serde(flatten)]
    pub graph: NeighborGraph<SeriesId>,
    /// Neighbors removed by the category filter.
    pub filtered_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureEntry {
    pub index: usize,
    pub name: &'static str,
    pub category: FeatureCategory,
    pub value: Option<f64>,
    pub normalized: Option<f64>,
    pub percentile: Option<FeaturePercentile>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureReport {
    pub id: SeriesId,
    pub feature_set_id: String,
    pub epoch: Option<u64>,
    pub features: Vec<FeatureEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryNode {
    pub name: String,
    pub path: String,
    /// Series in this category or below it.
    pub count: usize,
    pub children: Vec<CategoryNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMethod {
    Pca,
    Tsne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionParams {
    pub method: ProjectionMethod,
    #[serde(flatten)]
    pub tsne: TsneParams,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        ProjectionParams { method: ProjectionMethod::Tsne, tsne: TsneParams::default() }
    }
}

/// PCA keeps at most this many components before t-SNE.
pub const PCA_COMPONENTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub id: SeriesId,
    pub category: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub method: ProjectionMethod,
    pub epoch: u64,
    /// Feature indices that survived bad-column filtering.
    pub kept_features: Vec<usize>,
    pub points: Vec<ProjectedPoint>,
}

impl Projection {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "x", "y", "category"]).expect("in-memory write");
        for p in &self.points {
            w.write_record([p.id.to_string(), p.x.to_string(), p.y.to_string(), p.category.clone()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedSeries {
    pub id: SeriesId,
    /// Distance to the exported target; absent for the target itself.
    pub distance: Option<f64>,
    pub metadata: Metadata,
    pub license: String,
    pub created_at: i64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportDocument {
    pub epoch: Option<u64>,
    pub k: usize,
    pub target: ExportedSeries,
    pub neighbors: Vec<ExportedSeries>,
}

/// Every `len / m`-th sample, at most `m` of them, always ending on the last.
pub fn downsample(values: &[f64], m: usize) -> Vec<f64> {
    let n = values.len();
    if n <= m {
        return values.to_vec();
    }
    if m < 2 {
        return values[..m].to_vec();
    }
    (0..m).map(|i| values[i * (n - 1) / (m - 1)]).collect()
}

fn features_of(env: &UploadEnvelope) -> Result<FeatureVector> {
    compute_feature_vector(&env.series).map_err(|e| match e {
        CoreError::DegenerateSeries => LibraryError::Ingest(IngestError::ConstantSeries),
        other => LibraryError::Core(other),
    })
}

/// The time-series library: durable records, the live similarity snapshot,
/// staging, and watch evaluation.
pub struct Library {
    store: LibraryStore,
    staging: StagingArea,
    refit: RefitPolicy,
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    /// Insertions (and their watch evaluation) are processed one at a time.
    ingest: Mutex<()>,
    drain: Mutex<()>,
}

impl Library {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        Self::open_with(dir, LibraryConfig::default())
    }

    pub fn open_with(dir: impl AsRef<Path>, config: LibraryConfig) -> Result<Self> {
        let store = LibraryStore::open(dir)?;
        let lib = Library {
            store,
            staging: StagingArea::new(config.staging_ttl),
            refit: config.refit,
            snapshot: RwLock::new(None),
            ingest: Mutex::new(()),
            drain: Mutex::new(()),
        };
        let _guard = lib.ingest.lock();
        if let Some(stats) = lib.store.latest_stats() {
            let records = lib.store.list_series(&ListFilter::default());
            let index = SimilarityIndex::build(
                (*stats).clone(),
                records.iter().map(|r| (r.id, r.metadata.category.to_string(), r.features.values.as_slice())),
            );
            *lib.snapshot.write() = Some(Arc::new(Snapshot { index }));
        }
        let fitted = lib.snapshot().map(|s| s.index.stats().library_size);
        if lib.refit.should_refit(fitted, lib.store.series_count()) {
            lib.refit_locked()?;
        }
        // replay insertion events a crash left unprocessed
        for id in lib.store.unmatched() {
            lib.match_locked(&id)?;
        }
        drop(_guard);
        Ok(lib)
    }

    pub fn store(&self) -> &LibraryStore {
        &self.store
    }

    pub fn staging(&self) -> &StagingArea {
        &self.staging
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().clone()
    }

    pub fn epoch(&self) -> Option<u64> {
        self.snapshot().map(|s| s.index.epoch())
    }

    pub fn len(&self) -> usize {
        self.store.series_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn publish(&self, index: SimilarityIndex<SeriesId>) {
        *self.snapshot.write() = Some(Arc::new(Snapshot { index }));
    }

    fn refit_locked(&self) -> Result<u64> {
        let records = self.store.list_series(&ListFilter::default());
        let rows: Vec<&[Option<f64>]> = records.iter().map(|r| r.features.values.as_slice()).collect();
        let previous = self.store.latest_stats().map_or(0, |s| s.epoch);
        let stats = fit_normalization(&rows, previous)?;
        self.store.record_epoch(&stats)?;
        let epoch = stats.epoch;
        let index = SimilarityIndex::build(
            stats,
            records.iter().map(|r| (r.id, r.metadata.category.to_string(), r.features.values.as_slice())),
        );
        self.publish(index);
        Ok(epoch)
    }

    /// Refit normalization over the whole library; the epoch advances by one.
    pub fn rebuild_index(&self) -> Result<u64> {
        let _guard = self.ingest.lock();
        self.refit_locked()
    }

    fn index_locked(&self, record: &SeriesRecord) -> Result<()> {
        let current = self.snapshot();
        let fitted = current.as_ref().map(|s| s.index.stats().library_size);
        if self.refit.should_refit(fitted, self.store.series_count()) {
            self.refit_locked()?;
        } else if let Some(s) = current {
            let mut index = s.index.clone();
            index.insert(record.id, record.metadata.category.to_string(), &record.features.values);
            self.publish(index);
        }
        Ok(())
    }

    fn match_locked(&self, id: &SeriesId) -> Result<Vec<AlertRecord>> {
        let mut created = Vec::new();
        if let Some(snap) = self.snapshot() {
            let watches = self.store.watches();
            for (w, distance) in evaluate_watches(&snap.index, &watches, *id) {
                let alert = AlertRecord {
                    alert_id: AlertId::random(),
                    watch_id: w.watch_id,
                    watched_series_id: w.series_id,
                    new_series_id: *id,
                    distance,
                    epoch: snap.index.epoch(),
                    created_at: unix_now(),
                    delivered: false,
                };
                if self.store.add_alert(alert.clone())? {
                    created.push(alert);
                }
            }
        }
        self.store.mark_matched(id)?;
        Ok(created)
    }

    /// Evaluate every watch against an indexed series and append the new
    /// alerts. Pairs alerted before are never alerted again.
    pub fn match_new_series(&self, id: &SeriesId) -> Result<Vec<AlertRecord>> {
        let _guard = self.ingest.lock();
        self.get(id)?;
        self.match_locked(id)
    }

    /// Store a complete record, index it, and evaluate watches against it.
    pub fn add_series(&self, new: NewSeries) -> Result<Arc<SeriesRecord>> {
        self.add_series_with_alerts(new).map(|(r, _)| r)
    }

    /// As [`add_series`](Self::add_series), also returning the alerts raised.
    pub fn add_series_with_alerts(&self, new: NewSeries) -> Result<(Arc<SeriesRecord>, Vec<AlertRecord>)> {
        let _guard = self.ingest.lock();
        let record = self.store.put_series(new)?;
        self.index_locked(&record)?;
        let alerts = self.match_locked(&record.id)?;
        if record.metadata.opt_in_alerts {
            self.register_watch_unlocked(&record, WatchMode::default())?;
        }
        Ok((record, alerts))
    }

    fn preview_for(
        &self,
        features: &FeatureVector,
        exclude: Option<&SeriesId>,
    ) -> (Option<u64>, Vec<Neighbor<SeriesId>>) {
        let Some(snap) = self.snapshot() else { return (None, Vec::new()) };
        let query = snap.index.normalize(&features.values);
        let preview = snap.index.k_nearest_to_vector(&query, DEFAULT_NEIGHBORS, exclude).unwrap_or_default();
        (Some(snap.index.epoch()), preview)
    }

    fn report(
        &self,
        outcome: IngestOutcome,
        env: &UploadEnvelope,
        features: FeatureVector,
        exclude: Option<&SeriesId>,
    ) -> IngestReport {
        let (epoch, preview) = self.preview_for(&features, exclude);
        IngestReport {
            outcome,
            filename: env.filename.clone(),
            format: env.format,
            length: env.series.len(),
            truncated: env.truncated,
            source_sampling_rate: env.source_sampling_rate,
            features,
            epoch,
            preview,
        }
    }

    fn commit(&self, env: &UploadEnvelope, features: &FeatureVector, metadata: Metadata) -> Result<Arc<SeriesRecord>> {
        self.add_series(NewSeries {
            values: env.series.values().to_vec(),
            metadata,
            features: features.clone(),
            truncated: env.truncated,
        })
    }

    /// Parse one upload. With no metadata at all it is staged; otherwise the
    /// metadata must validate and the series is added permanently.
    pub fn ingest_one(&self, bytes: &[u8], filename: &str, draft: &MetadataDraft) -> Result<IngestReport> {
        let env = read_upload(bytes, filename)?;
        let features = features_of(&env)?;
        if draft.is_empty() {
            let staging_id = self.staging.insert(env.clone(), features.clone());
            return Ok(self.report(IngestOutcome::Staged { staging_id }, &env, features, None));
        }
        let metadata = draft.validate()?;
        let record = self.commit(&env, &features, metadata)?;
        Ok(self.report(IngestOutcome::Added { id: record.id }, &env, features, Some(&record.id)))
    }

    pub fn staged(&self, id: &StagingId) -> Result<Arc<StagedUpload>> {
        self.staging.get(id).ok_or(LibraryError::NotFound)
    }

    /// Add a staged upload with its now-complete metadata.
    pub fn promote(&self, id: &StagingId, draft: &MetadataDraft) -> Result<IngestReport> {
        let staged = self.staged(id)?;
        let metadata = draft.validate()?;
        let record = self.commit(&staged.envelope, &staged.features, metadata)?;
        self.staging.remove(id);
        Ok(self.report(
            IngestOutcome::Added { id: record.id },
            &staged.envelope,
            staged.features.clone(),
            Some(&record.id),
        ))
    }

    /// Process every file of a zip bundle independently. Files with a manifest
    /// row are added, the rest are staged; a failing file is reported and
    /// leaves nothing behind.
    pub fn ingest_bulk(&self, archive: &[u8]) -> Result<Vec<BulkItem>> {
        let bundle = read_bundle(archive)?;
        let parsed: Vec<Result<(UploadEnvelope, FeatureVector)>> = bundle
            .files
            .par_iter()
            .map(|f| {
                let env = read_upload(&f.bytes, &f.name)?;
                let features = features_of(&env)?;
                Ok((env, features))
            })
            .collect();
        let mut report = Vec::with_capacity(parsed.len());
        for (file, parsed) in bundle.files.iter().zip(parsed) {
            let draft = bundle.metadata_for(&file.name).cloned().unwrap_or_default();
            let outcome = parsed.and_then(|(env, features)| {
                if draft.is_empty() {
                    Ok(BulkOutcome::Staged { staging_id: self.staging.insert(env, features) })
                } else {
                    let metadata = draft.validate()?;
                    Ok(BulkOutcome::Added { id: self.commit(&env, &features, metadata)?.id })
                }
            });
            let outcome = outcome.unwrap_or_else(|e| BulkOutcome::Failed {
                code: e.code().to_string(),
                message: e.to_string(),
                fields: match &e {
                    LibraryError::Validation(v) => v.field_names().iter().map(|s| s.to_string()).collect(),
                    _ => Vec::new(),
                },
            });
            report.push(BulkItem { filename: file.name.clone(), outcome });
        }
        Ok(report)
    }

    pub fn get(&self, id: &SeriesId) -> Result<Arc<SeriesRecord>> {
        self.store.get_series(id)
    }

    pub fn list(&self, filter: &ListFilter) -> Vec<Arc<SeriesRecord>> {
        self.store.list_series(filter)
    }

    /// Tombstone a series: it disappears from listings, search and graphs.
    pub fn tombstone(&self, id: &SeriesId) -> Result<()> {
        let _guard = self.ingest.lock();
        self.store.tombstone(id)?;
        if let Some(s) = self.snapshot() {
            let mut index = s.index.clone();
            index.remove(id);
            self.publish(index);
        }
        Ok(())
    }

    fn indexed(&self) -> Result<Arc<Snapshot>> {
        self.snapshot().ok_or(LibraryError::Core(CoreError::LibraryTooSmall { size: self.len(), min: 2 }))
    }

    pub fn neighbors(&self, id: &SeriesId, k: usize) -> Result<Vec<Neighbor<SeriesId>>> {
        self.get(id)?;
        Ok(self.indexed()?.index.k_nearest(id, k)?)
    }

    /// Neighbor network of `id`. Category filtering happens after retrieval,
    /// so the graph is the unfiltered one minus the dropped nodes.
    pub fn graph(&self, id: &SeriesId, query: &GraphQuery) -> Result<FilteredGraph> {
        if query.tau.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
            return Err(LibraryError::InvalidParameter("tau must be finite and non-negative".into()));
        }
        self.get(id)?;
        let snap = self.indexed()?;
        let threshold = query.tau.map_or(EdgeThreshold::Adaptive, EdgeThreshold::Fixed);
        let mut graph = build_neighbor_graph(&snap.index, id, query.k, threshold)?;
        let keep = |category: &str| {
            query.categories.is_empty()
                || category.parse::<CategoryPath>().is_ok_and(|c| query.categories.iter().any(|p| c.has_prefix(p)))
        };
        let before = graph.nodes.len();
        let target = graph.target;
        graph.nodes.retain(|n| n.id == target || keep(&n.category));
        let filtered_count = before - graph.nodes.len();
        if filtered_count > 0 {
            let kept: std::collections::HashSet<SeriesId> = graph.nodes.iter().map(|n| n.id).collect();
            graph.edges.retain(|e| kept.contains(&e.a) && kept.contains(&e.b));
        }
        Ok(FilteredGraph { graph, filtered_count })
    }

    /// Raw, normalized and percentile view of each feature of a series.
    pub fn features(&self, id: &SeriesId) -> Result<FeatureReport> {
        let record = self.get(id)?;
        let records = self.list(&ListFilter::default());
        let rows: Vec<&[Option<f64>]> = records.iter().map(|r| r.features.values.as_slice()).collect();
        let table = PercentileTable::build(&rows, record.features.len());
        let percentiles = table.percentiles(&record.features.values);
        let snap = self.snapshot();
        let normalized = snap.as_ref().and_then(|s| s.index.get(id)).map(|e| e.vector.values.clone());
        let features = descriptors()
            .iter()
            .map(|d| FeatureEntry {
                index: d.index,
                name: d.name,
                category: d.category,
                value: record.features.get(d.index),
                normalized: normalized.as_ref().and_then(|n| n[d.index]),
                percentile: percentiles[d.index],
            })
            .collect();
        Ok(FeatureReport {
            id: *id,
            feature_set_id: record.features.feature_set_id.clone(),
            epoch: snap.map(|s| s.index.epoch()),
            features,
        })
    }

    /// Category hierarchy of the live library; each path appears once.
    pub fn categories(&self) -> Vec<CategoryNode> {
        #[derive(Default)]
        struct Tree(BTreeMap<String, (usize, Tree)>);
        let mut root = Tree::default();
        for r in self.list(&ListFilter::default()) {
            let mut node = &mut root;
            for seg in r.metadata.category.segments() {
                let entry = node.0.entry(seg.clone()).or_default();
                entry.0 += 1;
                node = &mut entry.1;
            }
        }
        fn render(tree: &Tree, prefix: &str) -> Vec<CategoryNode> {
            tree.0
                .iter()
                .map(|(name, (count, sub))| {
                    let path = if prefix.is_empty() { name.clone() } else { format!("{prefix}/{name}") };
                    CategoryNode { name: name.clone(), count: *count, children: render(sub, &path), path }
                })
                .collect()
        }
        render(&root, "")
    }

    /// Project the normalized library to two dimensions. Columns with any
    /// undefined entry are dropped first; t-SNE runs on at most 50 principal
    /// components.
    pub fn project(&self, params: &ProjectionParams) -> Result<Projection> {
        let snap = self.indexed()?;
        let mut entries: Vec<_> = snap.index.entries().collect();
        entries.sort_by_key(|e| e.id);
        let matrix: Vec<&[Option<f64>]> = entries.iter().map(|e| e.vector.values.as_slice()).collect();
        let filtered = filter_columns(&matrix)?;
        let coords: Vec<[f64; 2]> = match params.method {
            ProjectionMethod::Pca => {
                let p = pca(&filtered.rows, 2)?;
                p.scores.iter().map(|s| [s[0], s.get(1).copied().unwrap_or(0.0)]).collect()
            }
            ProjectionMethod::Tsne => {
                let p = pca(&filtered.rows, PCA_COMPONENTS)?;
                tsne(&p.scores, &params.tsne)?.coords
            }
        };
        let points = entries
            .iter()
            .zip(coords)
            .map(|(e, [x, y])| ProjectedPoint { id: e.id, category: e.category.clone(), x, y })
            .collect();
        Ok(Projection { method: params.method, epoch: snap.index.epoch(), kept_features: filtered.kept, points })
    }

    fn export_entries(&self, id: &SeriesId, k: usize) -> Result<(Option<u64>, Vec<ExportedSeries>)> {
        let target = self.get(id)?;
        let snap = self.snapshot();
        let neighbors = match &snap {
            Some(s) => s.index.k_nearest(id, k)?,
            None => Vec::new(),
        };
        let exported = |r: &SeriesRecord, distance| ExportedSeries {
            id: r.id,
            distance,
            metadata: r.metadata.clone(),
            license: r.license.clone(),
            created_at: r.created_at,
            values: r.values.clone(),
        };
        let mut out = vec![exported(&target, None)];
        for n in neighbors {
            out.push(exported(&*self.get(&n.id)?, Some(n.distance)));
        }
        Ok((snap.map(|s| s.index.epoch()), out))
    }

    /// A series with its current `k` nearest neighbors, values included.
    pub fn export_json(&self, id: &SeriesId, k: usize) -> Result<ExportDocument> {
        let (epoch, mut all) = self.export_entries(id, k)?;
        let target = all.remove(0);
        Ok(ExportDocument { epoch, k, target, neighbors: all })
    }

    /// Zip with one single-column CSV per series plus a `manifest.csv`
    /// carrying their metadata, readable by [`ingest_bulk`](Self::ingest_bulk).
    pub fn export_zip(&self, id: &SeriesId, k: usize) -> Result<Vec<u8>> {
        let (_, all) = self.export_entries(id, k)?;
        let mut files = Vec::with_capacity(all.len() + 1);
        let mut manifest = Vec::with_capacity(all.len());
        for s in &all {
            let name = format!("{}.csv", s.id);
            files.push((name.clone(), write_csv(&s.values).into_bytes()));
            manifest.push((name, s.metadata.to_draft()));
        }
        files.push((crate::ingest::bulk::MANIFEST_NAME.to_string(), write_manifest(&manifest)));
        Ok(write_zip(&files))
    }

    fn register_watch_unlocked(&self, record: &SeriesRecord, mode: WatchMode) -> Result<WatchRegistration> {
        if !record.metadata.opt_in_alerts {
            return Err(LibraryError::NotOptedIn);
        }
        if !mode.is_valid() {
            return Err(LibraryError::InvalidParameter("watch needs k >= 1 or r > 0".into()));
        }
        self.store.add_watch(WatchRegistration {
            watch_id: WatchId::random(),
            series_id: record.id,
            contact_email: record.metadata.contact_email.clone(),
            mode,
            created_at: unix_now(),
        })
    }

    /// Watch an opted-in series for future matches. Registering the same
    /// series and mode again returns the existing watch.
    pub fn register_watch(&self, id: &SeriesId, mode: WatchMode) -> Result<WatchRegistration> {
        let record = self.get(id)?;
        self.register_watch_unlocked(&record, mode)
    }

    pub fn watches(&self) -> Vec<WatchRegistration> {
        self.store.watches()
    }

    /// Hand up to `limit` undelivered alerts to `sink`, oldest first. Each is
    /// marked delivered only after the sink accepts it, so a crash in between
    /// leads to redelivery.
    pub fn drain_outbox(&self, sink: &dyn AlertSink, limit: usize) -> Result<Vec<AlertRecord>> {
        let _guard = self.drain.lock();
        let watches: BTreeMap<WatchId, WatchRegistration> =
            self.store.watches().into_iter().map(|w| (w.watch_id, w)).collect();
        let mut delivered = Vec::new();
        for mut alert in self.store.undelivered(limit) {
            let email = watches.get(&alert.watch_id).and_then(|w| w.contact_email.clone());
            sink.deliver(&AlertPayload::new(&alert, email)).map_err(LibraryError::SinkUnavailable)?;
            self.store.mark_delivered(&alert.alert_id)?;
            alert.delivered = true;
            delivered.push(alert);
        }
        Ok(delivered)
    }
}
