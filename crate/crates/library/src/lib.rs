//! Persistent time-series library: upload parsing, durable storage, the live
//! similarity snapshot, and future-match alerts.

pub mod alerts;
pub mod error;
pub mod ids;
pub mod ingest;
pub mod library;
pub mod metadata;
pub mod staging;
pub mod store;

pub use error::{LibraryError, Result};
pub use ids::{AlertId, SeriesId, StagingId, WatchId};
pub use library::{
    downsample, BulkItem, BulkOutcome, CategoryNode, ExportDocument, ExportedSeries, FeatureEntry, FeatureReport,
    FilteredGraph, GraphQuery, IngestOutcome, IngestReport, Library, LibraryConfig, ProjectedPoint, Projection,
    ProjectionMethod, ProjectionParams,
};
pub use metadata::{CategoryPath, Metadata, MetadataDraft, SamplingRate, ValidationError};
pub use store::{LibraryStore, ListFilter, NewSeries, SeriesRecord};
