//! Commands run either directly against a data directory or over HTTP.
//! Both paths return the JSON documents the server serves, so output is
//! identical for identical stores.

use std::fmt;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use tse_core::signal::compute_features;
use tse_library::alerts::{AlertSink, WatchMode};
use tse_library::ingest::bulk::{write_manifest, write_zip, MANIFEST_NAME};
use tse_library::ingest::write_csv;
use tse_library::{
    GraphQuery, Library, LibraryError, ListFilter, MetadataDraft, NewSeries, ProjectionParams, SeriesId,
    ValidationError,
};
use tse_server::{graph_document, series_summaries};

use crate::synth::{seed_library, SynthSeries};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub fields: Vec<String>,
}

impl CliError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        CliError { code: code.into(), message: message.into(), fields: Vec::new() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)?;
        if !self.fields.is_empty() {
            write!(f, " (fields: {})", self.fields.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for CliError {}

impl From<LibraryError> for CliError {
    fn from(e: LibraryError) -> Self {
        let fields = match &e {
            LibraryError::Validation(v) => v.field_names().iter().map(|s| s.to_string()).collect(),
            _ => Vec::new(),
        };
        CliError { code: e.code().to_string(), message: e.to_string(), fields }
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        LibraryError::Validation(e).into()
    }
}

impl From<ureq::Error> for CliError {
    fn from(e: ureq::Error) -> Self {
        CliError::new("connection_error", e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("documents serialize")
}

fn parse_id(s: &str) -> CliResult<SeriesId> {
    s.parse().map_err(|_| CliError::new("not_found", format!("`{s}` is not a series id")))
}

fn local_only(what: &str) -> CliError {
    CliError::new("unsupported_remote", format!("{what} works on a local --data-dir only"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Zip,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Json => "json",
            ExportFormat::Zip => "zip",
        }
    }
}

#[allow(clippy::large_enum_variant)]
pub enum Backend {
    Local(Library),
    Remote(Remote),
}

impl Backend {
    pub fn local(dir: &std::path::Path) -> CliResult<Self> {
        Ok(Backend::Local(Library::open(dir)?))
    }

    pub fn remote(url: &str) -> Self {
        Backend::Remote(Remote::new(url))
    }

    /// Upload one file; an empty draft stages it (remote only keeps it).
    pub fn ingest(&self, bytes: &[u8], filename: &str, draft: &MetadataDraft) -> CliResult<Value> {
        match self {
            Backend::Local(lib) => Ok(to_value(&lib.ingest_one(bytes, filename, draft)?)),
            Backend::Remote(r) => {
                let mut fields = draft_fields(draft);
                fields.retain(|(_, v)| !v.is_empty());
                r.multipart("/series", &fields, Some((filename, bytes)))
            }
        }
    }

    pub fn ingest_bulk(&self, archive: &[u8]) -> CliResult<Value> {
        match self {
            Backend::Local(lib) => Ok(to_value(&lib.ingest_bulk(archive)?)),
            Backend::Remote(r) => r.send_bytes("/series/bulk", "application/zip", archive),
        }
    }

    /// Generate and add `n_per_class` series of every synthetic class.
    pub fn seed_synthetic(&self, n_per_class: usize, seed: u64) -> CliResult<Vec<SeriesId>> {
        let series = seed_library(n_per_class, seed);
        match self {
            Backend::Local(lib) => {
                let prepared = series
                    .iter()
                    .map(|s| {
                        let features = compute_features(&s.values)
                            .map_err(|e| CliError::new("computation_error", e.to_string()))?;
                        Ok(NewSeries {
                            values: s.values.clone(),
                            metadata: synth_draft(s).validate()?,
                            features,
                            truncated: false,
                        })
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                prepared.into_iter().map(|n| Ok(lib.add_series(n)?.id)).collect()
            }
            Backend::Remote(r) => {
                let mut ids = Vec::with_capacity(series.len());
                for chunk in series.chunks(SEED_CHUNK) {
                    let items = r.send_bytes("/series/bulk", "application/zip", &synth_bundle(chunk))?;
                    for item in items.as_array().into_iter().flatten() {
                        match item["id"].as_str() {
                            Some(id) => ids.push(parse_id(id)?),
                            None => {
                                return Err(CliError::new(
                                    item["code"].as_str().unwrap_or("ingest_error"),
                                    format!("{}: {}", item["filename"], item["message"]),
                                ))
                            }
                        }
                    }
                }
                Ok(ids)
            }
        }
    }

    pub fn get(&self, id: &str) -> CliResult<Value> {
        match self {
            Backend::Local(lib) => Ok(to_value(&tse_server::SeriesRecordDoc::from(&*lib.get(&parse_id(id)?)?))),
            Backend::Remote(r) => r.get(&format!("/series/{id}"), &[]),
        }
    }

    pub fn list(&self, filter: &ListFilter, limit: Option<usize>) -> CliResult<Value> {
        match self {
            Backend::Local(lib) => Ok(to_value(&series_summaries(lib, filter, 0, limit))),
            Backend::Remote(r) => {
                let mut q = Vec::new();
                if let Some(c) = &filter.category_prefix {
                    q.push(("category", c.clone()));
                }
                if let Some(t) = &filter.tag {
                    q.push(("tag", t.clone()));
                }
                if let Some(l) = limit {
                    q.push(("limit", l.to_string()));
                }
                r.get("/series", &q)
            }
        }
    }

    pub fn neighbors(&self, id: &str, query: &GraphQuery) -> CliResult<Value> {
        match self {
            Backend::Local(lib) => Ok(to_value(&graph_document(lib, &parse_id(id)?, query)?)),
            Backend::Remote(r) => {
                let mut q = vec![("k", query.k.to_string())];
                if let Some(t) = query.tau {
                    q.push(("tau", t.to_string()));
                }
                if !query.categories.is_empty() {
                    q.push(("cats", query.categories.join(",")));
                }
                r.get(&format!("/series/{id}/neighbors"), &q)
            }
        }
    }

    pub fn features(&self, id: &str) -> CliResult<Value> {
        match self {
            Backend::Local(lib) => Ok(to_value(&lib.features(&parse_id(id)?)?)),
            Backend::Remote(r) => r.get(&format!("/series/{id}/features"), &[]),
        }
    }

    pub fn categories(&self) -> CliResult<Value> {
        match self {
            Backend::Local(lib) => Ok(to_value(&lib.categories())),
            Backend::Remote(r) => r.get("/categories", &[]),
        }
    }

    /// Run a projection to completion; remote mode polls the job resource.
    pub fn project(&self, params: &ProjectionParams) -> CliResult<Value> {
        match self {
            Backend::Local(lib) => Ok(to_value(&lib.project(params)?)),
            Backend::Remote(r) => {
                let job =
                    r.send_bytes("/projection", "application/json", &serde_json::to_vec(params).expect("params"))?;
                let id = job["job_id"].as_str().ok_or_else(|| CliError::new("bad_response", "missing job_id"))?;
                loop {
                    let doc = r.get(&format!("/projection/{id}"), &[])?;
                    match doc["status"].as_str() {
                        Some("running") => std::thread::sleep(Duration::from_millis(200)),
                        Some("done") => return Ok(doc["projection"].clone()),
                        _ => {
                            let e = &doc["error"];
                            return Err(CliError::new(
                                e["code"].as_str().unwrap_or("computation_error"),
                                e["message"].as_str().unwrap_or("projection failed"),
                            ));
                        }
                    }
                }
            }
        }
    }

    pub fn export(&self, id: &str, k: usize, format: ExportFormat) -> CliResult<Vec<u8>> {
        match self {
            Backend::Local(lib) => {
                let id = parse_id(id)?;
                match format {
                    ExportFormat::Json => Ok(serde_json::to_vec(&lib.export_json(&id, k)?).expect("export serializes")),
                    ExportFormat::Zip => Ok(lib.export_zip(&id, k)?),
                }
            }
            Backend::Remote(r) => {
                r.get_bytes(&format!("/series/{id}/export.{}", format.extension()), &[("k", k.to_string())])
            }
        }
    }

    pub fn watch(&self, id: &str, mode: WatchMode) -> CliResult<Value> {
        match self {
            Backend::Local(lib) => Ok(to_value(&lib.register_watch(&parse_id(id)?, mode)?)),
            Backend::Remote(r) => r.send_bytes(
                &format!("/series/{id}/watch"),
                "application/json",
                &serde_json::to_vec(&mode).expect("mode"),
            ),
        }
    }

    pub fn watches(&self, id: &str) -> CliResult<Value> {
        match self {
            Backend::Local(lib) => {
                let id = parse_id(id)?;
                lib.get(&id)?;
                Ok(to_value(&lib.watches().into_iter().filter(|w| w.series_id == id).collect::<Vec<_>>()))
            }
            Backend::Remote(r) => r.get(&format!("/series/{id}/watch"), &[]),
        }
    }

    pub fn rebuild_index(&self) -> CliResult<u64> {
        match self {
            Backend::Local(lib) => Ok(lib.rebuild_index()?),
            Backend::Remote(_) => Err(local_only("rebuild-index")),
        }
    }

    pub fn tombstone(&self, id: &str) -> CliResult<()> {
        match self {
            Backend::Local(lib) => Ok(lib.tombstone(&parse_id(id)?)?),
            Backend::Remote(_) => Err(local_only("admin tombstone")),
        }
    }

    pub fn drain_outbox(&self, sink: &dyn AlertSink, limit: usize) -> CliResult<Value> {
        match self {
            Backend::Local(lib) => Ok(to_value(&lib.drain_outbox(sink, limit)?)),
            Backend::Remote(_) => Err(local_only("drain-outbox")),
        }
    }
}

/// Series per bulk request when seeding a remote library.
const SEED_CHUNK: usize = 100;

pub fn synth_draft(s: &SynthSeries) -> MetadataDraft {
    MetadataDraft {
        name: Some(s.name.clone()),
        sampling_rate: Some("1 per step".into()),
        description: Some(s.description.clone()),
        source: Some("tse seed-synthetic".into()),
        category: Some(s.category.clone()),
        tags: Some(format!("synthetic,{}", s.class)),
        ..Default::default()
    }
}

fn synth_bundle(series: &[SynthSeries]) -> Vec<u8> {
    let mut files = Vec::with_capacity(series.len() + 1);
    let mut rows = Vec::with_capacity(series.len());
    for s in series {
        let filename = format!("{}-{}.csv", s.class, s.name);
        files.push((filename.clone(), write_csv(&s.values).into_bytes()));
        rows.push((filename, synth_draft(s)));
    }
    files.push((MANIFEST_NAME.to_string(), write_manifest(&rows)));
    write_zip(&files)
}

fn draft_fields(d: &MetadataDraft) -> Vec<(&'static str, String)> {
    [
        ("name", &d.name),
        ("sampling_rate", &d.sampling_rate),
        ("description", &d.description),
        ("source", &d.source),
        ("category", &d.category),
        ("tags", &d.tags),
        ("contact_email", &d.contact_email),
        ("opt_in_alerts", &d.opt_in_alerts),
    ]
    .into_iter()
    .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
    .collect()
}

/// Thin blocking HTTP client for the server API.
pub struct Remote {
    base: String,
    agent: ureq::Agent,
}

const BOUNDARY: &str = "----tse-cli-form-boundary";
const RESPONSE_LIMIT: u64 = 1 << 30;

impl Remote {
    pub fn new(base: &str) -> Self {
        let config = ureq::Agent::config_builder().http_status_as_error(false).build();
        Remote { base: base.trim_end_matches('/').to_string(), agent: ureq::Agent::new_with_config(config) }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn finish(resp: ureq::http::Response<ureq::Body>) -> CliResult<Vec<u8>> {
        let status = resp.status();
        let body = resp.into_body().with_config().limit(RESPONSE_LIMIT).read_to_vec()?;
        if status.is_success() {
            return Ok(body);
        }
        let v: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
        Err(CliError {
            code: v["code"].as_str().map(String::from).unwrap_or_else(|| format!("http_{}", status.as_u16())),
            message: v["message"]
                .as_str()
                .map(String::from)
                .unwrap_or_else(|| String::from_utf8_lossy(&body).into_owned()),
            fields: v["fields"]
                .as_array()
                .map(|a| a.iter().filter_map(|f| f.as_str().map(String::from)).collect())
                .unwrap_or_default(),
        })
    }

    fn json(bytes: Vec<u8>) -> CliResult<Value> {
        serde_json::from_slice(&bytes).map_err(|e| CliError::new("bad_response", e.to_string()))
    }

    pub fn get_bytes(&self, path: &str, query: &[(&str, String)]) -> CliResult<Vec<u8>> {
        let req = self.agent.get(self.url(path)).query_pairs(query.iter().map(|(k, v)| (*k, v.as_str())));
        Self::finish(req.call()?)
    }

    pub fn get(&self, path: &str, query: &[(&str, String)]) -> CliResult<Value> {
        Self::json(self.get_bytes(path, query)?)
    }

    pub fn send_bytes(&self, path: &str, content_type: &str, body: &[u8]) -> CliResult<Value> {
        let resp = self.agent.post(self.url(path)).header("Content-Type", content_type).send(body)?;
        Self::json(Self::finish(resp)?)
    }

    pub fn multipart(&self, path: &str, fields: &[(&str, String)], file: Option<(&str, &[u8])>) -> CliResult<Value> {
        let mut body = Vec::new();
        for (name, value) in fields {
            body.extend(
                format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").bytes(),
            );
        }
        if let Some((filename, bytes)) = file {
            let filename = filename.replace('"', "_");
            body.extend(
                format!(
                    "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{filename}\"\r\n\
                     Content-Type: application/octet-stream\r\n\r\n"
                )
                .bytes(),
            );
            body.extend_from_slice(bytes);
            body.extend_from_slice(b"\r\n");
        }
        body.extend(format!("--{BOUNDARY}--\r\n").bytes());
        self.send_bytes(path, &format!("multipart/form-data; boundary={BOUNDARY}"), &body)
    }
}
