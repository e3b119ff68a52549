//! Zip bundles of series files with an optional `manifest.csv`.

use std::collections::HashMap;
use std::io::{Cursor, Read, Write};

use serde::Deserialize;
use zip::write::SimpleFileOptions;

use super::IngestError;
use crate::metadata::MetadataDraft;

pub const MANIFEST_NAME: &str = "manifest.csv";
pub const MANIFEST_COLUMNS: [&str; 9] = [
    "filename",
    "name",
    "sampling_rate",
    "description",
    "source",
    "category",
    "tags",
    "contact_email",
    "opt_in_alerts",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Series files in archive order plus the manifest rows keyed by filename.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    pub files: Vec<ArchiveFile>,
    pub manifest: HashMap<String, MetadataDraft>,
}

impl Bundle {
    /// Manifest row for a file, matched on the full path or the base name.
    pub fn metadata_for(&self, name: &str) -> Option<&MetadataDraft> {
        self.manifest.get(name).or_else(|| self.manifest.get(base_name(name)))
    }
}

fn base_name(path: &str) -> &str {
    path.rsplit('/').next().unwrap_or(path)
}

fn skipped(name: &str) -> bool {
    name.ends_with('/') || name.starts_with("__MACOSX/") || base_name(name).starts_with('.')
}

#[derive(Deserialize)]
struct ManifestRow {
    filename: String,
    name: Option<String>,
    sampling_rate: Option<String>,
    description: Option<String>,
    source: Option<String>,
    category: Option<String>,
    tags: Option<String>,
    contact_email: Option<String>,
    opt_in_alerts: Option<String>,
}

pub fn parse_manifest(bytes: &[u8]) -> Result<HashMap<String, MetadataDraft>, IngestError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let mut out = HashMap::new();
    for row in reader.deserialize::<ManifestRow>() {
        let row = row.map_err(|e| IngestError::MalformedArchive(format!("{MANIFEST_NAME}: {e}")))?;
        out.insert(
            row.filename,
            MetadataDraft {
                name: row.name,
                sampling_rate: row.sampling_rate,
                description: row.description,
                source: row.source,
                category: row.category,
                tags: row.tags,
                contact_email: row.contact_email,
                opt_in_alerts: row.opt_in_alerts,
            },
        );
    }
    Ok(out)
}

pub fn read_bundle(bytes: &[u8]) -> Result<Bundle, IngestError> {
    let mut archive =
        zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| IngestError::MalformedArchive(e.to_string()))?;
    let mut bundle = Bundle::default();
    for i in 0..archive.len() {
        let mut entry = archive.by_index(i).map_err(|e| IngestError::MalformedArchive(e.to_string()))?;
        let name = entry.name().to_string();
        if skipped(&name) {
            continue;
        }
        let mut buf = Vec::with_capacity(entry.size() as usize);
        entry.read_to_end(&mut buf).map_err(|e| IngestError::MalformedArchive(format!("{name}: {e}")))?;
        if base_name(&name) == MANIFEST_NAME {
            bundle.manifest = parse_manifest(&buf)?;
        } else {
            bundle.files.push(ArchiveFile { name, bytes: buf });
        }
    }
    Ok(bundle)
}

/// Write `manifest.csv` rows for `(filename, metadata)` pairs.
pub fn write_manifest(rows: &[(String, MetadataDraft)]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MANIFEST_COLUMNS).expect("in-memory write");
    for (file, m) in rows {
        let cell = |v: &Option<String>| v.clone().unwrap_or_default();
        w.write_record([
            file.clone(),
            cell(&m.name),
            cell(&m.sampling_rate),
            cell(&m.description),
            cell(&m.source),
            cell(&m.category),
            cell(&m.tags),
            cell(&m.contact_email),
            cell(&m.opt_in_alerts),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

/// Deflated zip of named files.
pub fn write_zip(files: &[(String, Vec<u8>)]) -> Vec<u8> {
    let mut zip = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let options = SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
    for (name, bytes) in files {
        zip.start_file(name.as_str(), options).expect("in-memory zip");
        zip.write_all(bytes).expect("in-memory zip");
    }
    zip.finish().expect("in-memory zip").into_inner()
}
