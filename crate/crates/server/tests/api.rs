use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;
use tse_core::signal::compute_features;
use tse_library::alerts::FileSink;
use tse_library::ingest::bulk::read_bundle;
use tse_library::{Library, MetadataDraft, NewSeries};
use tse_server::{router, spawn_delivery, AppState};

const BOUNDARY: &str = "tse-test-boundary";

fn ar1(rng: &mut impl Rng, n: usize, phi: f64) -> Vec<f64> {
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            x = phi * x + rng.random::<f64>() - 0.5;
            x
        })
        .collect()
}

fn draft(name: &str, category: &str) -> MetadataDraft {
    MetadataDraft {
        name: Some(name.into()),
        sampling_rate: Some("1 Hz".into()),
        description: Some("contract test".into()),
        source: Some("generated".into()),
        category: Some(category.into()),
        ..Default::default()
    }
}

struct Fixture {
    _dir: TempDir,
    library: Arc<Library>,
    app: Router,
}

/// A library of 30 AR(1) series split across two categories.
fn fixture(body_limit: Option<usize>) -> Fixture {
    let dir = TempDir::new().unwrap();
    let library = Arc::new(Library::open(dir.path()).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..30 {
        let phi = if i % 2 == 0 { 0.9 } else { -0.5 };
        let cat = if i % 2 == 0 { "synthetic/ar/positive" } else { "synthetic/ar/negative" };
        let values = ar1(&mut rng, 400, phi);
        let metadata = draft(&format!("ar-{i}"), cat).validate().unwrap();
        library
            .add_series(NewSeries { features: compute_features(&values).unwrap(), values, metadata, truncated: false })
            .unwrap();
    }
    let mut state = AppState::new(Arc::clone(&library));
    if let Some(limit) = body_limit {
        state.body_limit = limit;
    }
    Fixture { _dir: dir, library, app: router(state) }
}

fn multipart(file: Option<(&str, &[u8])>, fields: &[(&str, &str)]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, value) in fields {
        body.extend(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").bytes(),
        );
    }
    if let Some((filename, bytes)) = file {
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
    body
}

fn post_multipart(uri: &str, body: Vec<u8>) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .header(header::CONTENT_LENGTH, body.len())
        .body(Body::from(body))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post_json(uri: &str, json: Value) -> Request<Body> {
    Request::post(uri).header(header::CONTENT_TYPE, "application/json").body(Body::from(json.to_string())).unwrap()
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn send_json(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let (status, bytes) = send(app, req).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn sample_txt(seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tse_library::ingest::write_txt(&ar1(&mut rng, 300, 0.8)).into_bytes()
}

const FULL_METADATA: &[(&str, &str)] = &[
    ("name", "uploaded"),
    ("sampling_rate", "10 Hz"),
    ("description", "an upload"),
    ("source", "contract test"),
    ("category", "synthetic/ar/positive"),
    ("tags", "ar; Test"),
];

#[tokio::test]
async fn health() {
    let f = fixture(None);
    let (status, body) = send_json(&f.app, get("/health")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn upload_with_metadata_is_added_with_twelve_neighbor_preview() {
    let f = fixture(None);
    let (status, body) =
        send_json(&f.app, post_multipart("/series", multipart(Some(("x.txt", &sample_txt(1))), FULL_METADATA))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["status"], "added");
    assert_eq!(body["format"], "txt");
    assert_eq!(body["length"], 300);
    assert_eq!(body["preview"].as_array().unwrap().len(), 12);
    assert_eq!(f.library.len(), 31);

    let id = body["id"].as_str().unwrap();
    let (status, rec) = send_json(&f.app, get(&format!("/series/{id}"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["license"], "CC0");
    assert_eq!(rec["values"].as_array().unwrap().len(), 300);
    assert_eq!(rec["metadata"]["tags"], serde_json::json!(["ar", "test"]));
}

#[tokio::test]
async fn missing_required_field_is_rejected_with_field_list() {
    let f = fixture(None);
    let fields: Vec<_> = FULL_METADATA.iter().copied().filter(|(k, _)| *k != "source").collect();
    let (status, body) =
        send_json(&f.app, post_multipart("/series", multipart(Some(("x.txt", &sample_txt(2))), &fields))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "validation_error");
    assert_eq!(body["fields"], serde_json::json!(["source"]));
    assert_eq!(f.library.len(), 30);
}

#[tokio::test]
async fn upload_without_metadata_is_staged_then_promoted() {
    let f = fixture(None);
    let csv_upload: Vec<u8> = std::iter::once("label,value\n".to_string())
        .chain((0..64).map(|i| format!("s{i},{}\n", ((i * 37) % 11) as f64 * 0.5)))
        .collect::<String>()
        .into_bytes();
    let (status, body) =
        send_json(&f.app, post_multipart("/series", multipart(Some(("y.csv", &csv_upload)), &[]))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["status"], "staged");
    assert_eq!(body["preview"].as_array().unwrap().len(), 12);
    assert_eq!(f.library.len(), 30);

    let sid = body["staging_id"].as_str().unwrap().to_string();
    let mut fields = vec![("staging_id", sid.as_str())];
    fields.extend_from_slice(FULL_METADATA);
    let (status, body) = send_json(&f.app, post_multipart("/series", multipart(None, &fields))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(f.library.len(), 31);

    // a staging id is single use
    let (status, _) = send_json(&f.app, post_multipart("/series", multipart(None, &fields))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn parse_errors_carry_codes() {
    let f = fixture(None);
    let (status, body) =
        send_json(&f.app, post_multipart("/series", multipart(Some(("bad.txt", b"1\n2\nabc\n4\n")), FULL_METADATA)))
            .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "parse_error");
    assert!(body["message"].as_str().unwrap().contains('3'), "{body}");

    let (status, body) = send_json(
        &f.app,
        post_multipart("/series", multipart(Some(("c.txt", "5\n".repeat(64).as_bytes())), FULL_METADATA)),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "constant_series");

    let (status, body) = send_json(&f.app, post_multipart("/series", multipart(None, FULL_METADATA))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "malformed_request");
    assert_eq!(f.library.len(), 30);
}

#[tokio::test]
async fn oversize_body_is_413() {
    let f = fixture(Some(2048));
    let big: Vec<u8> = (0..1000).flat_map(|i| format!("{i}.5\n").into_bytes()).collect();
    assert!(big.len() > 2048);
    let (status, body) =
        send_json(&f.app, post_multipart("/series", multipart(Some(("big.txt", &big)), FULL_METADATA))).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(body["code"], "payload_too_large");

    // without a declared length the streaming limit still applies
    let req = Request::post("/series")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(Some(("big.txt", &big)), FULL_METADATA)))
        .unwrap();
    let (status, _) = send_json(&f.app, req).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(f.library.len(), 30);
}

#[tokio::test]
async fn neighbors_graph_and_category_filter() {
    let f = fixture(None);
    let target = f.library.list(&Default::default())[0].id;
    let (status, g) = send_json(&f.app, get(&format!("/series/{target}/neighbors"))).await;
    assert_eq!(status, StatusCode::OK);
    let nodes = g["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 13);
    assert_eq!(nodes[0]["id"], target.to_string());
    assert_eq!(nodes[0]["distance"], 0.0);
    for n in nodes {
        assert!(n["preview"].as_array().unwrap().len() <= 200);
        assert!(n["name"].as_str().unwrap().starts_with("ar-"));
    }
    let expected: Vec<String> = f.library.neighbors(&target, 12).unwrap().iter().map(|n| n.id.to_string()).collect();
    let got: Vec<String> = nodes[1..].iter().map(|n| n["id"].as_str().unwrap().to_string()).collect();
    assert_eq!(got, expected);
    for e in g["edges"].as_array().unwrap() {
        let d = e["distance"].as_f64().unwrap();
        assert!((e["weight"].as_f64().unwrap() - 1.0 / (1.0 + d)).abs() < 1e-12);
    }

    let (status, g) =
        send_json(&f.app, get(&format!("/series/{target}/neighbors?k=5&tau=0&cats=synthetic/ar/negative"))).await;
    assert_eq!(status, StatusCode::OK);
    let nodes = g["nodes"].as_array().unwrap();
    assert!(nodes[1..].iter().all(|n| n["category"] == "synthetic/ar/negative"));
    assert_eq!(nodes.len() - 1 + g["filtered_count"].as_u64().unwrap() as usize, 5);
    assert!(g["edges"].as_array().unwrap().iter().all(|e| e["a"] == target.to_string()));

    let (status, g) = send_json(&f.app, get(&format!("/series/{target}/neighbors?k=0"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(g["nodes"].as_array().unwrap().len(), 1);
    let (status, body) = send_json(&f.app, get(&format!("/series/{target}/neighbors?tau=-1"))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "invalid_parameter");
    let (_, g) = send_json(&f.app, get(&format!("/series/{target}/neighbors?cats=real-world"))).await;
    assert_eq!(g["nodes"].as_array().unwrap().len(), 1);
    assert_eq!(g["filtered_count"], 12);
    let (status, _) = send_json(&f.app, get("/series/00000000000000000000000000000000/neighbors")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send_json(&f.app, get("/series/not-an-id")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn features_and_listing() {
    let f = fixture(None);
    let target = f.library.list(&Default::default())[3].id;
    let (status, body) = send_json(&f.app, get(&format!("/series/{target}/features"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["features"].as_array().unwrap().len(), 20);

    let (_, all) = send_json(&f.app, get("/series")).await;
    assert_eq!(all.as_array().unwrap().len(), 30);
    let (_, neg) = send_json(&f.app, get("/series?category=synthetic/ar/negative&limit=4&offset=1")).await;
    let neg = neg.as_array().unwrap();
    assert_eq!(neg.len(), 4);
    assert!(neg.iter().all(|s| s["metadata"]["category"] == "synthetic/ar/negative"));

    let (status, tree) = send_json(&f.app, get("/categories")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(tree[0]["name"], "synthetic");
    assert_eq!(tree[0]["count"], 30);
}

#[tokio::test]
async fn export_formats_and_reingest() {
    let f = fixture(None);
    let target = f.library.list(&Default::default())[5].id;
    let (status, doc) = send_json(&f.app, get(&format!("/series/{target}/export.json?k=4"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["neighbors"].as_array().unwrap().len(), 4);
    assert_eq!(doc["target"]["license"], "CC0");

    let (status, zip) = send(&f.app, get(&format!("/series/{target}/export.zip?k=4"))).await;
    assert_eq!(status, StatusCode::OK);
    let bundle = read_bundle(&zip).unwrap();
    assert_eq!(bundle.files.len(), 5);

    let (status, body) = send_json(&f.app, get(&format!("/series/{target}/export.xml"))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "unknown_format");

    let req =
        Request::post("/series/bulk").header(header::CONTENT_TYPE, "application/zip").body(Body::from(zip)).unwrap();
    let (status, items) = send_json(&f.app, req).await;
    assert_eq!(status, StatusCode::OK, "{items}");
    assert!(items.as_array().unwrap().iter().all(|i| i["status"] == "added"));
    assert_eq!(f.library.len(), 35);

    let original = f.library.get(&target).unwrap();
    let copy = f
        .library
        .list(&Default::default())
        .into_iter()
        .rev()
        .find(|r| r.metadata.name == original.metadata.name && r.id != target)
        .unwrap();
    assert_eq!(
        copy.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        original.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[tokio::test]
async fn watches_require_opt_in() {
    let f = fixture(None);
    let plain = f.library.list(&Default::default())[0].id;
    let (status, body) =
        send_json(&f.app, post_json(&format!("/series/{plain}/watch"), serde_json::json!({"mode": "rank", "k": 3})))
            .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "not_opted_in");

    let mut fields = FULL_METADATA.to_vec();
    fields.extend([("contact_email", "me@example.org"), ("opt_in_alerts", "yes")]);
    let (status, body) =
        send_json(&f.app, post_multipart("/series", multipart(Some(("w.txt", &sample_txt(9))), &fields))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let id = body["id"].as_str().unwrap().to_string();

    let (_, watches) = send_json(&f.app, get(&format!("/series/{id}/watch"))).await;
    assert_eq!(watches.as_array().unwrap().len(), 1);
    assert_eq!(watches[0]["mode"], serde_json::json!({"mode": "rank", "k": 12}));

    let (status, w) =
        send_json(&f.app, post_json(&format!("/series/{id}/watch"), serde_json::json!({"mode": "radius", "r": "inf"})))
            .await;
    assert_eq!(status, StatusCode::CREATED, "{w}");
    let (_, watches) = send_json(&f.app, get(&format!("/series/{id}/watch"))).await;
    assert_eq!(watches.as_array().unwrap().len(), 2);

    // the infinite radius watch fires on the next insertion
    let (status, _) =
        send_json(&f.app, post_multipart("/series", multipart(Some(("n.txt", &sample_txt(10))), FULL_METADATA))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(f.library.store().alerts().iter().any(|a| a.watch_id.to_string() == w["watch_id"].as_str().unwrap()));

    // the background task hands pending alerts to the sink
    let out = f._dir.path().join("alerts.jsonl");
    let task = spawn_delivery(Arc::clone(&f.library), Arc::new(FileSink::new(&out)), Duration::from_millis(20));
    let mut lines = 0;
    for _ in 0..200 {
        lines = std::fs::read_to_string(&out).map(|s| s.lines().count()).unwrap_or(0);
        if lines > 0 && f.library.store().undelivered(usize::MAX).is_empty() {
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    task.abort();
    assert!(lines >= 1);
    assert!(f.library.store().undelivered(usize::MAX).is_empty());
}

#[tokio::test]
async fn projection_jobs() {
    let f = fixture(None);
    // long enough that the second request overlaps the first
    let (status, job) = send_json(
        &f.app,
        post_json("/projection", serde_json::json!({"method": "tsne", "iterations": 60000, "perplexity": 5.0})),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    let (status, body) = send_json(&f.app, post_json("/projection", serde_json::json!({"method": "pca"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "projection_running");

    let job_id = job["job_id"].as_str().unwrap();
    let done = loop {
        let (status, doc) = send_json(&f.app, get(&format!("/projection/{job_id}"))).await;
        assert_eq!(status, StatusCode::OK);
        if doc["status"] != "running" {
            break doc;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    };
    assert_eq!(done["status"], "done", "{done}");
    assert_eq!(done["projection"]["points"].as_array().unwrap().len(), 30);

    let (status, csv) = send(&f.app, get(&format!("/projection/{job_id}?format=csv"))).await;
    assert_eq!(status, StatusCode::OK);
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("id,x,y,category\n"));
    assert_eq!(csv.lines().count(), 31);

    let (status, job) = send_json(&f.app, post_json("/projection", serde_json::json!({"method": "pca"}))).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    let (status, _) = send_json(&f.app, get("/projection/999")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
