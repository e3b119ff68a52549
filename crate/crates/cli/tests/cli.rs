use std::net::TcpListener;
use std::path::Path;
use std::process::{Child, Command, Output};
use std::time::{Duration, Instant};

use tempfile::TempDir;

fn tse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tse")).arg("--data-dir").arg(dir).args(args).output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(s: &str) -> Vec<Vec<String>> {
    s.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), to.join(e.file_name())).unwrap();
    }
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn serve(dir: &Path) -> (Server, String) {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let child = Command::new(env!("CARGO_BIN_EXE_tse"))
        .arg("--data-dir")
        .arg(dir)
        .args(["serve", "--listen", &format!("127.0.0.1:{port}")])
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let url = format!("http://127.0.0.1:{port}");
    let started = Instant::now();
    while ureq::get(format!("{url}/health")).call().is_err() {
        assert!(started.elapsed() < Duration::from_secs(30), "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    }
    (Server(child), url)
}

fn seeded(per_class: usize) -> TempDir {
    let dir = TempDir::new().unwrap();
    let lib = dir.path().join("lib");
    ok(tse(&lib, &["--seed", "5", "seed-synthetic", "--per-class", &per_class.to_string()]));
    dir
}

#[test]
fn seed_list_and_categories() {
    let dir = seeded(4);
    let lib = dir.path().join("lib");
    let rows = csv_rows(&ok(tse(&lib, &["--output", "csv", "list"])));
    assert_eq!(rows.len(), 20);
    let flows = csv_rows(&ok(tse(&lib, &["--output", "csv", "list", "--category", "synthetic/flow"])));
    assert_eq!(flows.len(), 4);
    let cats = ok(tse(&lib, &["--output", "csv", "categories"]));
    assert!(cats.contains("synthetic,20\n"));
    assert!(cats.contains("synthetic/flow/sprott,2\n"));
}

#[test]
fn seeding_is_deterministic() {
    let features = |dir: &TempDir| {
        let lib = dir.path().join("lib");
        let rows = csv_rows(&ok(tse(&lib, &["--output", "csv", "list"])));
        rows.iter()
            .map(|r| {
                let f = ok(tse(&lib, &["--output", "csv", "features", &r[0]]));
                // drop normalized and percentile columns; only raw values must agree
                f.lines().map(|l| l.split(',').take(4).collect::<Vec<_>>().join(",")).collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    let (a, b) = (seeded(2), seeded(2));
    let (fa, fb) = (features(&a), features(&b));
    assert_eq!(fa.len(), 10);
    let mut fa_sorted = fa.clone();
    let mut fb_sorted = fb.clone();
    fa_sorted.sort();
    fb_sorted.sort();
    assert_eq!(fa_sorted, fb_sorted);
}

#[test]
fn malformed_ingest_fails_with_line_number() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("bad.txt");
    std::fs::write(&file, "1.0\n2.0\nnot-a-number\n4.0\n").unwrap();
    let out = tse(&dir.path().join("lib"), &["ingest", file.to_str().unwrap(), "--name", "x"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("parse_error"), "{stderr}");
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn missing_metadata_reports_fields() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("ok.txt");
    std::fs::write(&file, (0..100).map(|i| format!("{}\n", (i as f64 * 0.3).sin())).collect::<String>()).unwrap();
    let out =
        tse(&dir.path().join("lib"), &["ingest", file.to_str().unwrap(), "--name", "x", "--category", "synthetic/a"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("validation_error") && stderr.contains("source"), "{stderr}");
}

#[test]
fn rebuild_index_bumps_epoch_by_one() {
    let dir = seeded(2);
    let lib = dir.path().join("lib");
    let first: u64 = csv_rows(&ok(tse(&lib, &["--output", "csv", "rebuild-index"])))[0][0].parse().unwrap();
    let second: u64 = csv_rows(&ok(tse(&lib, &["--output", "csv", "rebuild-index"])))[0][0].parse().unwrap();
    assert_eq!(second, first + 1);
}

#[test]
fn export_and_reingest_zip() {
    let dir = seeded(3);
    let lib = dir.path().join("lib");
    let target = csv_rows(&ok(tse(&lib, &["--output", "csv", "list"])))[0][0].clone();
    let zip = dir.path().join("out.zip");
    ok(tse(&lib, &["export", &target, "-k", "4", "--out", zip.to_str().unwrap()]));
    let other = dir.path().join("other");
    let rows = csv_rows(&ok(tse(&other, &["--output", "csv", "ingest", zip.to_str().unwrap()])));
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[1] == "added"));

    let original = ok(tse(&lib, &["--output", "csv", "show", &target]));
    let values = |s: &str| s.split("\n\n").nth(1).unwrap().to_string();
    let copies = csv_rows(&ok(tse(&other, &["--output", "csv", "list"])));
    let header = csv_rows(original.split("\n\n").next().unwrap());
    let name = header.iter().find(|r| r[0] == "metadata/name").unwrap()[1].clone();
    let copy = copies.iter().find(|r| r[1] == name).unwrap();
    let copied = ok(tse(&other, &["--output", "csv", "show", &copy[0]]));
    assert_eq!(values(&original), values(&copied));
}

#[test]
fn local_and_remote_agree() {
    let dir = seeded(4);
    let lib = dir.path().join("lib");
    let mirror = dir.path().join("mirror");
    copy_dir(&lib, &mirror);
    let (_server, url) = serve(&mirror);

    let target = csv_rows(&ok(tse(&lib, &["--output", "csv", "list"])))[7][0].clone();
    for args in [
        vec!["--output", "csv", "neighbors", target.as_str()],
        vec!["--output", "csv", "neighbors", target.as_str(), "-k", "5", "--cats", "synthetic/noise,synthetic/map"],
        vec!["--output", "csv", "features", target.as_str()],
        vec!["--output", "csv", "list"],
        vec!["--output", "csv", "categories"],
        vec!["--output", "csv", "show", target.as_str()],
        vec!["--output", "csv", "project", "--method", "pca"],
    ] {
        let local = ok(tse(&lib, &args));
        let mut remote_args = vec!["--server-url", url.as_str()];
        remote_args.extend(&args);
        let remote = ok(tse(&lib, &remote_args));
        assert_eq!(local, remote, "{args:?}");
    }

    let json_local = dir.path().join("l.json");
    let json_remote = dir.path().join("r.json");
    ok(tse(&lib, &["export", &target, "--format", "json", "--out", json_local.to_str().unwrap()]));
    ok(tse(
        &lib,
        &["--server-url", &url, "export", &target, "--format", "json", "--out", json_remote.to_str().unwrap()],
    ));
    assert_eq!(std::fs::read(json_local).unwrap(), std::fs::read(json_remote).unwrap());

    // mutations that have no endpoint refuse to run remotely
    let out = tse(&lib, &["--server-url", &url, "rebuild-index"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported_remote"));

    let out = tse(&lib, &["--server-url", &url, "features", "0123456789abcdef0123456789abcdef"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_found"));
}

#[test]
fn remote_seed_and_ingest() {
    let dir = TempDir::new().unwrap();
    let (_server, url) = serve(&dir.path().join("lib"));
    let unused = dir.path().join("unused");
    ok(tse(&unused, &["--server-url", &url, "--seed", "9", "seed-synthetic", "--per-class", "3"]));
    let rows = csv_rows(&ok(tse(&unused, &["--server-url", &url, "--output", "csv", "list"])));
    assert_eq!(rows.len(), 15);

    let file = dir.path().join("up.csv");
    std::fs::write(
        &file,
        (0..500).map(|i| format!("{}\n", (i as f64 * 0.1).sin() + (i % 7) as f64)).collect::<String>(),
    )
    .unwrap();
    let out = ok(tse(
        &unused,
        &[
            "--server-url",
            &url,
            "--output",
            "csv",
            "ingest",
            file.to_str().unwrap(),
            "--name",
            "up",
            "--sampling-rate",
            "10 Hz",
            "--description",
            "d",
            "--source",
            "s",
            "--category",
            "real-world/test",
            "--contact-email",
            "a@b.org",
            "--opt-in",
        ],
    ));
    let (summary, preview) = out.split_once("\n\n").unwrap();
    let row = &csv_rows(summary)[0];
    assert_eq!(row[1], "added");
    assert_eq!(csv_rows(preview).len(), 12);

    let watches = csv_rows(&ok(tse(&unused, &["--server-url", &url, "--output", "csv", "watch", &row[2]])));
    assert_eq!(watches.len(), 1);
    assert_eq!(watches[0][2], "rank");
    let added =
        csv_rows(&ok(tse(&unused, &["--server-url", &url, "--output", "csv", "watch", &row[2], "--radius", "0.5"])));
    assert_eq!(added[0][2], "radius");
}

#[test]
fn drain_outbox_to_file() {
    let dir = TempDir::new().unwrap();
    let lib = dir.path().join("lib");
    ok(tse(&lib, &["seed-synthetic", "--per-class", "2"]));
    let file = dir.path().join("w.txt");
    std::fs::write(&file, (0..300).map(|i| format!("{}\n", ((i * 13) % 17) as f64)).collect::<String>()).unwrap();
    let meta =
        ["--name", "w", "--sampling-rate", "1 Hz", "--description", "d", "--source", "s", "--category", "real-world/x"];
    let mut args = vec!["--output", "csv", "ingest", file.to_str().unwrap()];
    args.extend(meta);
    args.extend(["--contact-email", "w@example.org", "--opt-in"]);
    let watched = csv_rows(ok(tse(&lib, &args)).split("\n\n").next().unwrap())[0][2].clone();
    ok(tse(&lib, &["watch", &watched, "--radius", "inf"]));
    let mut args = vec!["ingest", file.to_str().unwrap()];
    args.extend(meta);
    ok(tse(&lib, &args));

    let sink = dir.path().join("alerts.jsonl");
    let delivered = csv_rows(&ok(tse(&lib, &["--output", "csv", "drain-outbox", "--file", sink.to_str().unwrap()])));
    assert!(!delivered.is_empty());
    assert!(delivered.iter().all(|r| r[1] == watched));
    assert_eq!(std::fs::read_to_string(&sink).unwrap().lines().count(), delivered.len());
    let again = csv_rows(&ok(tse(&lib, &["--output", "csv", "drain-outbox", "--file", sink.to_str().unwrap()])));
    assert!(again.is_empty());

    ok(tse(&lib, &["admin", "--tombstone", &watched]));
    let out = tse(&lib, &["features", &watched]);
    assert!(!out.status.success());
}
