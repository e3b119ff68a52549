use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;
use tse_cli::render::{cell, render, rows_of};
use tse_cli::synth::{FLOW_DT, FLOW_STRIDE, FLOW_TRANSIENT, SDE_DT, SERIES_LEN, SPROTT_OMEGA};
use tse_cli::{Backend, CliError, CliResult, ExportFormat, OutputFormat};
use tse_core::projection::TsneParams;
use tse_library::alerts::{AlertSink, FileSink, WatchMode, WebhookSink};
use tse_library::{GraphQuery, ListFilter, MetadataDraft, ProjectionMethod, ProjectionParams};

#[derive(Parser)]
#[command(name = "tse", version, about = "Self-organizing time-series library")]
struct Cli {
    /// Library directory for local mode.
    #[arg(long, global = true, env = "TSE_DATA_DIR", default_value = "tse-data")]
    data_dir: PathBuf,
    /// Talk to a running server instead of opening the data directory.
    #[arg(long, global = true, env = "TSE_SERVER_URL")]
    server_url: Option<String>,
    /// Seed for synthetic generation and t-SNE.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    output: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and add the synthetic seed library.
    #[command(long_about = seed_help())]
    SeedSynthetic {
        #[arg(long, default_value_t = 200)]
        per_class: usize,
    },
    /// Upload files; a .zip is read as a bundle with an optional manifest.csv.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        metadata: MetadataArgs,
    },
    /// List stored series.
    List {
        #[arg(long)]
        category: Option<String>,
        #[arg(long)]
        tag: Option<String>,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Show one series with its values.
    Show { id: String },
    /// Nearest neighbors of a series.
    Neighbors {
        id: String,
        #[arg(short, long, default_value_t = 12)]
        k: usize,
        /// Fixed neighbor-neighbor edge threshold (adaptive by default).
        #[arg(long)]
        tau: Option<f64>,
        /// Comma-separated category prefixes to keep.
        #[arg(long, value_delimiter = ',')]
        cats: Vec<String>,
    },
    /// Feature values, normalized values and library percentiles.
    Features { id: String },
    /// Category tree with counts.
    Categories,
    /// Two-dimensional projection of the library, one row per series.
    Project {
        #[arg(long, value_enum, default_value_t = Method::Tsne)]
        method: Method,
        #[arg(long, default_value_t = TsneParams::default().perplexity)]
        perplexity: f64,
        #[arg(long, default_value_t = TsneParams::default().iterations)]
        iterations: usize,
    },
    /// Download a series and its neighbors.
    Export {
        id: String,
        #[arg(short, long, default_value_t = 12)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Format::Zip)]
        format: Format,
        /// Defaults to `{id}.{json|zip}`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refit normalization; the epoch advances by one.
    RebuildIndex,
    /// Register a watch, or list watches when no mode is given.
    Watch {
        id: String,
        #[arg(long, conflicts_with = "radius")]
        rank: Option<usize>,
        /// Distance radius; `inf` matches every insertion.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        list: bool,
    },
    /// Hand pending alerts to a sink.
    DrainOutbox {
        #[arg(long, conflicts_with = "file", required_unless_present = "file")]
        webhook: Option<String>,
        /// Append alerts as JSON lines.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        limit: usize,
    },
    /// Administrative changes to the store.
    Admin {
        /// Hide a series from every view.
        #[arg(long)]
        tombstone: String,
    },
    /// Run the HTTP server on the data directory.
    Serve {
        #[arg(long, env = "TSE_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "TSE_BODY_LIMIT", default_value_t = tse_server::DEFAULT_BODY_LIMIT)]
        body_limit: usize,
        /// Deliver alerts to this URL in the background.
        #[arg(long, env = "TSE_WEBHOOK_URL")]
        webhook_url: Option<String>,
    },
}

#[derive(Args)]
struct MetadataArgs {
    #[arg(long)]
    name: Option<String>,
    /// A number and a unit, e.g. `8000 Hz`.
    #[arg(long)]
    sampling_rate: Option<String>,
    #[arg(long)]
    description: Option<String>,
    #[arg(long)]
    source: Option<String>,
    /// Slash-separated path under `synthetic` or `real-world`.
    #[arg(long)]
    category: Option<String>,
    /// Comma or semicolon separated.
    #[arg(long)]
    tags: Option<String>,
    #[arg(long)]
    contact_email: Option<String>,
    /// Watch this series for future close matches (needs --contact-email).
    #[arg(long)]
    opt_in: bool,
}

impl MetadataArgs {
    fn draft(&self) -> MetadataDraft {
        MetadataDraft {
            name: self.name.clone(),
            sampling_rate: self.sampling_rate.clone(),
            description: self.description.clone(),
            source: self.source.clone(),
            category: self.category.clone(),
            tags: self.tags.clone(),
            contact_email: self.contact_email.clone(),
            opt_in_alerts: self.opt_in.then(|| "true".to_string()),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Pca,
    Tsne,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Zip,
}

fn seed_help() -> String {
    format!(
        "Generate and add the synthetic seed library.\n\n\
         Classes (category synthetic/<class>/<subtype>), {SERIES_LEN} samples each:\n  \
         noise       iid Gaussian, uniform, Beta(2,5), Binomial(20,p)\n  \
         map         logistic (r in [3.6,4]), tent, sine map; 100 iterates discarded\n  \
         flow        x'' = -x^3 + sin({SPROTT_OMEGA} t); damped driven pendulum (angular velocity)\n  \
         stochastic  Ornstein-Uhlenbeck, random walk (Euler-Maruyama, dt {SDE_DT})\n  \
         periodic    sine plus Gaussian noise at SNR 1, 3, 10, 30\n\n\
         Flows use RK4 with dt {FLOW_DT}, sample every {FLOW_STRIDE} steps after a \
         {FLOW_TRANSIENT}-step transient. Initial conditions are drawn uniformly from \
         [-1,1]^2 (flows) or (0.05,0.95) (maps). Output depends only on (class, index, --seed)."
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Command::Serve { listen, body_limit, webhook_url } = cli.command {
        let config = tse_server::ServerConfig { listen, data_dir: cli.data_dir, body_limit, webhook_url };
        let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::new("io_error", e.to_string()))?;
        eprintln!("listening on http://{listen}");
        return rt.block_on(tse_server::serve(config)).map_err(|e| CliError::new("io_error", e.to_string()));
    }
    let backend = match &cli.server_url {
        Some(url) => Backend::remote(url),
        None => Backend::local(&cli.data_dir)?,
    };
    let out = cli.output;
    let print = |headers: &[&str], rows: Vec<Vec<String>>| print!("{}", render(headers, &rows, out));
    match cli.command {
        Command::Serve { .. } => unreachable!(),
        Command::SeedSynthetic { per_class } => {
            let ids = backend.seed_synthetic(per_class, cli.seed)?;
            eprintln!("added {} series", ids.len());
        }
        Command::Ingest { files, metadata } => {
            let draft = metadata.draft();
            let mut rows = Vec::new();
            let mut failure = None;
            let mut preview = None;
            for path in &files {
                let bytes =
                    std::fs::read(path).map_err(|e| CliError::new("io_error", format!("{}: {e}", path.display())))?;
                let filename = file_name(path);
                let result = if filename.to_ascii_lowercase().ends_with(".zip") {
                    backend.ingest_bulk(&bytes).map(|items| items.as_array().cloned().unwrap_or_default())
                } else {
                    backend.ingest(&bytes, &filename, &draft).map(|report| {
                        preview = Some(report["preview"].clone());
                        vec![report]
                    })
                };
                match result {
                    Ok(items) => {
                        for it in &items {
                            if it["status"] == "failed" {
                                eprintln!("{}: {}: {}", cell(&it["filename"]), cell(&it["code"]), cell(&it["message"]));
                                failure.get_or_insert_with(|| {
                                    CliError::new(it["code"].as_str().unwrap_or("ingest_error"), "some files failed")
                                });
                            }
                        }
                        rows.extend(rows_of(
                            &items,
                            &["/filename", "/status", "/id", "/staging_id", "/length", "/truncated"],
                        ));
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", path.display());
                        rows.push(vec![
                            filename,
                            "failed".into(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                        ]);
                        failure.get_or_insert(e);
                    }
                }
            }
            print(&["filename", "status", "id", "staging_id", "length", "truncated"], rows);
            if let (1, Some(Value::Array(p))) = (files.len(), preview) {
                if !p.is_empty() {
                    println!();
                    print(&["id", "distance"], rows_of(&p, &["/id", "/distance"]));
                }
            }
            if let Some(e) = failure {
                return Err(e);
            }
        }
        Command::List { category, tag, limit } => {
            let list = backend.list(&ListFilter { category_prefix: category, tag }, limit)?;
            let docs = list.as_array().cloned().unwrap_or_default();
            print(
                &["id", "name", "category", "length", "created_at"],
                rows_of(&docs, &["/id", "/metadata/name", "/metadata/category", "/length", "/created_at"]),
            );
        }
        Command::Show { id } => {
            let doc = backend.get(&id)?;
            let fields = [
                "/id",
                "/metadata/name",
                "/metadata/category",
                "/metadata/source",
                "/license",
                "/truncated",
                "/created_at",
            ];
            print(
                &["field", "value"],
                fields.iter().map(|f| vec![f[1..].to_string(), cell(doc.pointer(f).unwrap_or(&Value::Null))]).collect(),
            );
            let values: Vec<Value> = doc["values"].as_array().cloned().unwrap_or_default();
            println!();
            print(&["value"], values.iter().map(|v| vec![cell(v)]).collect());
        }
        Command::Neighbors { id, k, tau, cats } => {
            let g = backend.neighbors(&id, &GraphQuery { k, tau, categories: cats })?;
            let nodes = g["nodes"].as_array().cloned().unwrap_or_default();
            let mut rows = rows_of(&nodes, &["/id", "/name", "/category", "/distance", "/similarity"]);
            for (i, r) in rows.iter_mut().enumerate() {
                r.insert(0, i.to_string());
            }
            print(&["rank", "id", "name", "category", "distance", "similarity"], rows);
            eprintln!("epoch {} tau {} filtered {}", cell(&g["epoch"]), cell(&g["tau"]), cell(&g["filtered_count"]));
        }
        Command::Features { id } => {
            let r = backend.features(&id)?;
            let feats = r["features"].as_array().cloned().unwrap_or_default();
            print(
                &["index", "name", "category", "value", "normalized", "percentile", "flag"],
                rows_of(
                    &feats,
                    &[
                        "/index",
                        "/name",
                        "/category",
                        "/value",
                        "/normalized",
                        "/percentile/percentile",
                        "/percentile/flag",
                    ],
                ),
            );
        }
        Command::Categories => {
            let tree = backend.categories()?;
            let mut rows = Vec::new();
            flatten_tree(&tree, &mut rows);
            print(&["path", "count"], rows);
        }
        Command::Project { method, perplexity, iterations } => {
            let method = match method {
                Method::Pca => ProjectionMethod::Pca,
                Method::Tsne => ProjectionMethod::Tsne,
            };
            let tsne = TsneParams { perplexity, iterations, seed: cli.seed, ..TsneParams::default() };
            let p = backend.project(&ProjectionParams { method, tsne })?;
            let points = p["points"].as_array().cloned().unwrap_or_default();
            print(&["id", "x", "y", "category"], rows_of(&points, &["/id", "/x", "/y", "/category"]));
        }
        Command::Export { id, k, format, out } => {
            let format = match format {
                Format::Json => ExportFormat::Json,
                Format::Zip => ExportFormat::Zip,
            };
            let bytes = backend.export(&id, k, format)?;
            let path = out.unwrap_or_else(|| PathBuf::from(format!("{id}.{}", format.extension())));
            std::fs::write(&path, &bytes).map_err(|e| CliError::new("io_error", format!("{}: {e}", path.display())))?;
            eprintln!("wrote {} ({} bytes)", path.display(), bytes.len());
        }
        Command::RebuildIndex => {
            let epoch = backend.rebuild_index()?;
            print(&["epoch"], vec![vec![epoch.to_string()]]);
        }
        Command::Watch { id, rank, radius, list } => {
            let docs = if list || (rank.is_none() && radius.is_none()) {
                backend.watches(&id)?.as_array().cloned().unwrap_or_default()
            } else {
                let mode = match (rank, radius) {
                    (Some(k), _) => WatchMode::Rank { k },
                    (_, Some(r)) => WatchMode::Radius { r },
                    _ => unreachable!(),
                };
                vec![backend.watch(&id, mode)?]
            };
            print(
                &["watch_id", "series_id", "mode", "k", "r", "created_at"],
                rows_of(&docs, &["/watch_id", "/series_id", "/mode/mode", "/mode/k", "/mode/r", "/created_at"]),
            );
        }
        Command::DrainOutbox { webhook, file, limit } => {
            let sink: Box<dyn AlertSink> = match (webhook, file) {
                (Some(url), _) => Box::new(WebhookSink::new(url)),
                (_, Some(path)) => Box::new(FileSink::new(path)),
                _ => unreachable!(),
            };
            let delivered = backend.drain_outbox(sink.as_ref(), limit)?;
            let docs = delivered.as_array().cloned().unwrap_or_default();
            print(
                &["alert_id", "watched_series_id", "new_series_id", "distance"],
                rows_of(&docs, &["/alert_id", "/watched_series_id", "/new_series_id", "/distance"]),
            );
        }
        Command::Admin { tombstone } => {
            backend.tombstone(&tombstone)?;
            eprintln!("tombstoned {tombstone}");
        }
    }
    Ok(())
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "upload".into())
}

fn flatten_tree(nodes: &Value, rows: &mut Vec<Vec<String>>) {
    for n in nodes.as_array().into_iter().flatten() {
        rows.push(vec![cell(&n["path"]), cell(&n["count"])]);
        flatten_tree(&n["children"], rows);
    }
}
