use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use graphchat::benchmark::{gold_script, load_dataset, report, run_benchmark, ReportFormat};
use graphchat::config::{AppConfig, BackendKind};
use graphchat::graph::{self, shared, PropertyGraph, DEFAULT_LABEL};
use graphchat::llm::MockBackend;
use graphchat::pipeline::{Pipeline, TraceStore};
use graphchat::query::{self, QueryOutcome};
use graphchat::service::{router, AppState};

#[derive(Parser)]
#[command(name = "graphchat", version, about = "Knowledge-graph chat agent: serve, import, query, benchmark")]
struct Cli {
    /// JSON config file. Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
    /// Merge a graph file into the configured graph.
    Import {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = ImportFormat::Auto)]
        format: ImportFormat,
        /// Graph to update; overrides `graph_path`.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Ask one question, or run a Cypher query with --cypher.
    Query {
        #[arg(long)]
        text: String,
        #[arg(long)]
        cypher: bool,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Print the full trace as JSON after the answer.
        #[arg(long)]
        trace: bool,
    },
    /// Run the intent and execution benchmark over a JSONL dataset.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        backend: Option<BackendKind>,
        /// Mock script; overrides `script_path`.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Use the dataset's own gold answers as the mock script.
        #[arg(long)]
        gold: bool,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value = "text")]
        format: ReportFormat,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        /// Write per-record results as JSON here.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Exit with status 2 when execution success falls below this.
        #[arg(long)]
        min_exec_success: Option<f64>,
    },
    /// Write the gold mock script for a dataset.
    GoldScript {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ImportFormat {
    Auto,
    Jsonl,
    Csv,
}

fn load_config(path: Option<&Path>) -> Result<AppConfig> {
    match path {
        Some(p) => AppConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(AppConfig::default()),
    }
}

fn load_graph_or_empty(path: Option<&Path>) -> Result<PropertyGraph> {
    match path {
        Some(p) if p.exists() => graph::load(p).with_context(|| format!("loading graph {}", p.display())),
        _ => Ok(PropertyGraph::new()),
    }
}

fn pipeline(config: &AppConfig) -> Result<Pipeline> {
    Ok(Pipeline::new(config.backend()?, config.prompts()?, config.pipeline_config()))
}

#[derive(Deserialize)]
struct TripleRow {
    head: String,
    relation: String,
    tail: String,
    #[serde(default)]
    head_label: Option<String>,
    #[serde(default)]
    tail_label: Option<String>,
}

/// CSV with a `head,relation,tail` header and optional `head_label`, `tail_label`.
fn graph_from_csv(path: &Path) -> Result<PropertyGraph> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut g = PropertyGraph::new();
    for (i, row) in reader.deserialize::<TripleRow>().enumerate() {
        let row = row.with_context(|| format!("{} row {}", path.display(), i + 2))?;
        let label = |l: &Option<String>| l.clone().filter(|s| !s.is_empty()).unwrap_or_else(|| DEFAULT_LABEL.to_string());
        let head = g.insert_node(&row.head, &label(&row.head_label), Default::default())?;
        let tail = g.insert_node(&row.tail, &label(&row.tail_label), Default::default())?;
        g.insert_edge(head, &row.relation, tail, Default::default())
            .with_context(|| format!("{} row {}", path.display(), i + 2))?;
    }
    Ok(g)
}

fn import(config: &AppConfig, file: &Path, format: ImportFormat, target: Option<PathBuf>) -> Result<()> {
    let target = target
        .or_else(|| config.graph_path.clone())
        .context("no target graph: pass --graph or set graph_path")?;
    let is_csv = match format {
        ImportFormat::Csv => true,
        ImportFormat::Jsonl => false,
        ImportFormat::Auto => file.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")),
    };
    let incoming = if is_csv {
        graph_from_csv(file)?
    } else {
        graph::load(file).with_context(|| format!("loading {}", file.display()))?
    };
    let mut g = load_graph_or_empty(Some(&target))?;
    let summary = g.merge(&incoming)?;
    graph::save(&g, &target)?;
    println!(
        "imported {}: {} nodes and {} edges created; graph now has {} nodes and {} edges",
        file.display(),
        summary.nodes_created,
        summary.edges_created,
        g.node_count(),
        g.edge_count()
    );
    Ok(())
}

fn run_query(config: &AppConfig, text: &str, cypher: bool, graph_path: Option<PathBuf>, show_trace: bool) -> Result<()> {
    let path = graph_path.or_else(|| config.graph_path.clone());
    let g = shared(load_graph_or_empty(path.as_deref())?);
    if cypher {
        match query::run(&g, text)? {
            QueryOutcome::Rows(table) => println!("{}", table.render_text()),
            QueryOutcome::Mutation(summary) => {
                println!("{}", serde_json::to_string(&summary)?);
                if let Some(p) = &path {
                    graph::save(&g.read(), p)?;
                }
            }
        }
        return Ok(());
    }
    let pipeline = pipeline(config)?;
    let trace_id = uuid::Uuid::new_v4().simple().to_string();
    let outcome = pipeline.run(&g, text, &[], &trace_id);
    if let Some(dir) = &config.trace_dir {
        TraceStore::with_dir(dir)?.save(&outcome.trace)?;
    }
    if show_trace {
        eprintln!("{}", outcome.trace.to_json());
    }
    let answer = outcome.result?;
    println!("{answer}");
    if outcome.trace.entries.iter().any(|e| e.mutation.is_some_and(|m| !m.is_empty())) {
        if let Some(p) = &path {
            graph::save(&g.read(), p)?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bench(
    mut config: AppConfig,
    dataset: &Path,
    backend: Option<BackendKind>,
    script: Option<PathBuf>,
    gold: bool,
    graph_path: Option<PathBuf>,
    format: ReportFormat,
    parallelism: usize,
    records_out: Option<PathBuf>,
    floor: Option<f64>,
) -> Result<ExitCode> {
    let records = load_dataset(dataset)?;
    if let Some(b) = backend {
        config.backend = b;
    }
    if script.is_some() {
        config.script_path = script;
    }
    config.validate()?;
    let path = graph_path
        .or_else(|| config.graph_path.clone())
        .context("no graph: pass --graph or set graph_path")?;
    let g = graph::load(&path).with_context(|| format!("loading graph {}", path.display()))?;
    let pipeline = if gold {
        let backend = MockBackend::new(gold_script(&records))?;
        Pipeline::new(std::sync::Arc::new(backend), config.prompts()?, config.pipeline_config())
    } else {
        if config.backend == BackendKind::Mock && config.script_path.is_none() {
            bail!("the mock backend needs --script or --gold");
        }
        pipeline(&config)?
    };
    let run = run_benchmark(&pipeline, &g, &records, parallelism);
    print!("{}", report(&run.metrics, format));
    if let Some(out) = records_out {
        fs::write(&out, serde_json::to_string_pretty(&run.records)?)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    if let Some(floor) = floor {
        if !(run.metrics.exec_success >= floor) {
            eprintln!("execution success {:.4} is below the floor {floor:.4}", run.metrics.exec_success);
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(config: AppConfig, port: Option<u16>) -> Result<()> {
    let g = shared(load_graph_or_empty(config.graph_path.as_deref())?);
    let traces = match &config.trace_dir {
        Some(dir) => TraceStore::with_dir(dir)?,
        None => TraceStore::in_memory(),
    };
    let state = AppState::new(
        g.clone(),
        pipeline(&config)?,
        traces,
        Duration::from_secs(config.session_idle_secs),
    );
    let app = router(state, config.ui_origin.as_deref());
    let port = port.unwrap_or(config.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    if let Some(p) = &config.graph_path {
        graph::save(&g.read(), p)?;
        eprintln!("graph saved to {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = (|| -> Result<ExitCode> {
        let config = load_config(cli.config.as_deref())?;
        match cli.command {
            Command::Serve { port } => serve(config, port).map(|_| ExitCode::SUCCESS),
            Command::Import { file, format, graph } => import(&config, &file, format, graph).map(|_| ExitCode::SUCCESS),
            Command::Query { text, cypher, graph, trace } => {
                run_query(&config, &text, cypher, graph, trace).map(|_| ExitCode::SUCCESS)
            }
            Command::Bench {
                dataset,
                backend,
                script,
                gold,
                graph,
                format,
                parallelism,
                records,
                min_exec_success,
            } => bench(
                config,
                &dataset,
                backend,
                script,
                gold,
                graph,
                format,
                parallelism,
                records,
                min_exec_success,
            ),
            Command::GoldScript { dataset, out } => {
                let script = gold_script(&load_dataset(&dataset)?);
                let text = serde_json::to_string_pretty(&script)?;
                match out {
                    Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                    None => println!("{text}"),
                }
                Ok(ExitCode::SUCCESS)
            }
        }
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
