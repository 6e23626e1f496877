//! Command-line benchmark harness for the mvgraph storage engine.
//!
//! Datasets come from edge-list files (`u v` or `u v w` per line, `#`
//! comments) or the built-in generators. Every run emits a metrics report
//! (JSON or CSV) embedding the fully resolved configuration and seed; the
//! process exits nonzero when an instrumented invariant is violated.

mod gen;
mod loader;
mod report;
mod workloads;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use mvgraph::types::PoolMode;
use mvgraph::{Config, GraphStore};

use gen::GraphKind;
use report::{emit_to_path, Format, MetricsReport, WorkloadSpec};
use workloads::BenchCtx;

#[derive(Parser)]
#[command(
    name = "mvgraph-bench",
    about = "benchmark harness for the mvgraph engine"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Engine configuration file (JSON `Config`); when present it defines
    /// the store shape and the shape flags below are ignored.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Edge-list file; omit to use the generator flags.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Generator used when no --graph is given.
    #[arg(long, global = true, value_enum, default_value = "uniform")]
    gen_kind: GraphKind,
    #[arg(long, global = true, default_value_t = 10_000)]
    gen_n: u32,
    #[arg(long, global = true, default_value_t = 8)]
    gen_avg_degree: u32,
    /// Vertex-ID capacity; defaults to the dataset size.
    #[arg(long, global = true)]
    max_vertices: Option<u64>,
    #[arg(long, global = true, default_value_t = 64)]
    partition_size: u32,
    #[arg(long, global = true, default_value_t = 256)]
    leaf_capacity: u32,
    /// Reader tracer slots; defaults to the logical core count.
    #[arg(long, global = true)]
    tracer_slots: Option<usize>,
    /// Total worker budget for loading phases.
    #[arg(long, global = true, default_value_t = 4)]
    threads: usize,
    #[arg(long, global = true, default_value_t = 2)]
    readers: usize,
    #[arg(long, global = true, default_value_t = 2)]
    writers: usize,
    /// Operations per write transaction during loads.
    #[arg(long, global = true, default_value_t = 1024)]
    batch: usize,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Mirror every edge (undirected input).
    #[arg(long, global = true)]
    undirected: bool,
    /// Store 4-byte edge weights.
    #[arg(long, global = true)]
    weights: bool,
    /// Report destination (stdout when omitted).
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Zero all wall-time fields for byte-stable reports.
    #[arg(long, global = true)]
    zero_timings: bool,
    /// Recycle node shells through the size-class pool.
    #[arg(long, global = true)]
    pool: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load an edge list and report structure statistics.
    Load,
    /// Generate an edge list to a file.
    Gen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Random-order edge insertion throughput.
    BenchInsert,
    /// Delete + re-insert 20% of edges over five rounds.
    BenchUpdate,
    /// Degree-stratified search/scan microbenchmarks.
    BenchOps {
        /// Probe count per stratum.
        #[arg(long, default_value_t = 100_000)]
        ops: u64,
    },
    /// One run of each analytics kernel.
    BenchAnalytics,
    /// Concurrent PageRank readers and update writers.
    BenchConcurrent {
        #[arg(long, default_value_t = 5.0)]
        duration_s: f64,
    },
    /// Batch-size sweep with one concurrent search reader.
    BenchBatch,
    /// Insertion throughput across growing neighbor sizes.
    BenchGrow {
        /// Total edges per round.
        #[arg(long, default_value_t = 1 << 20)]
        total: u64,
    },
    /// Insert + PageRank across partition sizes.
    SweepPartition,
    /// Structure and memory statistics of a loaded graph.
    Stats,
}

impl Cmd {
    fn mode(&self) -> &'static str {
        match self {
            Cmd::Load => "load",
            Cmd::Gen { .. } => "gen",
            Cmd::BenchInsert => "insert",
            Cmd::BenchUpdate => "update",
            Cmd::BenchOps { .. } => "ops",
            Cmd::BenchAnalytics => "analytics",
            Cmd::BenchConcurrent { .. } => "concurrent",
            Cmd::BenchBatch => "batch",
            Cmd::BenchGrow { .. } => "grow",
            Cmd::SweepPartition => "sweep-partition",
            Cmd::Stats => "stats",
        }
    }
}

fn build_edges(c: &Common) -> Result<(Vec<(u32, u32)>, String), String> {
    match &c.graph {
        Some(path) => {
            // parse once up front so generator-independent modes share code
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut edges = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                let mut it = t.split_whitespace();
                let parse = |tok: Option<&str>| -> Result<u32, String> {
                    tok.ok_or_else(|| format!("{}:{}: missing field", path.display(), i + 1))?
                        .parse()
                        .map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))
                };
                let u = parse(it.next())?;
                let v = parse(it.next())?;
                edges.push((u, v));
            }
            Ok((edges, path.display().to_string()))
        }
        None => {
            let edges = gen::generate(c.gen_kind, c.gen_n, c.gen_avg_degree, c.seed);
            let desc = format!(
                "gen:{:?},n={},avg={},seed={}",
                c.gen_kind, c.gen_n, c.gen_avg_degree, c.seed
            );
            Ok((edges, desc))
        }
    }
}

fn resolve(c: &Common, mode: &str) -> Result<(BenchCtx, GraphStore), String> {
    let (mut edges, dataset) = build_edges(c)?;
    if c.undirected {
        let mirrored: Vec<(u32, u32)> = edges.iter().map(|(u, v)| (*v, *u)).collect();
        edges.extend(mirrored);
        edges.sort_unstable();
        edges.dedup();
    }
    let needed = edges
        .iter()
        .map(|(u, v)| (*u).max(*v) as u64 + 1)
        .max()
        .unwrap_or(1);
    let cfg = match &c.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut cfg: Config =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            cfg.max_vertices = cfg.max_vertices.max(needed);
            cfg
        }
        None => {
            let max_vertices = c.max_vertices.unwrap_or(needed).max(needed);
            Config {
                max_vertices,
                partition_size: c.partition_size,
                leaf_capacity: c.leaf_capacity,
                tracer_slots: c
                    .tracer_slots
                    .unwrap_or_else(|| std::thread::available_parallelism().map_or(8, |n| n.get())),
                weights_enabled: c.weights,
                mirrored: c.undirected,
                pool_mode: if c.pool {
                    PoolMode::SizeClass
                } else {
                    PoolMode::PassThrough
                },
                ..Config::default()
            }
        }
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let spec = WorkloadSpec {
        mode: mode.into(),
        seed: c.seed,
        threads: c.threads,
        readers: c.readers,
        writers: c.writers,
        batch: c.batch,
        dataset,
        undirected: c.undirected,
        weights: c.weights,
        max_vertices: cfg.max_vertices,
        partition_size: cfg.partition_size,
        leaf_capacity: cfg.leaf_capacity,
        tracer_slots: cfg.tracer_slots,
        pool: if c.pool {
            "size-class".into()
        } else {
            "pass-through".into()
        },
    };
    let store = GraphStore::open(cfg.clone()).map_err(|e| e.to_string())?;
    Ok((
        BenchCtx {
            cfg,
            spec,
            edges,
            duration: Duration::from_secs(5),
            ops: 100_000,
        },
        store,
    ))
}

fn run(cli: &Cli) -> Result<MetricsReport, String> {
    let mode = cli.cmd.mode();
    match &cli.cmd {
        Cmd::Gen { out } => {
            let (edges, _) = build_edges(&cli.common)?;
            loader::write_edge_list(out, &edges).map_err(|e| e.to_string())?;
            let (ctx, _) = resolve(&cli.common, mode)?;
            let mut r = MetricsReport::new(ctx.spec);
            r.edges_inserted = edges.len() as u64;
            r.final_edge_count = edges.len() as u64;
            let (avg, max) = gen::degree_summary(cli.common.gen_n, &edges);
            r.extra.insert("avg_degree".into(), avg);
            r.extra.insert("max_degree".into(), max as f64);
            Ok(r)
        }
        Cmd::Load | Cmd::Stats => {
            let (ctx, store) = resolve(&cli.common, mode)?;
            let t = std::time::Instant::now();
            let inserted = match &cli.common.graph {
                Some(path) => {
                    let rep = loader::load_edge_list(
                        &store,
                        path,
                        cli.common.undirected,
                        cli.common.batch,
                    )
                    .map_err(|e| e.to_string())?;
                    rep.edges_inserted
                }
                None => {
                    workloads_load(&store, &ctx);
                    ctx.edges.len() as u64
                }
            };
            let mut r = MetricsReport::new(ctx.spec.clone());
            r.elapsed_s = t.elapsed().as_secs_f64();
            r.edges_inserted = inserted;
            r.throughput_eps = inserted as f64 / r.elapsed_s.max(1e-9);
            workloads_fill(&mut r, &store);
            Ok(r)
        }
        Cmd::BenchInsert => Ok(workloads::bench_insert(&resolve(&cli.common, mode)?.0)),
        Cmd::BenchUpdate => Ok(workloads::bench_update(&resolve(&cli.common, mode)?.0)),
        Cmd::BenchOps { ops } => {
            let (mut ctx, _) = resolve(&cli.common, mode)?;
            ctx.ops = *ops;
            Ok(workloads::bench_ops(&ctx))
        }
        Cmd::BenchAnalytics => Ok(workloads::bench_analytics(&resolve(&cli.common, mode)?.0)),
        Cmd::BenchConcurrent { duration_s } => {
            let c = &cli.common;
            if c.readers + c.writers > c.threads {
                return Err(format!(
                    "readers ({}) + writers ({}) exceed the thread budget ({})",
                    c.readers, c.writers, c.threads
                ));
            }
            let (mut ctx, _) = resolve(c, mode)?;
            ctx.duration = Duration::from_secs_f64(*duration_s);
            Ok(workloads::bench_concurrent(&ctx))
        }
        Cmd::BenchBatch => Ok(workloads::bench_batch(&resolve(&cli.common, mode)?.0)),
        Cmd::BenchGrow { total } => {
            let (mut ctx, _) = resolve(&cli.common, mode)?;
            ctx.ops = *total;
            Ok(workloads::bench_grow(&ctx))
        }
        Cmd::SweepPartition => Ok(workloads::sweep_partition(&resolve(&cli.common, mode)?.0)),
    }
}

fn workloads_load(store: &GraphStore, ctx: &BenchCtx) {
    let mut ops = Vec::with_capacity(ctx.spec.batch);
    for (u, v) in &ctx.edges {
        ops.push(mvgraph::WriteOp::InsertEdge(
            mvgraph::VertexId(*u),
            mvgraph::VertexId(*v),
            None,
        ));
        if ops.len() >= ctx.spec.batch.max(1) {
            store.txn_write(&ops).unwrap();
            ops.clear();
        }
    }
    if !ops.is_empty() {
        store.txn_write(&ops).unwrap();
    }
}

fn workloads_fill(r: &mut MetricsReport, store: &GraphStore) {
    let s = store.stats().expect("stats");
    r.final_edge_count = s.edges;
    r.memory.live_objects = s.live_objects;
    r.memory.cart_trees = s.cart_trees;
    r.memory.cart_inner_nodes = s.cart.inner_nodes;
    r.memory.cart_leaves = s.cart.leaves;
    r.memory.cart_entries = s.cart.entries;
    r.memory.bitmap_leaves = s.cart.bitmap_leaves;
    r.memory.filling_ratio = if s.cart.leaves > 0 {
        s.cart.entries as f64 / (s.cart.leaves as f64 * store.config().leaf_capacity as f64)
    } else {
        0.0
    };
    r.memory.ci_nodes = s.ci_nodes;
    r.memory.ci_entries = s.ci_entries;
    r.memory.heap_bytes_estimate = s.cart.heap_bytes + s.ci_heap_bytes;
    r.memory.os_rss_kb = report::os_rss_kb();
    r.invariants.max_chain_len = s.max_chain_len;
    r.invariants.tracer_slots_plus_one = store.config().tracer_slots as u32 + 1;
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(mut report) => {
            if cli.common.zero_timings {
                report.zero_timings();
            }
            if let Err(e) = emit_to_path(&report, cli.common.format, cli.common.report.as_deref()) {
                eprintln!("error writing report: {e}");
                return ExitCode::from(1);
            }
            if report.invariants.violations > 0 {
                eprintln!(
                    "invariant violations detected: {} (see report)",
                    report.invariants.violations
                );
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
