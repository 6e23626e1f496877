//! Benchmark modes: insertion, update rounds, basic-operation mixes,
//! analytics kernels, concurrent reader/writer mixes, batch-size and
//! growing-neighbor sweeps, and a partition-size sweep.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mvgraph::analytics;
use mvgraph::instr::NoLockScope;
use mvgraph::{Config, GraphStore, VertexId, WriteOp};

use crate::report::{MetricsReport, WorkloadSpec};

pub struct BenchCtx {
    pub cfg: Config,
    pub spec: WorkloadSpec,
    pub edges: Vec<(u32, u32)>,
    pub duration: Duration,
    pub ops: u64,
}

fn insert_op(u: u32, v: u32) -> WriteOp {
    WriteOp::InsertEdge(VertexId(u), VertexId(v), None)
}

fn delete_op(u: u32, v: u32) -> WriteOp {
    WriteOp::DeleteEdge(VertexId(u), VertexId(v))
}

/// Insert `edges` through `writers` threads in batched transactions.
fn parallel_insert(store: &GraphStore, edges: &[(u32, u32)], writers: usize, batch: usize) {
    let writers = writers.max(1);
    let chunk = edges.len().div_ceil(writers).max(1);
    std::thread::scope(|s| {
        for part in edges.chunks(chunk) {
            let store = store.clone();
            s.spawn(move || {
                let mut ops = Vec::with_capacity(batch.min(part.len()).max(1));
                for (u, v) in part {
                    ops.push(insert_op(*u, *v));
                    if ops.len() >= batch.max(1) {
                        store.txn_write(&ops).unwrap();
                        ops.clear();
                    }
                }
                if !ops.is_empty() {
                    store.txn_write(&ops).unwrap();
                }
            });
        }
    });
}

fn open(cfg: &Config) -> GraphStore {
    GraphStore::open(cfg.clone()).expect("valid configuration")
}

fn fill_memory_stats(report: &mut MetricsReport, store: &GraphStore) {
    let s = store.stats().expect("stats snapshot");
    report.memory.live_objects = s.live_objects;
    report.memory.cart_trees = s.cart_trees;
    report.memory.cart_inner_nodes = s.cart.inner_nodes;
    report.memory.cart_leaves = s.cart.leaves;
    report.memory.cart_entries = s.cart.entries;
    report.memory.bitmap_leaves = s.cart.bitmap_leaves;
    report.memory.filling_ratio = if s.cart.leaves > 0 {
        s.cart.entries as f64 / (s.cart.leaves as f64 * store.config().leaf_capacity as f64)
    } else {
        0.0
    };
    report.memory.ci_nodes = s.ci_nodes;
    report.memory.ci_entries = s.ci_entries;
    report.memory.heap_bytes_estimate = s.cart.heap_bytes + s.ci_heap_bytes;
    report.memory.os_rss_kb = crate::report::os_rss_kb();
    report.invariants.max_chain_len = s.max_chain_len;
    report.invariants.tracer_slots_plus_one = store.config().tracer_slots as u32 + 1;
    if s.max_chain_len > store.config().tracer_slots as u32 + 1 {
        report.invariants.violations += 1;
    }
}

fn close_accounting(report: &mut MetricsReport, store: &GraphStore) {
    report.final_edge_count = store.read().unwrap().edge_count();
    report.invariants.accounting_delta =
        report.edges_inserted as i64 - report.edges_deleted as i64 - report.final_edge_count as i64;
    if !report.accounting_closed() {
        report.invariants.violations += 1;
    }
}

/// Random-order edge insertion throughput.
pub fn bench_insert(ctx: &BenchCtx) -> MetricsReport {
    let mut report = MetricsReport::new(ctx.spec.clone());
    let store = open(&ctx.cfg);
    let mut edges = ctx.edges.clone();
    edges.shuffle(&mut ChaCha8Rng::seed_from_u64(ctx.spec.seed));
    let t = Instant::now();
    parallel_insert(&store, &edges, ctx.spec.writers, ctx.spec.batch);
    let el = t.elapsed().as_secs_f64();
    report.elapsed_s = el;
    report.edges_inserted = edges.len() as u64;
    report.throughput_eps = edges.len() as f64 / el;
    report.sample("insert", edges.len() as u64, el);
    fill_memory_stats(&mut report, &store);
    close_accounting(&mut report, &store);
    report
}

/// Five rounds of deleting and re-inserting 20% of the edges.
pub fn bench_update(ctx: &BenchCtx) -> MetricsReport {
    let mut report = MetricsReport::new(ctx.spec.clone());
    let store = open(&ctx.cfg);
    parallel_insert(&store, &ctx.edges, ctx.spec.writers, ctx.spec.batch);
    report.edges_inserted = ctx.edges.len() as u64;
    let before = store.read().unwrap().edge_count();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.spec.seed);
    let mut total_ops = 0u64;
    let t = Instant::now();
    for round in 0..5 {
        let mut sample: Vec<(u32, u32)> = ctx
            .edges
            .iter()
            .filter(|_| rng.gen_bool(0.2))
            .copied()
            .collect();
        sample.shuffle(&mut rng);
        let chunk = sample.len().div_ceil(ctx.spec.writers.max(1)).max(1);
        let rt = Instant::now();
        std::thread::scope(|s| {
            for part in sample.chunks(chunk) {
                let store = store.clone();
                s.spawn(move || {
                    for (u, v) in part {
                        store.txn_write(&[delete_op(*u, *v)]).unwrap();
                        store.txn_write(&[insert_op(*u, *v)]).unwrap();
                    }
                });
            }
        });
        total_ops += sample.len() as u64 * 2;
        report.sample(
            format!("round{round}"),
            sample.len() as u64 * 2,
            rt.elapsed().as_secs_f64(),
        );
    }
    let el = t.elapsed().as_secs_f64();
    report.elapsed_s = el;
    report.throughput_eps = total_ops as f64 / el;
    let after = store.read().unwrap().edge_count();
    if after != before {
        report.invariants.violations += 1;
    }
    fill_memory_stats(&mut report, &store);
    close_accounting(&mut report, &store);
    report
}

/// Degree-stratified search and scan microbenchmarks: uniform vertices, the
/// lowest-degree 10% and the highest-degree 10%.
pub fn bench_ops(ctx: &BenchCtx) -> MetricsReport {
    let mut report = MetricsReport::new(ctx.spec.clone());
    let store = open(&ctx.cfg);
    parallel_insert(&store, &ctx.edges, ctx.spec.writers, ctx.spec.batch);
    report.edges_inserted = ctx.edges.len() as u64;
    let h = store.read().unwrap();
    let mut vertices: Vec<(u32, u32)> = Vec::new(); // (degree, id)
    h.for_each_vertex(|u| {
        let d = h.degree(u).unwrap();
        if d > 0 {
            vertices.push((d, u.0));
        }
    });
    vertices.sort_unstable();
    let tenth = (vertices.len() / 10).max(1);
    let low: Vec<u32> = vertices[..tenth].iter().map(|(_, u)| *u).collect();
    let high: Vec<u32> = vertices[vertices.len() - tenth..]
        .iter()
        .map(|(_, u)| *u)
        .collect();
    let all: Vec<u32> = vertices.iter().map(|(_, u)| *u).collect();
    if vertices.is_empty() {
        report.invariants.violations += 1;
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.spec.seed ^ 0x0b5);
    let n = ctx.cfg.max_vertices as u32;
    for (label, stratum) in [
        ("general", &all),
        ("low_degree", &low),
        ("high_degree", &high),
    ] {
        // probes prepared outside the timed region: half present neighbors,
        // half random candidates
        let probes: Vec<(VertexId, VertexId)> = (0..ctx.ops)
            .map(|i| {
                let u = VertexId(stratum[rng.gen_range(0..stratum.len())]);
                let v = if i % 2 == 0 {
                    let nbrs = h.neighbors(u).unwrap();
                    nbrs[rng.gen_range(0..nbrs.len())]
                } else {
                    VertexId(rng.gen_range(0..n))
                };
                (u, v)
            })
            .collect();
        let t = Instant::now();
        let mut found = 0u64;
        for (u, v) in &probes {
            if h.search(*u, *v).unwrap().is_some() {
                found += 1;
            }
        }
        report.sample(
            format!("search_{label}"),
            ctx.ops,
            t.elapsed().as_secs_f64(),
        );
        std::hint::black_box(found);
        // scan: traverse neighbor sets, counting visited edges
        let targets: Vec<VertexId> = (0..ctx.ops / 4)
            .map(|_| VertexId(stratum[rng.gen_range(0..stratum.len())]))
            .collect();
        let t = Instant::now();
        let mut visited = 0u64;
        for u in &targets {
            h.scan(*u, |_, _| visited += 1).unwrap();
        }
        report.sample(format!("scan_{label}"), visited, t.elapsed().as_secs_f64());
    }
    drop(h);
    fill_memory_stats(&mut report, &store);
    close_accounting(&mut report, &store);
    report
}

/// One snapshot-consistent run of each kernel.
pub fn bench_analytics(ctx: &BenchCtx) -> MetricsReport {
    let mut report = MetricsReport::new(ctx.spec.clone());
    let store = open(&ctx.cfg);
    parallel_insert(&store, &ctx.edges, ctx.spec.writers, ctx.spec.batch);
    report.edges_inserted = ctx.edges.len() as u64;
    let h = store.read().unwrap();
    let m = h.edge_count();
    let source = VertexId(ctx.edges.first().map_or(0, |(u, _)| *u));
    let b = analytics::bfs(&h, source).unwrap();
    report.sample("bfs", m, b.elapsed.as_secs_f64());
    let pr = analytics::pagerank(&h, 10, 0.85).unwrap();
    report.sample("pagerank", m * 10, pr.elapsed.as_secs_f64());
    let ss = analytics::sssp(&h, source).unwrap();
    report.sample("sssp", m, ss.elapsed.as_secs_f64());
    let wc = analytics::wcc(&h).unwrap();
    report.sample("wcc", m, wc.elapsed.as_secs_f64());
    let tc = analytics::triangle_count(&h).unwrap();
    report.sample("tc", m, tc.elapsed.as_secs_f64());
    report.extra.insert("triangles".into(), tc.value as f64);
    report.extra.insert("components".into(), {
        let mut labels: Vec<u32> = wc
            .values
            .iter()
            .copied()
            .filter(|l| *l != analytics::UNREACHED)
            .collect();
        labels.sort_unstable();
        labels.dedup();
        labels.len() as f64
    });
    drop(h);
    report.elapsed_s = report.samples.iter().map(|s| s.elapsed_s).sum::<f64>();
    fill_memory_stats(&mut report, &store);
    close_accounting(&mut report, &store);
    report
}

/// Readers run PageRank while writers delete and re-insert edges; reports
/// reader latency, writer throughput and the reader lock counter.
pub fn bench_concurrent(ctx: &BenchCtx) -> MetricsReport {
    let mut report = MetricsReport::new(ctx.spec.clone());
    let store = open(&ctx.cfg);
    parallel_insert(&store, &ctx.edges, ctx.spec.threads.max(1), ctx.spec.batch);
    report.edges_inserted = ctx.edges.len() as u64;
    let stop = Arc::new(AtomicBool::new(false));
    let writer_ops = Arc::new(AtomicU64::new(0));
    let edges = Arc::new(ctx.edges.clone());
    let t = Instant::now();
    let (reader_runs, reader_secs, reader_locks) = std::thread::scope(|s| {
        for w in 0..ctx.spec.writers {
            let store = store.clone();
            let stop = stop.clone();
            let edges = Arc::clone(&edges);
            let writer_ops = Arc::clone(&writer_ops);
            let seed = ctx.spec.seed ^ (0xAA00 + w as u64);
            s.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                while !stop.load(Ordering::Relaxed) {
                    let (u, v) = edges[rng.gen_range(0..edges.len())];
                    store.txn_write(&[delete_op(u, v)]).unwrap();
                    store.txn_write(&[insert_op(u, v)]).unwrap();
                    writer_ops.fetch_add(2, Ordering::Relaxed);
                }
            });
        }
        let readers: Vec<_> = (0..ctx.spec.readers)
            .map(|_| {
                let store = store.clone();
                let stop = stop.clone();
                let deadline = Instant::now() + ctx.duration;
                s.spawn(move || {
                    let scope = NoLockScope::enter();
                    let mut runs = 0u64;
                    let mut secs = 0.0f64;
                    while Instant::now() < deadline && !stop.load(Ordering::Relaxed) {
                        let h = store.read().unwrap();
                        let r = analytics::pagerank(&h, 10, 0.85).unwrap();
                        runs += 1;
                        secs += r.elapsed.as_secs_f64();
                    }
                    (runs, secs, scope.taken())
                })
            })
            .collect();
        std::thread::sleep(ctx.duration);
        stop.store(true, Ordering::Relaxed);
        let mut runs = 0;
        let mut secs = 0.0;
        let mut locks = 0;
        for r in readers {
            let (a, b, c) = r.join().unwrap();
            runs += a;
            secs += b;
            locks += c;
        }
        (runs, secs, locks)
    });
    let el = t.elapsed().as_secs_f64();
    let wops = writer_ops.load(Ordering::Relaxed);
    report.elapsed_s = el;
    report.edges_inserted += wops / 2;
    report.edges_deleted += wops / 2;
    report.throughput_eps = wops as f64 / el;
    report.sample("writer_updates", wops, el);
    if reader_runs > 0 {
        report.sample("pagerank_runs", reader_runs, reader_secs);
        report.extra.insert(
            "reader_avg_latency_s".into(),
            reader_secs / reader_runs as f64,
        );
    }
    report.invariants.reader_lock_acquisitions = reader_locks;
    if reader_locks > 0 {
        report.invariants.violations += 1;
    }
    fill_memory_stats(&mut report, &store);
    close_accounting(&mut report, &store);
    report
}

/// Batch-size sweep: writers apply whole update batches while one reader
/// issues point searches; one write and one read sample per size.
pub fn bench_batch(ctx: &BenchCtx) -> MetricsReport {
    let mut report = MetricsReport::new(ctx.spec.clone());
    let mut inserted_total = 0u64;
    let mut final_total = 0u64;
    for exp in [0u32, 2, 4, 6, 8, 10] {
        let size = 1usize << exp;
        let store = open(&ctx.cfg);
        let stop = Arc::new(AtomicBool::new(false));
        let searches = Arc::new(AtomicU64::new(0));
        let mut edges = ctx.edges.clone();
        edges.shuffle(&mut ChaCha8Rng::seed_from_u64(ctx.spec.seed ^ exp as u64));
        let n = ctx.cfg.max_vertices as u32;
        let t = Instant::now();
        std::thread::scope(|s| {
            let reader = {
                let store = store.clone();
                let stop = stop.clone();
                let searches = Arc::clone(&searches);
                let seed = ctx.spec.seed ^ 0x5ea;
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    while !stop.load(Ordering::Relaxed) {
                        let h = store.read().unwrap();
                        for _ in 0..256 {
                            let u = VertexId(rng.gen_range(0..n));
                            let v = VertexId(rng.gen_range(0..n));
                            std::hint::black_box(h.search(u, v).unwrap());
                        }
                        searches.fetch_add(256, Ordering::Relaxed);
                    }
                })
            };
            // writers run in an inner scope so they are joined before the
            // reader is told to stop
            std::thread::scope(|ws| {
                let writers = ctx.spec.writers.max(1);
                let chunk = edges.len().div_ceil(writers).max(1);
                for part in edges.chunks(chunk) {
                    let store = store.clone();
                    ws.spawn(move || {
                        for batch in part.chunks(size) {
                            let ops: Vec<WriteOp> =
                                batch.iter().map(|(u, v)| insert_op(*u, *v)).collect();
                            store.txn_write(&ops).unwrap();
                        }
                    });
                }
            });
            stop.store(true, Ordering::Relaxed);
            reader.join().unwrap();
        });
        let el = t.elapsed().as_secs_f64();
        report.sample(format!("write_batch_{size}"), edges.len() as u64, el);
        report.sample(
            format!("read_batch_{size}"),
            searches.load(Ordering::Relaxed),
            el,
        );
        inserted_total += edges.len() as u64;
        final_total += store.read().unwrap().edge_count();
        report.elapsed_s += el;
    }
    report.edges_inserted = inserted_total;
    report.final_edge_count = final_total;
    report.invariants.accounting_delta =
        inserted_total as i64 - report.edges_deleted as i64 - final_total as i64;
    if report.invariants.accounting_delta != 0 {
        report.invariants.violations += 1;
    }
    report
}

/// Insertion throughput as all neighbor sets grow to a fixed size per round:
/// the same edge total is split into vertices of equal degree each round.
pub fn bench_grow(ctx: &BenchCtx) -> MetricsReport {
    let mut report = MetricsReport::new(ctx.spec.clone());
    let total = ctx.ops.max(1 << 16).next_power_of_two();
    // power-of-two id space makes the odd-multiplier destination map a
    // bijection, so every round inserts exactly `total` distinct edges
    let mut cfg = ctx.cfg.clone();
    cfg.max_vertices = cfg.max_vertices.max(total).next_power_of_two();
    let id_mask = (cfg.max_vertices - 1) as u32;
    for exp in [0u32, 4, 8, 12, 16] {
        let per_vertex = 1u64 << exp;
        let vertices = total / per_vertex;
        let mut edges: Vec<(u32, u32)> = Vec::with_capacity(total as usize);
        for u in 0..vertices as u32 {
            for i in 0..per_vertex as u32 {
                edges.push((u, i.wrapping_mul(2654435761) & id_mask));
            }
        }
        edges.shuffle(&mut ChaCha8Rng::seed_from_u64(ctx.spec.seed ^ exp as u64));
        let store = open(&cfg);
        let t = Instant::now();
        parallel_insert(&store, &edges, ctx.spec.writers, ctx.spec.batch);
        let el = t.elapsed().as_secs_f64();
        report.sample(
            format!("neighbor_size_{per_vertex}"),
            edges.len() as u64,
            el,
        );
        report.elapsed_s += el;
        report.edges_inserted += edges.len() as u64;
        report.final_edge_count += store.read().unwrap().edge_count();
    }
    report.invariants.accounting_delta =
        report.edges_inserted as i64 - report.final_edge_count as i64;
    if report.invariants.accounting_delta != 0 {
        report.invariants.violations += 1;
    }
    report
}

/// Partition-size sweep: insert throughput and PageRank latency per `|P|`.
pub fn sweep_partition(ctx: &BenchCtx) -> MetricsReport {
    let mut report = MetricsReport::new(ctx.spec.clone());
    for p in [1u32, 4, 16, 64, 256, 1024] {
        let mut cfg = ctx.cfg.clone();
        cfg.partition_size = p;
        let store = open(&cfg);
        let mut edges = ctx.edges.clone();
        edges.shuffle(&mut ChaCha8Rng::seed_from_u64(ctx.spec.seed ^ p as u64));
        let t = Instant::now();
        parallel_insert(&store, &edges, ctx.spec.writers, ctx.spec.batch);
        report.sample(
            format!("insert_P{p}"),
            edges.len() as u64,
            t.elapsed().as_secs_f64(),
        );
        let h = store.read().unwrap();
        let pr = analytics::pagerank(&h, 10, 0.85).unwrap();
        report.sample(
            format!("pagerank_P{p}"),
            h.edge_count() * 10,
            pr.elapsed.as_secs_f64(),
        );
    }
    report.edges_inserted = ctx.edges.len() as u64 * 6;
    report.final_edge_count = report.edges_inserted; // fresh store per size
    report
}
