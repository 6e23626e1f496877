//! Benchmark reports: every run embeds its fully resolved configuration and
//! seed, all counters come from engine instrumentation, and timing fields
//! can be zeroed (`--zero-timings`) to make reports byte-stable for diffing.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Resolved workload descriptor, serialized into every report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub mode: String,
    pub seed: u64,
    pub threads: usize,
    pub readers: usize,
    pub writers: usize,
    pub batch: usize,
    pub dataset: String,
    pub undirected: bool,
    pub weights: bool,
    pub max_vertices: u64,
    pub partition_size: u32,
    pub leaf_capacity: u32,
    pub tracer_slots: usize,
    pub pool: String,
}

/// Memory accounting sourced from the allocation counters (plus the OS
/// resident set as an informative extra when available).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MemoryStats {
    pub live_objects: u64,
    pub cart_trees: u64,
    pub cart_inner_nodes: u64,
    pub cart_leaves: u64,
    pub cart_entries: u64,
    pub bitmap_leaves: u64,
    pub filling_ratio: f64,
    pub ci_nodes: u64,
    pub ci_entries: u64,
    pub heap_bytes_estimate: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub os_rss_kb: Option<u64>,
}

/// Invariant counters sampled during the run; any violation makes the
/// process exit nonzero.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct InvariantStats {
    pub max_chain_len: u32,
    pub tracer_slots_plus_one: u32,
    pub reader_lock_acquisitions: u64,
    pub accounting_delta: i64,
    pub violations: u64,
}

/// One measured point (per kernel, per batch size, per partition size...).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sample {
    pub label: String,
    pub ops: u64,
    pub elapsed_s: f64,
    pub per_sec: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub workload: WorkloadSpec,
    pub elapsed_s: f64,
    pub edges_inserted: u64,
    pub edges_deleted: u64,
    pub final_edge_count: u64,
    pub throughput_eps: f64,
    pub samples: Vec<Sample>,
    pub extra: BTreeMap<String, f64>,
    pub memory: MemoryStats,
    pub invariants: InvariantStats,
}

impl MetricsReport {
    pub fn new(workload: WorkloadSpec) -> MetricsReport {
        MetricsReport {
            workload,
            elapsed_s: 0.0,
            edges_inserted: 0,
            edges_deleted: 0,
            final_edge_count: 0,
            throughput_eps: 0.0,
            samples: Vec::new(),
            extra: BTreeMap::new(),
            memory: MemoryStats::default(),
            invariants: InvariantStats::default(),
        }
    }

    pub fn sample(&mut self, label: impl Into<String>, ops: u64, elapsed_s: f64) {
        let per_sec = if elapsed_s > 0.0 {
            ops as f64 / elapsed_s
        } else {
            0.0
        };
        self.samples.push(Sample {
            label: label.into(),
            ops,
            elapsed_s,
            per_sec,
        });
    }

    /// Blank every wall-time-derived (and otherwise run-dependent) field
    /// for byte-stable output.
    pub fn zero_timings(&mut self) {
        self.elapsed_s = 0.0;
        self.throughput_eps = 0.0;
        for s in &mut self.samples {
            s.elapsed_s = 0.0;
            s.per_sec = 0.0;
        }
        self.memory.os_rss_kb = None;
    }

    /// `edges inserted - edges deleted = final count` must close.
    pub fn accounting_closed(&self) -> bool {
        self.edges_inserted as i64 - self.edges_deleted as i64 == self.final_edge_count as i64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// CSV schema: one `sample` row per measured point, preceded by a `run` row
/// with the aggregate fields; the header names every column.
pub const CSV_HEADER: &str = "row,mode,seed,label,ops,elapsed_s,per_sec,edges_inserted,\
edges_deleted,final_edge_count,throughput_eps,filling_ratio,live_objects,max_chain_len,\
reader_lock_acquisitions,violations";

pub fn emit(report: &MetricsReport, format: Format, mut out: impl Write) -> std::io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            out.write_all(b"\n")?;
        }
        Format::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            writeln!(
                out,
                "run,{},{},,{},{:.6},,{},{},{},{:.3},{:.6},{},{},{},{}",
                report.workload.mode,
                report.workload.seed,
                report.samples.iter().map(|s| s.ops).sum::<u64>(),
                report.elapsed_s,
                report.edges_inserted,
                report.edges_deleted,
                report.final_edge_count,
                report.throughput_eps,
                report.memory.filling_ratio,
                report.memory.live_objects,
                report.invariants.max_chain_len,
                report.invariants.reader_lock_acquisitions,
                report.invariants.violations,
            )?;
            for s in &report.samples {
                writeln!(
                    out,
                    "sample,{},{},{},{},{:.6},{:.3},,,,,,,,,",
                    report.workload.mode,
                    report.workload.seed,
                    s.label,
                    s.ops,
                    s.elapsed_s,
                    s.per_sec,
                )?;
            }
        }
    }
    Ok(())
}

pub fn emit_to_path(
    report: &MetricsReport,
    format: Format,
    path: Option<&Path>,
) -> std::io::Result<()> {
    match path {
        Some(p) => {
            let f = std::fs::File::create(p)?;
            emit(report, format, std::io::BufWriter::new(f))
        }
        None => {
            let stdout = std::io::stdout();
            emit(report, format, stdout.lock())
        }
    }
}

/// Resident set size from procfs, when the platform provides it.
pub fn os_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmRSS:") {
            return rest.trim().trim_end_matches(" kB").trim().parse().ok();
        }
    }
    None
}
