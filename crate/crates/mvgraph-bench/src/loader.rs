//! Edge-list ingestion: whitespace-separated `u v` or `u v w` lines, `#`
//! comments, optional mirroring, loaded through batched transactions.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use mvgraph::{GraphStore, VertexId, WriteOp};

#[derive(Debug)]
pub struct LoadReport {
    pub lines: u64,
    pub edges_inserted: u64,
    pub transactions: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Store(#[from] mvgraph::Error),
}

/// Parse one edge line; weights are optional third columns.
fn parse_line(s: &str) -> Result<Option<(u32, u32, Option<u32>)>, String> {
    let s = s.trim();
    if s.is_empty() || s.starts_with('#') {
        return Ok(None);
    }
    let mut it = s.split_whitespace();
    let u: u32 = it
        .next()
        .ok_or("missing source")?
        .parse()
        .map_err(|e| format!("bad source: {e}"))?;
    let v: u32 = it
        .next()
        .ok_or_else(|| "missing destination".to_string())?
        .parse()
        .map_err(|e| format!("bad destination: {e}"))?;
    let w = match it.next() {
        None => None,
        Some(t) => Some(t.parse::<u32>().map_err(|e| format!("bad weight: {e}"))?),
    };
    if let Some(extra) = it.next() {
        return Err(format!("trailing token {extra:?}"));
    }
    Ok(Some((u, v, w)))
}

/// Load an edge-list file through batched write transactions. `undirected`
/// inserts the reverse edge alongside each line.
pub fn load_edge_list(
    store: &GraphStore,
    path: &Path,
    undirected: bool,
    batch: usize,
) -> Result<LoadReport, LoadError> {
    let file = File::open(path)?;
    let mut report = LoadReport {
        lines: 0,
        edges_inserted: 0,
        transactions: 0,
    };
    let mut ops: Vec<WriteOp> = Vec::with_capacity(batch.max(2));
    let max = store.config().max_vertices;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        report.lines += 1;
        let parsed = parse_line(&line).map_err(|msg| LoadError::Parse {
            path: path.display().to_string(),
            line: i as u64 + 1,
            msg,
        })?;
        let Some((u, v, w)) = parsed else { continue };
        for x in [u, v] {
            if x as u64 >= max {
                return Err(LoadError::Parse {
                    path: path.display().to_string(),
                    line: i as u64 + 1,
                    msg: format!("vertex {x} >= max_vertices {max}"),
                });
            }
        }
        ops.push(WriteOp::InsertEdge(VertexId(u), VertexId(v), w));
        report.edges_inserted += 1;
        if undirected {
            ops.push(WriteOp::InsertEdge(VertexId(v), VertexId(u), w));
            report.edges_inserted += 1;
        }
        if ops.len() + 1 >= batch.max(2) {
            store.txn_write(&ops)?;
            report.transactions += 1;
            ops.clear();
        }
    }
    if !ops.is_empty() {
        store.txn_write(&ops)?;
        report.transactions += 1;
    }
    Ok(report)
}

/// Write an edge stream in the loadable text format.
pub fn write_edge_list(path: &Path, edges: &[(u32, u32)]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    writeln!(f, "# generated edge list: {} edges", edges.len())?;
    for (u, v) in edges {
        writeln!(f, "{u} {v}")?;
    }
    Ok(())
}
