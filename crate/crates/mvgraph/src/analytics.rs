//! Snapshot-consistent graph kernels: BFS, PageRank, SSSP, WCC and triangle
//! counting, all running purely through a [`ReadHandle`].
//!
//! Kernels parallelize over fixed vertex chunks (so results are bitwise
//! deterministic regardless of worker count) and need no synchronization
//! beyond the per-level barrier: the handle's view is immutable. Output
//! arrays are indexed by vertex ID over the store's capacity; slots of
//! absent or unreached vertices hold the documented sentinel.

use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicU32, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::cart::IntersectStrategy;
use crate::store::ReadHandle;
use crate::types::{Error, Result, VertexId};

/// Fixed parallel chunk count; constant so reductions happen in a fixed
/// order no matter how many worker threads run.
const CHUNKS: usize = 16;

/// Per-vertex kernel output plus wall time.
pub struct KernelOutput<T> {
    pub values: Vec<T>,
    pub elapsed: Duration,
}

/// Scalar kernel output plus wall time.
pub struct ScalarOutput {
    pub value: u64,
    pub elapsed: Duration,
}

/// Unreachable / absent marker in distance and label arrays.
pub const UNREACHED: u32 = u32::MAX;
/// Unreachable marker in shortest-path distance arrays.
pub const UNREACHED_DIST: u64 = u64::MAX;

/// Deterministic edge weight used when the store carries none: always in
/// `[1, 255]`, a pure function of the endpoint IDs (splitmix64 finalizer).
pub fn fallback_weight(u: VertexId, v: VertexId) -> u32 {
    let mut x = ((u.0 as u64) << 32) | v.0 as u64;
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^= x >> 31;
    1 + (x % 255) as u32
}

fn edge_weight(u: VertexId, v: VertexId, stored: Option<u32>) -> u64 {
    match stored {
        Some(w) => w.max(1) as u64,
        None => fallback_weight(u, v) as u64,
    }
}

fn chunk_size(n: usize) -> usize {
    n.div_ceil(CHUNKS).max(1)
}

/// Hop distances from `source`; unreachable vertices hold [`UNREACHED`].
pub fn bfs(h: &ReadHandle, source: VertexId) -> Result<KernelOutput<u32>> {
    if !h.contains_vertex(source)? {
        return Err(Error::VertexNotFound(source.0));
    }
    let start = Instant::now();
    let n = h.vertex_capacity() as usize;
    let dist: Vec<AtomicU32> = (0..n).map(|_| AtomicU32::new(UNREACHED)).collect();
    dist[source.index()].store(0, Ordering::Relaxed);
    let mut frontier = vec![source];
    let mut level = 0u32;
    while !frontier.is_empty() {
        level += 1;
        let next: Vec<Vec<VertexId>> = frontier
            .par_chunks(chunk_size(frontier.len()))
            .map(|chunk| {
                let mut found = Vec::new();
                for &u in chunk {
                    h.scan(u, |v, _| {
                        if dist[v.index()]
                            .compare_exchange(
                                UNREACHED,
                                level,
                                Ordering::Relaxed,
                                Ordering::Relaxed,
                            )
                            .is_ok()
                        {
                            found.push(v);
                        }
                    })
                    .expect("frontier vertices are present");
                }
                found
            })
            .collect();
        frontier = next.into_iter().flatten().collect();
    }
    let values = dist.into_iter().map(|d| d.into_inner()).collect();
    Ok(KernelOutput {
        values,
        elapsed: start.elapsed(),
    })
}

/// Synchronous power iteration with uniform start, dangling-mass
/// redistribution and damping; `iters` full sweeps.
pub fn pagerank(h: &ReadHandle, iters: u32, damping: f64) -> Result<KernelOutput<f64>> {
    let start = Instant::now();
    let cap = h.vertex_capacity() as usize;
    let mut present = vec![false; cap];
    let mut vertices: Vec<VertexId> = Vec::new();
    h.for_each_vertex(|u| {
        present[u.index()] = true;
        vertices.push(u);
    });
    let n = vertices.len();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let degrees: Vec<u32> = vertices
        .par_chunks(chunk_size(n))
        .map(|chunk| {
            chunk
                .iter()
                .map(|u| h.degree(*u).expect("present"))
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    let mut rank = vec![0.0f64; cap];
    for u in &vertices {
        rank[u.index()] = 1.0 / n as f64;
    }
    let base = (1.0 - damping) / n as f64;
    for _ in 0..iters {
        // dangling mass, summed in fixed chunk order
        let dangling: f64 = vertices
            .chunks(chunk_size(n))
            .enumerate()
            .map(|(ci, chunk)| {
                chunk
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| degrees[ci * chunk_size(n) + i] == 0)
                    .map(|(_, u)| rank[u.index()])
                    .sum::<f64>()
            })
            .sum();
        // push contributions: per-chunk dense buffers merged in chunk order
        let buffers: Vec<Vec<f64>> = vertices
            .par_chunks(chunk_size(n))
            .enumerate()
            .map(|(ci, chunk)| {
                let mut buf = vec![0.0f64; cap];
                for (i, u) in chunk.iter().enumerate() {
                    let d = degrees[ci * chunk_size(n) + i];
                    if d == 0 {
                        continue;
                    }
                    let share = rank[u.index()] / d as f64;
                    h.scan(*u, |v, _| buf[v.index()] += share).expect("present");
                }
                buf
            })
            .collect();
        let spread = dangling / n as f64;
        let mut next = vec![0.0f64; cap];
        for u in &vertices {
            let mut sum = 0.0;
            for buf in &buffers {
                sum += buf[u.index()];
            }
            next[u.index()] = base + damping * (sum + spread);
        }
        rank = next;
    }
    Ok(KernelOutput {
        values: rank,
        elapsed: start.elapsed(),
    })
}

/// Exact shortest-path weights from `source` (binary-heap relaxation).
/// Edge weights come from storage when present, else the deterministic
/// [`fallback_weight`]; both are at least 1.
pub fn sssp(h: &ReadHandle, source: VertexId) -> Result<KernelOutput<u64>> {
    if !h.contains_vertex(source)? {
        return Err(Error::VertexNotFound(source.0));
    }
    let start = Instant::now();
    let n = h.vertex_capacity() as usize;
    let mut dist = vec![UNREACHED_DIST; n];
    dist[source.index()] = 0;
    let mut heap: BinaryHeap<(std::cmp::Reverse<u64>, u32)> = BinaryHeap::new();
    heap.push((std::cmp::Reverse(0), source.0));
    while let Some((std::cmp::Reverse(d), u)) = heap.pop() {
        if d > dist[u as usize] {
            continue;
        }
        let u = VertexId(u);
        h.scan(u, |v, w| {
            let nd = d + edge_weight(u, v, w);
            if nd < dist[v.index()] {
                dist[v.index()] = nd;
                heap.push((std::cmp::Reverse(nd), v.0));
            }
        })?;
    }
    Ok(KernelOutput {
        values: dist,
        elapsed: start.elapsed(),
    })
}

/// Weakly connected components, ignoring edge direction; every vertex is
/// labeled with the smallest vertex ID of its component.
pub fn wcc(h: &ReadHandle) -> Result<KernelOutput<u32>> {
    let start = Instant::now();
    let cap = h.vertex_capacity() as usize;
    let mut parent: Vec<u32> = (0..cap as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    let mut vertices = Vec::new();
    h.for_each_vertex(|u| vertices.push(u));
    for u in &vertices {
        h.scan(*u, |v, _| {
            let (ru, rv) = (find(&mut parent, u.0), find(&mut parent, v.0));
            if ru != rv {
                // union toward the smaller root keeps labels canonical
                let (lo, hi) = if ru < rv { (ru, rv) } else { (rv, ru) };
                parent[hi as usize] = lo;
            }
        })?;
    }
    let mut labels = vec![UNREACHED; cap];
    for u in &vertices {
        labels[u.index()] = find(&mut parent, u.0);
    }
    Ok(KernelOutput {
        values: labels,
        elapsed: start.elapsed(),
    })
}

/// Count each triangle once via the ordered orientation `u < v < w`, using
/// the handle's intersection dispatch. Expects a mirrored (undirected)
/// graph.
pub fn triangle_count(h: &ReadHandle) -> Result<ScalarOutput> {
    triangle_count_with(h, IntersectStrategy::Auto)
}

pub fn triangle_count_with(h: &ReadHandle, strategy: IntersectStrategy) -> Result<ScalarOutput> {
    let start = Instant::now();
    let mut vertices = Vec::new();
    h.for_each_vertex(|u| vertices.push(u));
    let total: u64 = vertices
        .par_chunks(chunk_size(vertices.len().max(1)))
        .map(|chunk| {
            let mut count = 0u64;
            for &u in chunk {
                let mut higher = Vec::new();
                h.scan(u, |v, _| {
                    if v > u {
                        higher.push(v);
                    }
                })
                .expect("present");
                for v in higher {
                    for w in h.intersect_with(u, v, strategy).expect("present") {
                        if w > v {
                            count += 1;
                        }
                    }
                }
            }
            count
        })
        .sum();
    Ok(ScalarOutput {
        value: total,
        elapsed: start.elapsed(),
    })
}
