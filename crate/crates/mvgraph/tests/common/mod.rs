//! Shared test support: independent reference implementations and seeded
//! graph generators. Everything here deliberately avoids the engine's code
//! paths (plain adjacency lists, queue-based traversals, dense algebra) so
//! tests compare two unrelated routes to the same answer.
#![allow(dead_code)]

use std::collections::{BTreeSet, BinaryHeap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mvgraph::analytics::fallback_weight;
use mvgraph::{GraphStore, VertexId, WriteOp};

pub const UNREACHED: u32 = u32::MAX;
pub const UNREACHED_DIST: u64 = u64::MAX;

/// Plain adjacency-list graph for reference algorithms.
#[derive(Clone, Default)]
pub struct RefGraph {
    pub n: usize,
    pub adj: Vec<BTreeSet<u32>>,
}

impl RefGraph {
    pub fn new(n: usize) -> RefGraph {
        RefGraph {
            n,
            adj: vec![BTreeSet::new(); n],
        }
    }

    pub fn add(&mut self, u: u32, v: u32) {
        self.adj[u as usize].insert(v);
    }

    pub fn edge_count(&self) -> u64 {
        self.adj.iter().map(|s| s.len() as u64).sum()
    }

    pub fn has(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].contains(&v)
    }
}

/// Queue-based reference BFS.
pub fn ref_bfs(g: &RefGraph, source: u32) -> Vec<u32> {
    let mut dist = vec![UNREACHED; g.n];
    dist[source as usize] = 0;
    let mut q = VecDeque::from([source]);
    while let Some(u) = q.pop_front() {
        for &v in &g.adj[u as usize] {
            if dist[v as usize] == UNREACHED {
                dist[v as usize] = dist[u as usize] + 1;
                q.push_back(v);
            }
        }
    }
    dist
}

/// Dense-matrix power iteration with dangling redistribution and damping.
pub fn ref_pagerank(g: &RefGraph, iters: u32, damping: f64) -> Vec<f64> {
    let n = g.n;
    // column-stochastic transition matrix, dangling columns spread uniformly
    let mut m = vec![0.0f64; n * n];
    for u in 0..n {
        let d = g.adj[u].len();
        if d == 0 {
            for v in 0..n {
                m[v * n + u] = 1.0 / n as f64;
            }
        } else {
            for &v in &g.adj[u] {
                m[v as usize * n + u] = 1.0 / d as f64;
            }
        }
    }
    let mut rank = vec![1.0 / n as f64; n];
    let base = (1.0 - damping) / n as f64;
    for _ in 0..iters {
        let mut next = vec![0.0f64; n];
        for (v, slot) in next.iter_mut().enumerate() {
            let mut sum = 0.0;
            for (u, r) in rank.iter().enumerate() {
                sum += m[v * n + u] * r;
            }
            *slot = base + damping * sum;
        }
        rank = next;
    }
    rank
}

/// Binary-heap reference shortest paths using the engine's weight rules.
pub fn ref_sssp(g: &RefGraph, source: u32, weights: Option<&dyn Fn(u32, u32) -> u64>) -> Vec<u64> {
    let mut dist = vec![UNREACHED_DIST; g.n];
    dist[source as usize] = 0;
    let mut heap = BinaryHeap::from([(std::cmp::Reverse(0u64), source)]);
    while let Some((std::cmp::Reverse(d), u)) = heap.pop() {
        if d > dist[u as usize] {
            continue;
        }
        for &v in &g.adj[u as usize] {
            let w = match weights {
                Some(f) => f(u, v),
                None => fallback_weight(VertexId(u), VertexId(v)) as u64,
            };
            let nd = d + w;
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                heap.push((std::cmp::Reverse(nd), v));
            }
        }
    }
    dist
}

/// Union-find reference for weakly connected components (labels are the
/// minimum member id).
pub fn ref_wcc(g: &RefGraph) -> Vec<u32> {
    let mut parent: Vec<u32> = (0..g.n as u32).collect();
    fn find(p: &mut [u32], mut x: u32) -> u32 {
        while p[x as usize] != x {
            p[x as usize] = p[p[x as usize] as usize];
            x = p[x as usize];
        }
        x
    }
    for u in 0..g.n as u32 {
        for &v in &g.adj[u as usize] {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi as usize] = lo;
            }
        }
    }
    (0..g.n as u32).map(|u| find(&mut parent, u)).collect()
}

/// Triple-enumeration triangle count over an undirected edge set.
pub fn ref_triangles(g: &RefGraph) -> u64 {
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut set = HashSet::new();
    for u in 0..g.n as u32 {
        for &v in &g.adj[u as usize] {
            if u < v {
                edges.push((u, v));
            }
            set.insert((u, v));
        }
    }
    let mut count = 0u64;
    for (u, v) in edges {
        for w in (v + 1)..g.n as u32 {
            if set.contains(&(u, w)) && set.contains(&(v, w)) {
                count += 1;
            }
        }
    }
    count
}

// ---------------------------------------------------------------------------
// generators and loading

/// Uniform random distinct edge list (no self-loops).
pub fn gen_uniform(n: u32, m: usize, seed: u64) -> Vec<(u32, u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v && seen.insert((u, v)) {
            out.push((u, v));
        }
    }
    out
}

/// Heavy-tailed degree sequence: vertex `i` targets ~`c / (i + 1)` edges,
/// destinations uniform. Produces a few very high-degree sources and a long
/// low-degree tail.
pub fn gen_power_law(n: u32, avg_degree: u32, seed: u64) -> Vec<(u32, u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = n as u64 * avg_degree as u64;
    let harmonic: f64 = (1..=n as u64).map(|i| 1.0 / i as f64).sum();
    let c = m as f64 / harmonic;
    let mut out = Vec::with_capacity(m as usize);
    for i in 0..n {
        let want = ((c / (i + 1) as f64).round() as u64).min(n as u64 - 1);
        let mut dsts = HashSet::with_capacity(want as usize);
        while (dsts.len() as u64) < want {
            let v = rng.gen_range(0..n);
            if v != i {
                dsts.insert(v);
            }
        }
        for v in dsts {
            out.push((i, v));
        }
    }
    out
}

/// Load an edge list through batched write transactions.
pub fn load_edges(store: &GraphStore, edges: &[(u32, u32)], mirror: bool, batch: usize) {
    let mut ops = Vec::with_capacity(batch);
    for (u, v) in edges {
        ops.push(WriteOp::InsertEdge(VertexId(*u), VertexId(*v), None));
        if mirror {
            ops.push(WriteOp::InsertEdge(VertexId(*v), VertexId(*u), None));
        }
        if ops.len() + 1 >= batch.max(2) {
            store.txn_write(&ops).unwrap();
            ops.clear();
        }
    }
    if !ops.is_empty() {
        store.txn_write(&ops).unwrap();
    }
}

/// Mirror of the engine state as a reference graph.
pub fn ref_from_handle(h: &mvgraph::ReadHandle, n: usize) -> RefGraph {
    let mut g = RefGraph::new(n);
    h.for_each_vertex(|u| {
        h.scan(u, |v, _| {
            g.add(u.0, v.0);
        })
        .unwrap();
    });
    g
}
