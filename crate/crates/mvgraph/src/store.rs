//! Public engine facade: open a store, run write transactions, open reader
//! snapshots.
//!
//! A write transaction locks the affected subgraphs in ascending order,
//! derives new snapshots copy-on-write, publishes them under one commit
//! timestamp, garbage-collects the touched chains and unlocks. A reader
//! registers in the tracer, picks one snapshot per subgraph at its start
//! timestamp, and from then on is wait-free and fully repeatable until
//! closed.

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use crate::cart::{CartStats, CartTree, IntersectStrategy};
use crate::instr;
use crate::mvcc::{GlobalClocks, Limbo, LockTable, ReaderTracer, VersionChain};
use crate::oracle::{ChecksumBuilder, HistoryEvent, HistoryRecorder, OracleOp};
use crate::pool::MemPool;
use crate::subgraph::{ApplyOutcome, SgOp, SgStats, SnapshotRef, SubgraphSnapshot};
use crate::types::{Config, Error, PartitionId, Result, Timestamp, VertexId};

/// Largest operation count one transaction may carry.
pub const MAX_TXN_OPS: usize = 1 << 16;

/// One operation inside a write transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WriteOp {
    InsertEdge(VertexId, VertexId, Option<u32>),
    DeleteEdge(VertexId, VertexId),
    InsertVertex(VertexId),
    /// Clear the present flag; the vertex must have no residual out-edges.
    DeleteVertexLocal(VertexId),
}

impl WriteOp {
    fn to_oracle(&self) -> OracleOp {
        match self {
            WriteOp::InsertEdge(u, v, w) => OracleOp::InsertEdge {
                u: u.0,
                v: v.0,
                w: *w,
            },
            WriteOp::DeleteEdge(u, v) => OracleOp::DeleteEdge { u: u.0, v: v.0 },
            WriteOp::InsertVertex(u) => OracleOp::InsertVertex { u: u.0 },
            WriteOp::DeleteVertexLocal(u) => OracleOp::DeleteVertex { u: u.0 },
        }
    }

    fn to_sg(&self) -> SgOp {
        match self {
            WriteOp::InsertEdge(u, v, w) => SgOp::InsertEdge(*u, *v, *w),
            WriteOp::DeleteEdge(u, v) => SgOp::DeleteEdge(*u, *v),
            WriteOp::InsertVertex(u) => SgOp::InsertVertex(*u),
            WriteOp::DeleteVertexLocal(u) => SgOp::DeleteVertexLocal(*u),
        }
    }

    fn src(&self) -> VertexId {
        match self {
            WriteOp::InsertEdge(u, ..)
            | WriteOp::DeleteEdge(u, _)
            | WriteOp::InsertVertex(u)
            | WriteOp::DeleteVertexLocal(u) => *u,
        }
    }
}

struct StoreInner {
    cfg: Config,
    pool: Arc<MemPool>,
    clocks: GlobalClocks,
    tracer: ReaderTracer,
    chains: Vec<VersionChain>,
    locks: LockTable,
    limbo: Limbo,
    reuse: Mutex<VecDeque<u32>>,
    next_vertex: AtomicU32,
    recorder: OnceLock<Arc<HistoryRecorder>>,
    writer_ids: AtomicU64,
    max_chain_len: AtomicU32,
}

/// Handle to one open store; clones share it.
#[derive(Clone)]
pub struct GraphStore {
    inner: Arc<StoreInner>,
}

/// Aggregate structure counters of the latest graph version.
#[derive(Clone, Copy, Debug, Default)]
pub struct StoreStats {
    pub edges: u64,
    pub cart: CartStats,
    pub cart_trees: u64,
    pub ci_nodes: u64,
    pub ci_entries: u64,
    pub ci_heap_bytes: u64,
    pub live_objects: u64,
    pub max_chain_len: u32,
}

impl GraphStore {
    pub fn open(cfg: Config) -> Result<GraphStore> {
        cfg.validate()?;
        let pool = Arc::new(MemPool::new(cfg.pool_mode));
        let p = cfg.partition_count();
        let chains = (0..p)
            .map(|i| {
                VersionChain::new(
                    SubgraphSnapshot::empty(PartitionId(i as u32), &cfg, &pool),
                    &pool,
                )
            })
            .collect();
        Ok(GraphStore {
            inner: Arc::new(StoreInner {
                tracer: ReaderTracer::new(cfg.tracer_slots),
                locks: LockTable::new(p),
                clocks: GlobalClocks::new(),
                limbo: Limbo::new(),
                reuse: Mutex::new(VecDeque::new()),
                next_vertex: AtomicU32::new(0),
                recorder: OnceLock::new(),
                writer_ids: AtomicU64::new(0),
                max_chain_len: AtomicU32::new(1),
                chains,
                pool,
                cfg,
            }),
        })
    }

    pub fn config(&self) -> &Config {
        &self.inner.cfg
    }

    /// The store's allocation pool; holding it past the store's drop lets
    /// callers verify that teardown reclaimed every object.
    pub fn pool(&self) -> Arc<MemPool> {
        Arc::clone(&self.inner.pool)
    }

    /// Attach a history recorder (once); writers then log commits and
    /// post-collection chain lengths.
    pub fn enable_history(&self, rec: Arc<HistoryRecorder>) {
        let _ = self.inner.recorder.set(rec);
    }

    /// Current write / read clocks `(t_w, t_r)`.
    pub fn clocks(&self) -> (Timestamp, Timestamp) {
        (self.inner.clocks.write_ts(), self.inner.clocks.read_ts())
    }

    /// Live pool objects (nodes, leaves, snapshots, chain entries); exactly
    /// zero once every handle and the store itself are gone.
    pub fn live_objects(&self) -> u64 {
        self.inner.pool.live_total()
    }

    /// Largest chain length seen after any collection.
    pub fn max_chain_len(&self) -> u32 {
        self.inner.max_chain_len.load(Ordering::Relaxed)
    }

    /// Run one write transaction; returns its commit timestamp.
    pub fn txn_write(&self, ops: &[WriteOp]) -> Result<Timestamp> {
        let inner = &*self.inner;
        if ops.len() > MAX_TXN_OPS {
            return Err(Error::BatchTooLarge {
                len: ops.len(),
                max: MAX_TXN_OPS,
            });
        }
        // validate and group per subgraph before taking any lock
        let mut groups: BTreeMap<u32, Vec<SgOp>> = BTreeMap::new();
        for op in ops {
            match op {
                WriteOp::InsertEdge(u, v, _) | WriteOp::DeleteEdge(u, v) => {
                    inner.cfg.check_vertex(*u)?;
                    inner.cfg.check_vertex(*v)?;
                }
                WriteOp::InsertVertex(u) | WriteOp::DeleteVertexLocal(u) => {
                    inner.cfg.check_vertex(*u)?;
                }
            }
            let pid = inner.cfg.partition_of(op.src())?;
            groups.entry(pid.0).or_default().push(op.to_sg());
        }
        let pids: Vec<u32> = groups.keys().copied().collect();
        for pid in &pids {
            inner.locks.lock(*pid as usize);
        }
        let result = self.apply_and_commit(&pids, &groups, ops);
        for pid in &pids {
            inner.locks.unlock(*pid as usize);
        }
        result
    }

    /// Steps ③–⑤ of the writer pipeline; caller holds the subgraph locks.
    fn apply_and_commit(
        &self,
        pids: &[u32],
        groups: &BTreeMap<u32, Vec<SgOp>>,
        ops: &[WriteOp],
    ) -> Result<Timestamp> {
        let inner = &*self.inner;
        let mut built: Vec<(u32, SnapshotRef)> = Vec::with_capacity(pids.len());
        for (pid, batch) in groups {
            let latest = inner.chains[*pid as usize].latest();
            let outcome = latest.get().apply(batch, &inner.cfg, &inner.pool);
            latest.release(&inner.pool);
            match outcome {
                Ok(ApplyOutcome::Changed(s)) => built.push((*pid, s)),
                Ok(ApplyOutcome::Unchanged) => {}
                Err(e) => {
                    for (_, s) in built {
                        s.release(&inner.pool);
                    }
                    return Err(e);
                }
            }
        }
        // commit: one timestamp for every touched subgraph, then advance the
        // read clock in commit order
        let t = inner.clocks.next_commit();
        for (pid, snap) in built {
            inner.chains[pid as usize].publish(t, snap, &inner.pool);
        }
        inner.clocks.advance_read(t);
        if let Some(rec) = inner.recorder.get() {
            let writer = inner.writer_ids.fetch_add(1, Ordering::Relaxed);
            rec.record(HistoryEvent::WriterCommit {
                writer,
                ts: t.0,
                ops: ops.iter().map(|o| o.to_oracle()).collect(),
            });
        }
        // garbage-collect the chains this transaction touched
        let active = inner.tracer.active_timestamps();
        for pid in pids {
            let len = inner.chains[*pid as usize].collect(
                &active,
                &inner.tracer,
                &inner.limbo,
                &inner.pool,
            );
            inner.max_chain_len.fetch_max(len, Ordering::Relaxed);
            if let Some(rec) = inner.recorder.get() {
                rec.record(HistoryEvent::ChainSample {
                    partition: *pid,
                    len,
                });
            }
        }
        inner.limbo.sweep(&inner.tracer, &inner.pool);
        Ok(t)
    }

    /// Allocate a vertex ID (reusing freed ones) and mark it present.
    pub fn txn_insert_vertex(&self) -> Result<(VertexId, Timestamp)> {
        let inner = &*self.inner;
        let id = {
            instr::note_lock_acquired();
            let mut q = inner.reuse.lock().unwrap();
            match q.pop_front() {
                Some(id) => id,
                None => {
                    let id = inner.next_vertex.fetch_add(1, Ordering::SeqCst);
                    if (id as u64) >= inner.cfg.max_vertices {
                        inner.next_vertex.fetch_sub(1, Ordering::SeqCst);
                        return Err(Error::CapacityExhausted);
                    }
                    id
                }
            }
        };
        let ts = self.txn_write(&[WriteOp::InsertVertex(VertexId(id))])?;
        Ok((VertexId(id), ts))
    }

    /// Delete a vertex: removes its incident edges (and their mirrors when
    /// the store is configured as mirrored), clears the present flag and
    /// queues the ID for reuse.
    pub fn txn_delete_vertex(&self, u: VertexId) -> Result<Timestamp> {
        let inner = &*self.inner;
        inner.cfg.check_vertex(u)?;
        let home = inner.cfg.partition_of(u)?.0;
        loop {
            // plan the lock set from the current neighbor set
            let neighbors = {
                let h = self.read()?;
                if !h.contains_vertex(u)? {
                    return Err(Error::VertexNotFound(u.0));
                }
                h.neighbors(u)?
            };
            let mut pids: Vec<u32> = vec![home];
            if inner.cfg.mirrored {
                for v in &neighbors {
                    pids.push(inner.cfg.partition_of(*v)?.0);
                }
            }
            pids.sort_unstable();
            pids.dedup();
            for pid in &pids {
                inner.locks.lock(*pid as usize);
            }
            // the neighbor set may have changed before we locked; verify
            let latest = inner.chains[home as usize].latest();
            let current = if latest.get().contains_vertex(u) {
                Some(latest.get().neighbors(u, &inner.cfg)?)
            } else {
                None
            };
            latest.release(&inner.pool);
            let current = match current {
                Some(c) => c,
                None => {
                    for pid in &pids {
                        inner.locks.unlock(*pid as usize);
                    }
                    return Err(Error::VertexNotFound(u.0));
                }
            };
            let covered = !inner.cfg.mirrored
                || current.iter().all(|v| {
                    pids.binary_search(&(v.0 / inner.cfg.partition_size))
                        .is_ok()
                });
            if !covered {
                for pid in &pids {
                    inner.locks.unlock(*pid as usize);
                }
                continue; // re-plan with the fresh neighbor set
            }
            let mut ops: Vec<WriteOp> = Vec::with_capacity(current.len() * 2 + 1);
            for v in &current {
                ops.push(WriteOp::DeleteEdge(u, *v));
            }
            if inner.cfg.mirrored {
                for v in &current {
                    ops.push(WriteOp::DeleteEdge(*v, u));
                }
            }
            ops.push(WriteOp::DeleteVertexLocal(u));
            let mut groups: BTreeMap<u32, Vec<SgOp>> = BTreeMap::new();
            for op in &ops {
                let pid = inner.cfg.partition_of(op.src())?.0;
                debug_assert!(pids.binary_search(&pid).is_ok());
                groups.entry(pid).or_default().push(op.to_sg());
            }
            let result = self.apply_and_commit(&pids, &groups, &ops);
            for pid in &pids {
                inner.locks.unlock(*pid as usize);
            }
            let ts = result?;
            instr::note_lock_acquired();
            inner.reuse.lock().unwrap().push_back(u.0);
            return Ok(ts);
        }
    }

    /// Open a consistent snapshot of the whole graph.
    pub fn read(&self) -> Result<ReadHandle> {
        let inner = &*self.inner;
        let (slot, start_ts) = inner
            .tracer
            .register(&inner.clocks, inner.cfg.tracer_full_policy)?;
        let views: Vec<SnapshotRef> = inner
            .chains
            .iter()
            .map(|c| c.select_visible(start_ts))
            .collect();
        inner.tracer.mark_view_built(slot);
        Ok(ReadHandle {
            store: Arc::clone(&self.inner),
            slot,
            start_ts,
            views,
        })
    }

    /// Structure counters aggregated over the latest version.
    pub fn stats(&self) -> Result<StoreStats> {
        let h = self.read()?;
        let mut out = StoreStats {
            live_objects: self.live_objects(),
            max_chain_len: self.max_chain_len(),
            ..Default::default()
        };
        for view in &h.views {
            let s: SgStats = view.get().stats();
            out.edges += s.edges;
            out.cart_trees += s.cart_trees;
            out.cart.inner_nodes += s.cart.inner_nodes;
            out.cart.leaves += s.cart.leaves;
            out.cart.entries += s.cart.entries;
            out.cart.bitmap_leaves += s.cart.bitmap_leaves;
            out.cart.heap_bytes += s.cart.heap_bytes;
            out.ci_nodes += s.ci_nodes;
            out.ci_entries += s.ci_entries;
            out.ci_heap_bytes += s.ci_heap_bytes;
        }
        Ok(out)
    }
}

impl Drop for StoreInner {
    fn drop(&mut self) {
        for chain in &self.chains {
            chain.drain(&self.pool);
        }
        self.limbo.drain(&self.pool);
        debug_assert_eq!(self.pool.live_total(), 0, "store teardown leaks objects");
    }
}

/// A registered reader: one consistent, repeatable view of the graph.
/// Closing (dropping) releases the snapshots and frees the tracer slot.
pub struct ReadHandle {
    store: Arc<StoreInner>,
    slot: usize,
    start_ts: Timestamp,
    views: Vec<SnapshotRef>,
}

impl ReadHandle {
    pub fn start_ts(&self) -> Timestamp {
        self.start_ts
    }

    #[inline]
    fn view(&self, u: VertexId) -> Result<&SubgraphSnapshot> {
        self.store.cfg.check_vertex(u)?;
        Ok(self.views[(u.0 / self.store.cfg.partition_size) as usize].get())
    }

    pub fn contains_vertex(&self, u: VertexId) -> Result<bool> {
        Ok(self.view(u)?.contains_vertex(u))
    }

    /// Membership of edge `(u, v)`: `Ok(Some(weight))` when present.
    /// An absent vertex `u` is an error, an absent edge is `Ok(None)`.
    pub fn search(&self, u: VertexId, v: VertexId) -> Result<Option<Option<u32>>> {
        self.store.cfg.check_vertex(v)?;
        self.view(u)?.search(u, v, &self.store.cfg)
    }

    pub fn scan(&self, u: VertexId, f: impl FnMut(VertexId, Option<u32>)) -> Result<()> {
        self.view(u)?.scan(u, &self.store.cfg, f)
    }

    pub fn neighbors(&self, u: VertexId) -> Result<Vec<VertexId>> {
        self.view(u)?.neighbors(u, &self.store.cfg)
    }

    pub fn degree(&self, u: VertexId) -> Result<u32> {
        self.view(u)?.degree(u)
    }

    /// Total edges visible in this snapshot.
    pub fn edge_count(&self) -> u64 {
        self.views.iter().map(|v| v.get().edge_count()).sum()
    }

    /// Number of vertex IDs the store can hold.
    pub fn vertex_capacity(&self) -> u64 {
        self.store.cfg.max_vertices
    }

    /// Ascending neighbor-set intersection of two vertices, dispatched by
    /// cardinality ratio exactly like the storage-level operation.
    pub fn intersect(&self, a: VertexId, b: VertexId) -> Result<Vec<VertexId>> {
        self.intersect_with(a, b, IntersectStrategy::Auto)
    }

    pub fn intersect_with(
        &self,
        a: VertexId,
        b: VertexId,
        strategy: IntersectStrategy,
    ) -> Result<Vec<VertexId>> {
        let (da, db) = (self.degree(a)?, self.degree(b)?);
        let (small, large) = if da <= db { (a, b) } else { (b, a) };
        let (d1, d2) = (da.min(db) as u64, da.max(db) as u64);
        if d1 == 0 {
            return Ok(Vec::new());
        }
        // both sets in their own trees: intersect the trees directly
        let sa = self.view(small)?.cart_of(small);
        let sb = self.view(large)?.cart_of(large);
        if let (Some(ta), Some(tb)) = (sa, sb) {
            return Ok(CartTree::intersect(
                ta,
                tb,
                self.store.cfg.intersect_ratio_threshold,
                strategy,
            ));
        }
        let strategy = match strategy {
            IntersectStrategy::Auto => {
                if d2 < d1 * self.store.cfg.intersect_ratio_threshold as u64 {
                    IntersectStrategy::Merge
                } else {
                    IntersectStrategy::Probe
                }
            }
            s => s,
        };
        let small_set = self.neighbors(small)?;
        let mut out = Vec::new();
        match strategy {
            IntersectStrategy::Merge => {
                let mut i = 0;
                self.scan(large, |v, _| {
                    while i < small_set.len() && small_set[i] < v {
                        i += 1;
                    }
                    if i < small_set.len() && small_set[i] == v {
                        out.push(v);
                        i += 1;
                    }
                })?;
            }
            IntersectStrategy::Probe => {
                let lv = self.view(large)?;
                for v in small_set {
                    if lv.search(large, v, &self.store.cfg)?.is_some() {
                        out.push(v);
                    }
                }
            }
            IntersectStrategy::Auto => unreachable!(),
        }
        Ok(out)
    }

    /// Order-sensitive checksum over the full scan (present vertices
    /// ascending, neighbors ascending); pairs with the serial oracle.
    pub fn scan_checksum(&self) -> (u64, u64) {
        let weights = self.store.cfg.weights_enabled;
        let mut cb = ChecksumBuilder::new();
        let mut edges = 0u64;
        for view in &self.views {
            let s = view.get();
            let base = self.store.cfg.partition_base(s.partition());
            let p_len = self.store.cfg.partition_len(s.partition());
            for i in 0..p_len {
                let u = VertexId(base + i as u32);
                if !s.contains_vertex(u) {
                    continue;
                }
                s.scan(u, &self.store.cfg, |v, w| {
                    cb.edge(u.0, v.0, if weights { w } else { None });
                    edges += 1;
                })
                .expect("present vertex scans");
            }
        }
        (edges, cb.finish())
    }

    /// Visit every present vertex ascending.
    pub fn for_each_vertex(&self, mut f: impl FnMut(VertexId)) {
        for view in &self.views {
            let s = view.get();
            let base = self.store.cfg.partition_base(s.partition());
            for i in 0..self.store.cfg.partition_len(s.partition()) {
                let u = VertexId(base + i as u32);
                if s.contains_vertex(u) {
                    f(u);
                }
            }
        }
    }
}

impl Drop for ReadHandle {
    fn drop(&mut self) {
        for view in self.views.drain(..) {
            view.release(&self.store.pool);
        }
        self.store.tracer.unregister(self.slot);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> Config {
        Config {
            partition_size: 3,
            max_vertices: 30,
            tracer_slots: 4,
            promote_threshold: 4,
            ci_leaf_fanout: 4,
            ci_internal_fanout: 4,
            leaf_capacity: 8,
            preinit_vertices: true,
            ..Config::default()
        }
    }

    fn ie(u: u32, v: u32) -> WriteOp {
        WriteOp::InsertEdge(VertexId(u), VertexId(v), None)
    }

    #[test]
    fn open_directory_sizing() {
        let s = GraphStore::open(small_cfg()).unwrap();
        assert_eq!(s.config().partition_count(), 10);
        let (tw, tr) = s.clocks();
        assert_eq!((tw, tr), (Timestamp(0), Timestamp(0)));
        assert_eq!(s.read().unwrap().edge_count(), 0);
        // |P| = 1 degenerates to one vertex per subgraph
        let s1 = GraphStore::open(Config {
            partition_size: 1,
            max_vertices: 7,
            ..Config::default()
        })
        .unwrap();
        assert_eq!(s1.config().partition_count(), 7);
    }

    #[test]
    fn single_edge_txn_versions_both_subgraphs() {
        let store = GraphStore::open(small_cfg()).unwrap();
        // e(1, 6): subgraphs 0 and 2 both advance to the same commit version
        let t = store.txn_write(&[ie(1, 6)]).unwrap();
        assert_eq!(t, Timestamp(1));
        let (tw, tr) = store.clocks();
        assert_eq!((tw.0, tr.0), (1, 1));
        let h = store.read().unwrap();
        assert_eq!(h.start_ts(), Timestamp(1));
        assert_eq!(h.neighbors(VertexId(1)).unwrap(), vec![VertexId(6)]);
        assert!(h.search(VertexId(1), VertexId(6)).unwrap().is_some());
        assert_eq!(h.search(VertexId(1), VertexId(7)).unwrap(), None);
    }

    #[test]
    fn empty_txn_still_advances_clock() {
        let store = GraphStore::open(small_cfg()).unwrap();
        let t = store.txn_write(&[]).unwrap();
        assert_eq!(t, Timestamp(1));
        // a duplicate insert is an empty write too
        store.txn_write(&[ie(2, 3)]).unwrap();
        let t3 = store.txn_write(&[ie(2, 3)]).unwrap();
        assert_eq!(t3, Timestamp(3));
        let (tw, tr) = store.clocks();
        assert_eq!((tw.0, tr.0), (3, 3));
        assert_eq!(store.read().unwrap().edge_count(), 1);
    }

    #[test]
    fn handle_opened_before_commit_never_sees_it() {
        let store = GraphStore::open(small_cfg()).unwrap();
        store.txn_write(&[ie(0, 1)]).unwrap();
        let before = store.read().unwrap();
        store.txn_write(&[ie(0, 2), ie(9, 4)]).unwrap();
        let after = store.read().unwrap();
        assert_eq!(before.edge_count(), 1);
        assert_eq!(before.neighbors(VertexId(0)).unwrap(), vec![VertexId(1)]);
        assert_eq!(after.edge_count(), 3);
        // repeatability under further writes
        store.txn_write(&[ie(0, 5)]).unwrap();
        assert_eq!(before.edge_count(), 1);
        assert_eq!(after.edge_count(), 3);
        drop(before);
        drop(after);
        store
            .txn_write(&[WriteOp::DeleteEdge(VertexId(0), VertexId(1))])
            .unwrap();
        assert_eq!(store.read().unwrap().edge_count(), 3);
    }

    #[test]
    fn out_of_range_ids_rejected_before_locking() {
        let store = GraphStore::open(small_cfg()).unwrap();
        assert!(matches!(
            store.txn_write(&[ie(0, 99)]),
            Err(Error::VertexOutOfRange { vertex: 99, .. })
        ));
        assert!(matches!(
            store.txn_write(&[ie(99, 0)]),
            Err(Error::VertexOutOfRange { vertex: 99, .. })
        ));
        let h = store.read().unwrap();
        assert!(h.search(VertexId(0), VertexId(99)).is_err());
        assert!(h.neighbors(VertexId(99)).is_err());
    }

    #[test]
    fn vertex_lifecycle_and_id_reuse() {
        let mut cfg = small_cfg();
        cfg.preinit_vertices = false;
        let store = GraphStore::open(cfg).unwrap();
        let (v0, _) = store.txn_insert_vertex().unwrap();
        assert_eq!(v0, VertexId(0), "fresh store hands out ID 0");
        let (v1, _) = store.txn_insert_vertex().unwrap();
        assert_eq!(v1, VertexId(1));
        store.txn_write(&[ie(0, 1), ie(1, 0)]).unwrap();
        // delete vertex 1: must fail while edges remain only if we skip the
        // protocol; the dedicated op removes them in the same commit
        store.txn_delete_vertex(VertexId(1)).unwrap();
        let h = store.read().unwrap();
        assert!(!h.contains_vertex(VertexId(1)).unwrap());
        assert!(h.neighbors(VertexId(1)).is_err());
        // the dangling reverse edge 0 -> 1 is untouched in a directed store
        assert_eq!(h.neighbors(VertexId(0)).unwrap(), vec![VertexId(1)]);
        drop(h);
        // freed ID is reused
        let (v2, _) = store.txn_insert_vertex().unwrap();
        assert_eq!(v2, VertexId(1), "freed ID comes back from the queue");
        assert_eq!(store.read().unwrap().degree(VertexId(1)).unwrap(), 0);
        // deleting an absent vertex errors
        assert!(matches!(
            store.txn_delete_vertex(VertexId(9)),
            Err(Error::VertexNotFound(9))
        ));
    }

    #[test]
    fn mirrored_vertex_delete_clears_reverse_edges() {
        let mut cfg = small_cfg();
        cfg.mirrored = true;
        let store = GraphStore::open(cfg).unwrap();
        store
            .txn_write(&[ie(1, 6), ie(6, 1), ie(1, 9), ie(9, 1)])
            .unwrap();
        store.txn_delete_vertex(VertexId(1)).unwrap();
        let h = store.read().unwrap();
        assert!(!h.contains_vertex(VertexId(1)).unwrap());
        assert_eq!(h.neighbors(VertexId(6)).unwrap(), vec![]);
        assert_eq!(h.neighbors(VertexId(9)).unwrap(), vec![]);
        assert_eq!(h.edge_count(), 0);
    }

    #[test]
    fn delete_vertex_with_residual_edges_via_txn_write_errors() {
        let store = GraphStore::open(small_cfg()).unwrap();
        store.txn_write(&[ie(2, 1)]).unwrap();
        assert!(matches!(
            store.txn_write(&[WriteOp::DeleteVertexLocal(VertexId(2))]),
            Err(Error::ResidualEdges {
                vertex: 2,
                degree: 1
            })
        ));
        // the failed transaction consumed no timestamp
        let (tw, tr) = store.clocks();
        assert_eq!((tw.0, tr.0), (1, 1));
    }

    #[test]
    fn capacity_exhaustion() {
        let store = GraphStore::open(Config {
            max_vertices: 2,
            preinit_vertices: false,
            ..Config::default()
        })
        .unwrap();
        store.txn_insert_vertex().unwrap();
        store.txn_insert_vertex().unwrap();
        assert!(matches!(
            store.txn_insert_vertex(),
            Err(Error::CapacityExhausted)
        ));
    }

    #[test]
    fn intersect_matches_reference() {
        let store = GraphStore::open(Config {
            partition_size: 8,
            max_vertices: 512,
            promote_threshold: 6,
            ..Config::default()
        })
        .unwrap();
        // u = 0 low degree (clustered), u = 1 high degree (tree)
        let mut ops = Vec::new();
        for v in [3u32, 9, 20, 40] {
            ops.push(ie(0, v));
        }
        for v in 0..120u32 {
            ops.push(ie(1, v * 2));
        }
        // u = 2 high degree as well
        for v in 0..90u32 {
            ops.push(ie(2, v * 3));
        }
        store.txn_write(&ops).unwrap();
        let h = store.read().unwrap();
        let want = |a: &[u32], b: &[u32]| -> Vec<VertexId> {
            let sb: std::collections::BTreeSet<u32> = b.iter().copied().collect();
            a.iter()
                .filter(|v| sb.contains(v))
                .map(|v| VertexId(*v))
                .collect()
        };
        let na: Vec<u32> = h
            .neighbors(VertexId(0))
            .unwrap()
            .iter()
            .map(|v| v.0)
            .collect();
        let nb: Vec<u32> = h
            .neighbors(VertexId(1))
            .unwrap()
            .iter()
            .map(|v| v.0)
            .collect();
        let nc: Vec<u32> = h
            .neighbors(VertexId(2))
            .unwrap()
            .iter()
            .map(|v| v.0)
            .collect();
        for (a, b) in [(0u32, 1u32), (0, 2), (1, 2), (0, 0)] {
            let sets = [(&na, &nb), (&na, &nc), (&nb, &nc), (&na, &na)];
            let (sa, sb) = sets[match (a, b) {
                (0, 1) => 0,
                (0, 2) => 1,
                (1, 2) => 2,
                _ => 3,
            }];
            let expect = want(sa, sb);
            for strat in [
                IntersectStrategy::Auto,
                IntersectStrategy::Merge,
                IntersectStrategy::Probe,
            ] {
                assert_eq!(
                    h.intersect_with(VertexId(a), VertexId(b), strat).unwrap(),
                    expect,
                    "intersect({a},{b}) via {strat:?}"
                );
            }
        }
    }

    #[test]
    fn no_leaks_after_teardown() {
        let store = GraphStore::open(small_cfg()).unwrap();
        for i in 0..200u32 {
            store.txn_write(&[ie(i % 30, (i * 7) % 30)]).unwrap();
        }
        let h1 = store.read().unwrap();
        let h2 = store.read().unwrap();
        assert!(store.live_objects() > 0);
        drop(h1);
        drop(h2);
        // dropping the last store handle runs the teardown leak assert
        drop(store);
    }
}
