//! Subgraph-centric concurrency control.
//!
//! Writers serialize per subgraph through a flat lock table and globally
//! through the write clock `t_w`; the read clock `t_r` trails it and marks
//! the newest consistent snapshot. Readers never lock: they claim a tracer
//! slot with a compare-and-exchange, pick per-subgraph snapshots by
//! timestamp, and run on those.
//!
//! Version reclamation follows the timestamp-interval rule: an entry that is
//! not the chain head is reclaimed when no registered reader's start
//! timestamp falls between its commit and that of its surviving successor.
//! A reclaimed entry's snapshot is released immediately (timestamp selection
//! proves no reader can still pick it), while the small chain-entry shell is
//! parked in a limbo list until every reader that was mid-traversal at
//! unlink time has moved on; that keeps the lock-free chain walk safe
//! without ever making readers block.

use std::ptr::NonNull;
use std::sync::atomic::{AtomicPtr, AtomicU64, Ordering};
use std::sync::Mutex;

use parking_lot::lock_api::RawMutex as _;
use parking_lot::RawMutex;

use crate::instr;
use crate::pool::{MemPool, ObjClass};
use crate::subgraph::SnapshotRef;
use crate::types::{Error, Result, Timestamp, TracerFullPolicy};

// ---------------------------------------------------------------------------
// clocks

/// Global write / read logical clocks; both start at 0.
pub struct GlobalClocks {
    t_w: AtomicU64,
    t_r: AtomicU64,
}

impl GlobalClocks {
    #[allow(clippy::new_without_default)]
    pub fn new() -> GlobalClocks {
        GlobalClocks {
            t_w: AtomicU64::new(0),
            t_r: AtomicU64::new(0),
        }
    }

    pub fn read_ts(&self) -> Timestamp {
        Timestamp(self.t_r.load(Ordering::SeqCst))
    }

    pub fn write_ts(&self) -> Timestamp {
        Timestamp(self.t_w.load(Ordering::SeqCst))
    }

    /// Claim the next commit timestamp.
    pub fn next_commit(&self) -> Timestamp {
        Timestamp(self.t_w.fetch_add(1, Ordering::SeqCst) + 1)
    }

    /// Writers commit in timestamp order: spin until `t_r` reaches `t - 1`,
    /// then advance it to `t`.
    pub fn advance_read(&self, t: Timestamp) {
        loop {
            match self
                .t_r
                .compare_exchange(t.0 - 1, t.0, Ordering::SeqCst, Ordering::SeqCst)
            {
                Ok(_) => return,
                Err(cur) => {
                    debug_assert!(cur < t.0, "read clock never passes a pending commit");
                    std::hint::spin_loop();
                    std::thread::yield_now();
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// reader tracer

const STATUS_BIT: u64 = 1 << 63;
/// A free slot: status 0, timestamp at the 63-bit maximum.
const FREE_WORD: u64 = STATUS_BIT - 1;

/// Fixed array of `k` atomic slots registering active readers' start
/// timestamps. The per-slot era counter ticks on register, on finishing the
/// chain walk, and on unregister; the garbage collector uses it to tell
/// whether a reader that was present at unlink time is still there.
pub struct ReaderTracer {
    slots: Vec<AtomicU64>,
    eras: Vec<AtomicU64>,
}

impl ReaderTracer {
    pub fn new(k: usize) -> ReaderTracer {
        ReaderTracer {
            slots: (0..k).map(|_| AtomicU64::new(FREE_WORD)).collect(),
            eras: (0..k).map(|_| AtomicU64::new(0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Claim a free slot and publish the current read timestamp in it.
    ///
    /// The publication is validated: if `t_r` moved between reading it and
    /// writing the slot, the slot is refreshed and re-checked. After this
    /// returns, any writer that garbage-collects must see the slot, which is
    /// what makes the subsequent lock-free chain walk safe.
    pub fn register(
        &self,
        clocks: &GlobalClocks,
        policy: TracerFullPolicy,
    ) -> Result<(usize, Timestamp)> {
        let k = self.slots.len();
        let mut backoff = 0u32;
        loop {
            let start = rotor_offset() % k;
            for i in 0..k {
                let idx = (start + i) % k;
                let mut t = clocks.t_r.load(Ordering::SeqCst);
                if self.slots[idx]
                    .compare_exchange(
                        FREE_WORD,
                        STATUS_BIT | t,
                        Ordering::SeqCst,
                        Ordering::SeqCst,
                    )
                    .is_err()
                {
                    continue;
                }
                self.eras[idx].fetch_add(1, Ordering::SeqCst);
                loop {
                    let now = clocks.t_r.load(Ordering::SeqCst);
                    if now == t {
                        break;
                    }
                    t = now;
                    self.slots[idx].store(STATUS_BIT | t, Ordering::SeqCst);
                }
                return Ok((idx, Timestamp(t)));
            }
            match policy {
                TracerFullPolicy::Error => return Err(Error::TracerFull),
                TracerFullPolicy::Spin => {
                    backoff = (backoff + 1).min(16);
                    for _ in 0..(1u32 << backoff.min(10)) {
                        std::hint::spin_loop();
                    }
                    std::thread::yield_now();
                }
            }
        }
    }

    /// The reader finished building its snapshot view and will not touch
    /// version chains again.
    pub fn mark_view_built(&self, slot: usize) {
        self.eras[slot].fetch_add(1, Ordering::SeqCst);
    }

    /// Free the slot: status 0, timestamp back to the maximum.
    pub fn unregister(&self, slot: usize) {
        self.slots[slot].store(FREE_WORD, Ordering::SeqCst);
        self.eras[slot].fetch_add(1, Ordering::SeqCst);
    }

    /// Start timestamps of all registered readers, ascending.
    pub fn active_timestamps(&self) -> Vec<u64> {
        let mut out: Vec<u64> = self
            .slots
            .iter()
            .filter_map(|s| {
                let w = s.load(Ordering::SeqCst);
                (w & STATUS_BIT != 0).then_some(w & !STATUS_BIT)
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// `(slot, era)` of every busy slot; a limbo pin clears once the era moves.
    fn busy_pins(&self) -> Vec<(u32, u64)> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.load(Ordering::SeqCst) & STATUS_BIT != 0)
            .map(|(i, _)| (i as u32, self.eras[i].load(Ordering::SeqCst)))
            .collect()
    }

    fn pin_cleared(&self, slot: u32, era: u64) -> bool {
        self.eras[slot as usize].load(Ordering::SeqCst) != era
    }

    #[cfg(test)]
    pub(crate) fn raw_slot(&self, idx: usize) -> u64 {
        self.slots[idx].load(Ordering::SeqCst)
    }
}

fn rotor_offset() -> usize {
    use std::cell::Cell;
    thread_local! {
        static ROTOR: Cell<usize> = const { Cell::new(0) };
    }
    ROTOR.with(|r| {
        let v = r.get();
        if v == 0 {
            // seed from the thread id so threads start scattered
            use std::hash::{Hash, Hasher};
            let mut h = std::collections::hash_map::DefaultHasher::new();
            std::thread::current().id().hash(&mut h);
            let seed = h.finish() as usize | 1;
            r.set(seed.wrapping_add(1));
            seed
        } else {
            r.set(v.wrapping_add(1));
            v
        }
    })
}

// ---------------------------------------------------------------------------
// version chains

/// One committed version of one subgraph. Immutable after publication
/// except for `next`, which only the lock-holding writer rewrites (unlink).
pub struct ChainEntry {
    pub ts: u64,
    snapshot: SnapshotRef,
    next: AtomicPtr<ChainEntry>,
}

/// Newest-first version chain; the head pointer is the single point of
/// publication.
pub struct VersionChain {
    head: AtomicPtr<ChainEntry>,
}

impl VersionChain {
    /// A chain seeded with the initial version-0 snapshot.
    pub fn new(initial: SnapshotRef, pool: &MemPool) -> VersionChain {
        let e = pool.alloc(
            ObjClass::ChainEntry,
            ChainEntry {
                ts: 0,
                snapshot: initial,
                next: AtomicPtr::new(std::ptr::null_mut()),
            },
        );
        VersionChain {
            head: AtomicPtr::new(e.as_ptr()),
        }
    }

    /// Latest snapshot (lock-holding writers only).
    pub fn latest(&self) -> SnapshotRef {
        let head = unsafe { &*self.head.load(Ordering::Acquire) };
        let s = head.snapshot;
        s.retain();
        s
    }

    /// Publish a new version: links the entry and swings the head with one
    /// atomic store. Takes ownership of the snapshot reference.
    pub fn publish(&self, ts: Timestamp, snapshot: SnapshotRef, pool: &MemPool) {
        let old = self.head.load(Ordering::Relaxed);
        let e = pool.alloc(
            ObjClass::ChainEntry,
            ChainEntry {
                ts: ts.0,
                snapshot,
                next: AtomicPtr::new(old),
            },
        );
        self.head.store(e.as_ptr(), Ordering::SeqCst);
    }

    /// Newest entry with `ts <= start_ts`, with its snapshot retained.
    ///
    /// Lock-free. Entries ahead of the selected one are only inspected; the
    /// limbo discipline keeps shells alive for walks that saw them linked,
    /// and the sequentially consistent link/slot accesses guarantee a walk
    /// that registered after an unlink cannot read the stale pointer.
    pub fn select_visible(&self, start_ts: Timestamp) -> SnapshotRef {
        let mut cur = self.head.load(Ordering::SeqCst);
        loop {
            debug_assert!(!cur.is_null(), "a visible version always exists");
            let e = unsafe { &*cur };
            if e.ts <= start_ts.0 {
                e.snapshot.retain();
                return e.snapshot;
            }
            cur = e.next.load(Ordering::SeqCst);
        }
    }

    /// Walk length (lock-holding writers and teardown only).
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u32 {
        let mut n = 0;
        let mut cur = self.head.load(Ordering::Acquire);
        while !cur.is_null() {
            n += 1;
            cur = unsafe { &*cur }.next.load(Ordering::Acquire);
        }
        n
    }

    /// Commit timestamps newest-first (lock-holding writers only).
    pub fn timestamps(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut cur = self.head.load(Ordering::Acquire);
        while !cur.is_null() {
            let e = unsafe { &*cur };
            out.push(e.ts);
            cur = e.next.load(Ordering::Acquire);
        }
        out
    }

    /// Reclaim every entry that is not the head and whose commit interval
    /// covers no active start timestamp. Must hold the subgraph lock.
    /// Returns the chain length after collection.
    pub fn collect(
        &self,
        active_ts: &[u64],
        tracer: &ReaderTracer,
        limbo: &Limbo,
        pool: &MemPool,
    ) -> u32 {
        let covered = |lo: u64, hi: u64| {
            // any active t with lo <= t < hi
            let i = active_ts.partition_point(|&t| t < lo);
            active_ts.get(i).is_some_and(|&t| t < hi)
        };
        let head = self.head.load(Ordering::Relaxed);
        let mut newer = unsafe { &*head };
        let mut len = 1;
        let mut cur = newer.next.load(Ordering::Relaxed);
        while !cur.is_null() {
            let e = unsafe { &*cur };
            let next = e.next.load(Ordering::Relaxed);
            if covered(e.ts, newer.ts) {
                len += 1;
                newer = e;
            } else {
                newer.next.store(next, Ordering::SeqCst);
                // no reader can select this version anymore; drop its data
                // now and park only the entry shell until mid-walk readers
                // (captured after the unlink) have moved on
                e.snapshot.release(pool);
                limbo.park(unsafe { NonNull::new_unchecked(cur) }, tracer);
            }
            cur = next;
        }
        len
    }

    /// Tear down the whole chain (store drop; no concurrent readers).
    pub fn drain(&self, pool: &MemPool) {
        let mut cur = self.head.swap(std::ptr::null_mut(), Ordering::AcqRel);
        while !cur.is_null() {
            let e = unsafe { &*cur };
            let next = e.next.load(Ordering::Relaxed);
            e.snapshot.release(pool);
            unsafe { pool.dealloc(ObjClass::ChainEntry, NonNull::new_unchecked(cur)) };
            cur = next;
        }
    }
}

// ---------------------------------------------------------------------------
// limbo: deferred reclamation of unlinked chain-entry shells

struct LimboItem {
    entry: NonNull<ChainEntry>,
    /// Busy tracer slots (with eras) observed when the entry was unlinked;
    /// once each has moved on, no walk can still reference the shell.
    pins: Vec<(u32, u64)>,
}

unsafe impl Send for LimboItem {}

/// Unlinked chain entries awaiting a safe point to free.
pub struct Limbo {
    items: Mutex<Vec<LimboItem>>,
}

impl Limbo {
    #[allow(clippy::new_without_default)]
    pub fn new() -> Limbo {
        Limbo {
            items: Mutex::new(Vec::new()),
        }
    }

    /// Park an unlinked shell. The pin set is captured after the unlink
    /// store, so it covers every reader whose walk could have seen the entry
    /// linked; readers registering later read the unlinked pointer.
    fn park(&self, entry: NonNull<ChainEntry>, tracer: &ReaderTracer) {
        let pins = tracer.busy_pins();
        instr::note_lock_acquired();
        self.items.lock().unwrap().push(LimboItem { entry, pins });
    }

    /// Free every parked shell whose pinning readers have all moved on.
    pub fn sweep(&self, tracer: &ReaderTracer, pool: &MemPool) {
        instr::note_lock_acquired();
        let mut items = self.items.lock().unwrap();
        items.retain(|item| {
            let still_pinned = item
                .pins
                .iter()
                .any(|(slot, era)| !tracer.pin_cleared(*slot, *era));
            if !still_pinned {
                unsafe { pool.dealloc(ObjClass::ChainEntry, item.entry) };
            }
            still_pinned
        });
    }

    /// Unconditional drain (store drop; no readers can exist).
    pub fn drain(&self, pool: &MemPool) {
        let mut items = self.items.lock().unwrap();
        for item in items.drain(..) {
            unsafe { pool.dealloc(ObjClass::ChainEntry, item.entry) };
        }
    }

    #[cfg(test)]
    pub(crate) fn parked(&self) -> usize {
        self.items.lock().unwrap().len()
    }
}

// ---------------------------------------------------------------------------
// subgraph lock table

/// Flat mutual-exclusion lock table indexed by partition. Writers acquire in
/// ascending partition order, which rules out deadlock.
pub struct LockTable {
    locks: Vec<RawMutex>,
}

impl LockTable {
    pub fn new(p: usize) -> LockTable {
        LockTable {
            locks: (0..p).map(|_| RawMutex::INIT).collect(),
        }
    }

    pub fn lock(&self, idx: usize) {
        instr::note_lock_acquired();
        self.locks[idx].lock();
    }

    pub fn unlock(&self, idx: usize) {
        unsafe { self.locks[idx].unlock() };
    }

    pub fn try_lock(&self, idx: usize) -> bool {
        let ok = self.locks[idx].try_lock();
        if ok {
            instr::note_lock_acquired();
        }
        ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subgraph::SubgraphSnapshot;
    use crate::types::{Config, PartitionId, PoolMode};
    use std::sync::atomic::AtomicUsize;
    use std::sync::Arc;

    fn cfg() -> Config {
        Config {
            partition_size: 4,
            max_vertices: 64,
            ..Config::default()
        }
    }

    #[test]
    fn tracer_register_unregister_roundtrip() {
        let clocks = GlobalClocks::new();
        let tracer = ReaderTracer::new(4);
        let (slot, ts) = tracer.register(&clocks, TracerFullPolicy::Error).unwrap();
        assert_eq!(ts, Timestamp(0));
        assert_eq!(tracer.raw_slot(slot), STATUS_BIT, "status 1, timestamp 0");
        assert_eq!(tracer.active_timestamps(), vec![0]);
        tracer.unregister(slot);
        assert_eq!(tracer.raw_slot(slot), FREE_WORD, "status 0, max timestamp");
        assert!(tracer.active_timestamps().is_empty());
    }

    #[test]
    fn tracer_fills_all_slots_distinctly() {
        let clocks = GlobalClocks::new();
        let tracer = ReaderTracer::new(8);
        let mut slots = Vec::new();
        for _ in 0..8 {
            let (s, _) = tracer.register(&clocks, TracerFullPolicy::Error).unwrap();
            slots.push(s);
        }
        slots.sort_unstable();
        slots.dedup();
        assert_eq!(slots.len(), 8, "k registrations claim k distinct slots");
        assert!(matches!(
            tracer.register(&clocks, TracerFullPolicy::Error),
            Err(Error::TracerFull)
        ));
    }

    #[test]
    fn tracer_cas_race_no_double_claim() {
        let clocks = Arc::new(GlobalClocks::new());
        let tracer = Arc::new(ReaderTracer::new(8));
        for _round in 0..50 {
            let win = Arc::new(AtomicUsize::new(0));
            let owners: Vec<_> = (0..64)
                .map(|_| {
                    let (c, t, w) = (clocks.clone(), tracer.clone(), win.clone());
                    std::thread::spawn(move || match t.register(&c, TracerFullPolicy::Error) {
                        Ok((slot, _)) => {
                            w.fetch_add(1, Ordering::SeqCst);
                            Some(slot)
                        }
                        Err(_) => None,
                    })
                })
                .collect();
            let mut claimed: Vec<usize> = owners
                .into_iter()
                .filter_map(|h| h.join().unwrap())
                .collect();
            assert_eq!(win.load(Ordering::SeqCst), 8, "exactly k winners per round");
            claimed.sort_unstable();
            claimed.dedup();
            assert_eq!(claimed.len(), 8, "no slot double-claimed");
            for s in claimed {
                tracer.unregister(s);
            }
        }
    }

    #[test]
    fn chain_selects_latest_visible() {
        use crate::subgraph::{ApplyOutcome, SgOp};
        use crate::types::VertexId;
        let pool = MemPool::new(PoolMode::PassThrough);
        let c = cfg();
        let v0 = SubgraphSnapshot::empty(PartitionId(0), &c, &pool);
        // version 1 has one edge, version 3 has two
        let v1 = match v0
            .get()
            .apply(
                &[SgOp::InsertEdge(VertexId(1), VertexId(6), None)],
                &c,
                &pool,
            )
            .unwrap()
        {
            ApplyOutcome::Changed(s) => s,
            ApplyOutcome::Unchanged => panic!(),
        };
        let v3 = match v1
            .get()
            .apply(
                &[SgOp::InsertEdge(VertexId(1), VertexId(7), None)],
                &c,
                &pool,
            )
            .unwrap()
        {
            ApplyOutcome::Changed(s) => s,
            ApplyOutcome::Unchanged => panic!(),
        };
        let chain = VersionChain::new(v0, &pool);
        chain.publish(Timestamp(1), v1, &pool);
        chain.publish(Timestamp(3), v3, &pool);
        assert_eq!(chain.timestamps(), vec![3, 1, 0]);
        // a reader at 2 selects version 1
        let picked = chain.select_visible(Timestamp(2));
        assert_eq!(picked.get().edge_count(), 1);
        picked.release(&pool);
        // a reader at 0 selects the initial version
        let at0 = chain.select_visible(Timestamp(0));
        assert_eq!(at0.get().edge_count(), 0);
        at0.release(&pool);
        // a reader at (or past) the head sees everything
        let at3 = chain.select_visible(Timestamp(9));
        assert_eq!(at3.get().edge_count(), 2);
        at3.release(&pool);
        chain.drain(&pool);
        assert_eq!(pool.live_total(), 0);
    }

    #[test]
    fn gc_interval_rule_matches_brute_force() {
        // chain timestamps {7, 5, 3, 0}; one reader at 5 keeps {7, 5};
        // 3 and 0 are reclaimed
        let pool = MemPool::new(PoolMode::PassThrough);
        let c = cfg();
        let tracer = ReaderTracer::new(4);
        let limbo = Limbo::new();
        let chain = VersionChain::new(SubgraphSnapshot::empty(PartitionId(0), &c, &pool), &pool);
        for ts in [3u64, 5, 7] {
            chain.publish(
                Timestamp(ts),
                SubgraphSnapshot::empty(PartitionId(0), &c, &pool),
                &pool,
            );
        }
        let len = chain.collect(&[5], &tracer, &limbo, &pool);
        assert_eq!(len, 2);
        assert_eq!(chain.timestamps(), vec![7, 5]);
        // brute-force visibility oracle: the version the reader at 5 selects
        // survives alongside the head
        assert!(
            chain.timestamps().iter().any(|&c| c <= 5),
            "reader at 5 still served"
        );
        // no readers were registered at unlink time, so the shells free now
        limbo.sweep(&tracer, &pool);
        assert_eq!(limbo.parked(), 0);
        chain.drain(&pool);
        assert_eq!(pool.live_total(), 0);
    }

    #[test]
    fn gc_with_no_readers_prunes_to_head() {
        let pool = MemPool::new(PoolMode::PassThrough);
        let c = cfg();
        let tracer = ReaderTracer::new(4);
        let limbo = Limbo::new();
        let chain = VersionChain::new(SubgraphSnapshot::empty(PartitionId(0), &c, &pool), &pool);
        for ts in 1..=6u64 {
            chain.publish(
                Timestamp(ts),
                SubgraphSnapshot::empty(PartitionId(0), &c, &pool),
                &pool,
            );
        }
        assert_eq!(chain.collect(&[], &tracer, &limbo, &pool), 1);
        assert_eq!(chain.timestamps(), vec![6]);
        limbo.sweep(&tracer, &pool);
        chain.drain(&pool);
        assert_eq!(pool.live_total(), 0);
    }

    #[test]
    fn k_readers_pin_k_versions_plus_head() {
        let pool = MemPool::new(PoolMode::PassThrough);
        let c = cfg();
        let k = 4;
        let clocks = GlobalClocks::new();
        let tracer = ReaderTracer::new(k);
        let limbo = Limbo::new();
        let chain = VersionChain::new(SubgraphSnapshot::empty(PartitionId(0), &c, &pool), &pool);
        let mut slots = Vec::new();
        for ts in 1..=k as u64 {
            // a reader registers at the current read time, then a commit lands
            let (slot, start) = tracer.register(&clocks, TracerFullPolicy::Error).unwrap();
            assert_eq!(start.0, ts - 1);
            slots.push(slot);
            chain.publish(
                Timestamp(ts),
                SubgraphSnapshot::empty(PartitionId(0), &c, &pool),
                &pool,
            );
            clocks.next_commit();
            clocks.advance_read(Timestamp(ts));
        }
        let len = chain.collect(&tracer.active_timestamps(), &tracer, &limbo, &pool);
        assert_eq!(len as usize, k + 1, "k pinned versions plus the head");
        for s in slots {
            tracer.unregister(s);
        }
        limbo.sweep(&tracer, &pool);
        chain.drain(&pool);
        assert_eq!(pool.live_total(), 0);
    }

    #[test]
    fn limbo_holds_shells_while_reader_mid_walk() {
        let pool = MemPool::new(PoolMode::PassThrough);
        let c = cfg();
        let clocks = GlobalClocks::new();
        let tracer = ReaderTracer::new(2);
        let limbo = Limbo::new();
        let chain = VersionChain::new(SubgraphSnapshot::empty(PartitionId(0), &c, &pool), &pool);
        // a reader registers at start_ts 0 and is still mid-walk
        let (slot, start) = tracer.register(&clocks, TracerFullPolicy::Error).unwrap();
        assert_eq!(start.0, 0);
        // two commits land: chain {2, 1, 0}; version 1 covers no reader
        // (interval [1, 2)) and is unlinked, version 0 stays for the reader
        for ts in [1u64, 2] {
            chain.publish(
                Timestamp(ts),
                SubgraphSnapshot::empty(PartitionId(0), &c, &pool),
                &pool,
            );
        }
        chain.collect(&tracer.active_timestamps(), &tracer, &limbo, &pool);
        assert_eq!(chain.timestamps(), vec![2, 0]);
        assert_eq!(limbo.parked(), 1, "unlinked shell parked");
        limbo.sweep(&tracer, &pool);
        assert_eq!(limbo.parked(), 1, "reader may still be walking: same era");
        tracer.mark_view_built(slot);
        limbo.sweep(&tracer, &pool);
        assert_eq!(limbo.parked(), 0, "era moved, shell freed");
        tracer.unregister(slot);
        chain.drain(&pool);
        assert_eq!(pool.live_total(), 0);
    }

    #[test]
    fn lock_table_counts_acquisitions() {
        let lt = LockTable::new(4);
        let before = instr::locks_on_current_thread();
        lt.lock(2);
        lt.unlock(2);
        assert_eq!(instr::locks_on_current_thread() - before, 1);
        assert!(lt.try_lock(2));
        lt.unlock(2);
    }
}
