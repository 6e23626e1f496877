//! Per-partition immutable snapshots.
//!
//! A snapshot owns a vertex index (one slot per vertex of the partition) and
//! the neighbor structures behind it: low-degree vertices share the
//! subgraph's clustered index, high-degree vertices get their own radix
//! tree. Applying a batch of updates derives a new snapshot copy-on-write;
//! the vertex index array is copied outright, neighbor structures are only
//! copied along their touched paths.

use std::ptr::NonNull;
use std::sync::atomic::{fence, AtomicU32, Ordering};

use crate::cart::{CartCtx, CartStats, CartTree};
use crate::clustered::{CiCtx, CiKey, CiPtr, CiTree};
use crate::pool::{MemPool, ObjClass};
use crate::types::{Config, Error, PartitionId, Result, VertexId};

pub(crate) fn cart_ctx<'a>(pool: &'a MemPool, cfg: &Config) -> CartCtx<'a> {
    CartCtx {
        pool,
        leaf_cap: cfg.leaf_capacity,
        weights: cfg.weights_enabled,
    }
}

pub(crate) fn ci_ctx<'a>(pool: &'a MemPool, cfg: &Config) -> CiCtx<'a> {
    CiCtx {
        pool,
        leaf_fanout: cfg.ci_leaf_fanout,
        internal_fanout: cfg.ci_internal_fanout,
        weights: cfg.weights_enabled,
    }
}

/// Physical position of a neighbor run inside the clustered index; valid
/// exactly as long as the owning snapshot is retained.
#[derive(Clone, Copy)]
pub struct Locator {
    leaf: CiPtr,
    offset: u32,
}

/// Where one vertex's neighbor set lives.
pub enum SlotStorage {
    /// In the shared clustered index; `None` locator means degree 0.
    Clustered(Option<Locator>),
    /// Dedicated radix tree (high-degree vertices; never demoted).
    Cart(CartTree),
}

pub struct Slot {
    pub present: bool,
    pub degree: u32,
    pub storage: SlotStorage,
}

/// One update applied to a single subgraph; sources must belong to it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SgOp {
    InsertEdge(VertexId, VertexId, Option<u32>),
    DeleteEdge(VertexId, VertexId),
    InsertVertex(VertexId),
    DeleteVertexLocal(VertexId),
}

/// Immutable versioned adjacency data of one partition.
pub struct SubgraphSnapshot {
    refcount: AtomicU32,
    partition: PartitionId,
    base: u32,
    slots: Vec<Slot>,
    ci: CiTree,
    edge_count: u64,
}

/// Owned reference to a snapshot.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SnapshotRef(NonNull<SubgraphSnapshot>);

unsafe impl Send for SnapshotRef {}
unsafe impl Sync for SnapshotRef {}

pub enum ApplyOutcome {
    Changed(SnapshotRef),
    /// Every operation was a no-op; the caller can skip publication.
    Unchanged,
}

/// Memory accounting for one snapshot.
#[derive(Clone, Copy, Debug, Default)]
pub struct SgStats {
    pub edges: u64,
    pub cart: CartStats,
    pub cart_trees: u64,
    pub ci_nodes: u64,
    pub ci_entries: u64,
    pub ci_heap_bytes: u64,
}

impl SnapshotRef {
    #[inline]
    pub fn get(&self) -> &SubgraphSnapshot {
        unsafe { self.0.as_ref() }
    }

    pub fn retain(&self) {
        let prev = self.get().refcount.fetch_add(1, Ordering::Relaxed);
        assert!(prev > 0, "retain of a reclaimed snapshot");
    }

    pub fn release(self, pool: &MemPool) {
        let prev = self.get().refcount.fetch_sub(1, Ordering::Release);
        assert!(prev > 0, "release without a matching reference");
        if prev != 1 {
            return;
        }
        fence(Ordering::Acquire);
        let s = self.get();
        for slot in &s.slots {
            if let SlotStorage::Cart(t) = &slot.storage {
                t.release_in_place(pool);
            }
        }
        s.ci.release_in_place(pool);
        unsafe { pool.dealloc(ObjClass::Snapshot, self.0) };
    }
}

impl SubgraphSnapshot {
    /// Empty snapshot (version 0) of one partition.
    pub fn empty(partition: PartitionId, cfg: &Config, pool: &MemPool) -> SnapshotRef {
        let len = cfg.partition_len(partition);
        let slots = (0..len)
            .map(|_| Slot {
                present: cfg.preinit_vertices,
                degree: 0,
                storage: SlotStorage::Clustered(None),
            })
            .collect();
        SnapshotRef(pool.alloc(
            ObjClass::Snapshot,
            SubgraphSnapshot {
                refcount: AtomicU32::new(1),
                partition,
                base: cfg.partition_base(partition),
                slots,
                ci: CiTree::empty(),
                edge_count: 0,
            },
        ))
    }

    pub fn partition(&self) -> PartitionId {
        self.partition
    }

    pub fn edge_count(&self) -> u64 {
        self.edge_count
    }

    #[inline]
    fn slot(&self, u: VertexId) -> Result<&Slot> {
        let i = (u.0 - self.base) as usize;
        debug_assert!(i < self.slots.len(), "vertex {} outside partition", u);
        let s = &self.slots[i];
        if s.present {
            Ok(s)
        } else {
            Err(Error::VertexNotFound(u.0))
        }
    }

    pub fn contains_vertex(&self, u: VertexId) -> bool {
        let i = (u.0 - self.base) as usize;
        i < self.slots.len() && self.slots[i].present
    }

    /// O(1) out-degree.
    pub fn degree(&self, u: VertexId) -> Result<u32> {
        Ok(self.slot(u)?.degree)
    }

    /// Membership of edge `(u, v)`; `Some(weight)` when found.
    pub fn search(&self, u: VertexId, v: VertexId, cfg: &Config) -> Result<Option<Option<u32>>> {
        let slot = self.slot(u)?;
        Ok(match &slot.storage {
            SlotStorage::Clustered(_) => self.ci.search(CiKey::new(u, v), cfg.weights_enabled),
            SlotStorage::Cart(t) => t.search(v),
        })
    }

    /// Ascending neighbor scan of `u`.
    pub fn scan(
        &self,
        u: VertexId,
        cfg: &Config,
        mut f: impl FnMut(VertexId, Option<u32>),
    ) -> Result<()> {
        let slot = self.slot(u)?;
        match &slot.storage {
            SlotStorage::Cart(t) => t.scan(f),
            SlotStorage::Clustered(None) => {}
            SlotStorage::Clustered(Some(loc)) => {
                // contiguous run starting at the recorded position
                let mut last: Option<u32> = None;
                let mut left_run = false;
                let ended_inside = CiTree::scan_leaf_run(
                    loc.leaf,
                    loc.offset,
                    cfg.weights_enabled,
                    &mut |k, w| {
                        if k.src != u.0 {
                            left_run = true;
                            return false;
                        }
                        last = Some(k.dst);
                        f(VertexId(k.dst), w);
                        true
                    },
                );
                // the set can spill into the next leaf
                if !ended_inside && !left_run {
                    if let Some(prev) = last {
                        if prev < u32::MAX {
                            self.ci.scan_from(
                                CiKey {
                                    src: u.0,
                                    dst: prev + 1,
                                },
                                cfg.weights_enabled,
                                |k, w| {
                                    if k.src != u.0 {
                                        return false;
                                    }
                                    f(VertexId(k.dst), w);
                                    true
                                },
                            );
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn neighbors(&self, u: VertexId, cfg: &Config) -> Result<Vec<VertexId>> {
        let mut out = Vec::with_capacity(self.degree(u)? as usize);
        self.scan(u, cfg, |v, _| out.push(v))?;
        Ok(out)
    }

    /// Neighbor set of `u` as a tree handle when it is cart-stored.
    pub(crate) fn cart_of(&self, u: VertexId) -> Option<&CartTree> {
        let i = (u.0 - self.base) as usize;
        match &self.slots.get(i)?.storage {
            SlotStorage::Cart(t) => Some(t),
            _ => None,
        }
    }

    pub fn stats(&self) -> SgStats {
        let mut s = SgStats {
            edges: self.edge_count,
            ci_nodes: self.ci.node_count(),
            ci_entries: self.ci.len(),
            ci_heap_bytes: self.ci.heap_bytes(),
            ..Default::default()
        };
        for slot in &self.slots {
            if let SlotStorage::Cart(t) = &slot.storage {
                let st = t.stats();
                s.cart_trees += 1;
                s.cart.inner_nodes += st.inner_nodes;
                s.cart.leaves += st.leaves;
                s.cart.entries += st.entries;
                s.cart.bitmap_leaves += st.bitmap_leaves;
                s.cart.heap_bytes += st.heap_bytes;
            }
        }
        s
    }

    /// Derive a new snapshot with `ops` applied in order. Duplicate inserts
    /// and absent deletes are no-ops; if nothing effective remains the
    /// caller gets [`ApplyOutcome::Unchanged`] and may skip publication.
    pub fn apply(&self, ops: &[SgOp], cfg: &Config, pool: &MemPool) -> Result<ApplyOutcome> {
        let cctx = cart_ctx(pool, cfg);
        let ictx = ci_ctx(pool, cfg);
        let mut slots: Vec<Slot> = self
            .slots
            .iter()
            .map(|s| Slot {
                present: s.present,
                degree: s.degree,
                storage: match &s.storage {
                    SlotStorage::Clustered(loc) => SlotStorage::Clustered(*loc),
                    SlotStorage::Cart(t) => SlotStorage::Cart(t.clone_ref()),
                },
            })
            .collect();
        let mut ci = self.ci.clone_ref();
        let mut ci_dirty = false;
        let mut edge_count = self.edge_count;
        let mut changed = false;

        let abort = |slots: Vec<Slot>, ci: CiTree| {
            for s in slots {
                if let SlotStorage::Cart(t) = s.storage {
                    t.release(pool);
                }
            }
            ci.release(pool);
        };

        for op in ops {
            match op {
                SgOp::InsertVertex(u) => {
                    let slot = &mut slots[(u.0 - self.base) as usize];
                    if !slot.present {
                        slot.present = true;
                        changed = true;
                    }
                }
                SgOp::DeleteVertexLocal(u) => {
                    let slot = &mut slots[(u.0 - self.base) as usize];
                    if slot.present {
                        if slot.degree != 0 {
                            let degree = slot.degree;
                            abort(slots, ci);
                            return Err(Error::ResidualEdges {
                                vertex: u.0,
                                degree,
                            });
                        }
                        slot.present = false;
                        changed = true;
                    }
                }
                SgOp::InsertEdge(u, v, w) => {
                    let slot = &mut slots[(u.0 - self.base) as usize];
                    if !slot.present {
                        slot.present = true;
                        changed = true;
                    }
                    match &mut slot.storage {
                        SlotStorage::Clustered(_) => {
                            let (ci2, added) = ci.insert(CiKey::new(*u, *v), *w, &ictx);
                            ci.release(pool);
                            ci = ci2;
                            if added {
                                slot.degree += 1;
                                edge_count += 1;
                                changed = true;
                                ci_dirty = true;
                                if slot.degree > cfg.promote_threshold {
                                    // move the whole set into its own tree
                                    let (entries, ci3) = ci.extract_src(*u, &ictx);
                                    ci.release(pool);
                                    ci = ci3;
                                    debug_assert_eq!(entries.len() as u32, slot.degree);
                                    let entries: Vec<(u32, Option<u32>)> = entries;
                                    slot.storage =
                                        SlotStorage::Cart(CartTree::from_sorted(&entries, &cctx));
                                }
                            }
                        }
                        SlotStorage::Cart(t) => {
                            let (t2, added) = t.insert(*v, *w, &cctx);
                            let old = std::mem::replace(t, t2);
                            old.release(pool);
                            if added {
                                slot.degree += 1;
                                edge_count += 1;
                                changed = true;
                            }
                        }
                    }
                }
                SgOp::DeleteEdge(u, v) => {
                    let slot = &mut slots[(u.0 - self.base) as usize];
                    if !slot.present {
                        continue;
                    }
                    match &mut slot.storage {
                        SlotStorage::Clustered(_) => {
                            let (ci2, removed) = ci.remove(CiKey::new(*u, *v), &ictx);
                            ci.release(pool);
                            ci = ci2;
                            if removed {
                                slot.degree -= 1;
                                edge_count -= 1;
                                changed = true;
                                ci_dirty = true;
                            }
                        }
                        SlotStorage::Cart(t) => {
                            let (t2, removed) = t.remove(*v, &cctx);
                            let old = std::mem::replace(t, t2);
                            old.release(pool);
                            if removed {
                                slot.degree -= 1;
                                edge_count -= 1;
                                changed = true;
                            }
                        }
                    }
                }
            }
        }

        if !changed {
            abort(slots, ci);
            return Ok(ApplyOutcome::Unchanged);
        }

        if ci_dirty {
            // locators are snapshot-internal: recompute them against the new
            // clustered index (shared-index snapshots keep the old values)
            for s in &mut slots {
                if let SlotStorage::Clustered(loc) = &mut s.storage {
                    *loc = None;
                }
            }
            ci.for_each_entry_pos(|k, leaf, offset| {
                let i = (k.src - self.base) as usize;
                if let SlotStorage::Clustered(loc @ None) = &mut slots[i].storage {
                    *loc = Some(Locator { leaf, offset });
                }
            });
        }

        Ok(ApplyOutcome::Changed(SnapshotRef(pool.alloc(
            ObjClass::Snapshot,
            SubgraphSnapshot {
                refcount: AtomicU32::new(1),
                partition: self.partition,
                base: self.base,
                slots,
                ci,
                edge_count,
            },
        ))))
    }
}
