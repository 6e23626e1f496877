//! Compressed adaptive radix tree: an ordered set of vertex IDs (with
//! optional per-entry weights) keyed by big-endian ID bytes.
//!
//! Unlike a plain radix tree, leaves hold up to `B` sorted entries sharing a
//! common prefix, and several consecutive keys of one node may point to the
//! same leaf. Mutation is copy-on-write: it duplicates the root-to-leaf path
//! and shares everything else, so published trees are immutable and readable
//! without synchronization. Structural sharing is tracked with per-pointer
//! reference counts (see [`node`]).

pub(crate) mod bits;
pub(crate) mod leaf;
pub(crate) mod node;

use leaf::{
    alloc_leaf, leaf_merge, leaf_rebased, leaf_with_inserted, leaf_with_removed, LeafSegment,
};
use node::{alloc_inner, ChildPtr, Children, EditPairs, InnerNode};

use crate::pool::MemPool;
use crate::types::{VertexId, KEY_WIDTH};

/// Parameters threaded through every tree operation.
#[derive(Clone, Copy)]
pub struct CartCtx<'a> {
    pub pool: &'a MemPool,
    /// Leaf capacity `B`.
    pub leaf_cap: u32,
    /// Allocate per-entry weight arrays.
    pub weights: bool,
}

/// Which set-intersection algorithm to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntersectStrategy {
    /// Pick by cardinality ratio.
    Auto,
    /// Simultaneous ordered traversal of both trees.
    Merge,
    /// Probe each member of the smaller tree in the larger one.
    Probe,
}

/// Handle to one immutable tree version. The handle owns one reference on
/// the root; dropping it without [`release`](CartTree::release) leaks, which
/// the pool counters surface in tests.
pub struct CartTree {
    pub(crate) root: Option<ChildPtr>,
    len: u64,
}

/// Structure counters behind the memory report and filling ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CartStats {
    pub inner_nodes: u64,
    pub leaves: u64,
    pub entries: u64,
    pub bitmap_leaves: u64,
    pub heap_bytes: u64,
}

#[inline]
fn byte_at(id: u32, pos: usize) -> u8 {
    id.to_be_bytes()[pos]
}

/// Length in bytes of the longest common prefix of two distinct IDs.
#[inline]
fn lcp_len_of(a: u32, b: u32) -> u8 {
    debug_assert_ne!(a, b);
    ((a ^ b).leading_zeros() / 8) as u8
}

/// Does `id` share the first `len` bytes with `base`?
#[inline]
fn shares_prefix(id: u32, base: u32, len: u8) -> bool {
    len == 0 || (id ^ base) >> (8 * (KEY_WIDTH as u32 - len as u32)) == 0
}

impl CartTree {
    pub fn empty() -> CartTree {
        CartTree { root: None, len: 0 }
    }

    #[inline]
    pub fn len(&self) -> u64 {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// A second handle to the same version (retains the root).
    pub fn clone_ref(&self) -> CartTree {
        if let Some(r) = self.root {
            r.retain();
        }
        CartTree {
            root: self.root,
            len: self.len,
        }
    }

    /// Drop this handle's reference; reclaims unshared nodes.
    pub fn release(self, pool: &MemPool) {
        if let Some(r) = self.root {
            r.release(pool);
        }
    }

    /// Release without consuming; only for tearing down a containing
    /// structure that owns the handle (the handle must not be used again).
    pub(crate) fn release_in_place(&self, pool: &MemPool) {
        if let Some(r) = self.root {
            r.release(pool);
        }
    }

    /// Membership test; `Some(weight)` when found (`weight` is `None` unless
    /// the tree stores weights).
    pub fn search(&self, v: VertexId) -> Option<Option<u32>> {
        let id = v.0;
        let bytes = v.byte_seq();
        let mut cur = self.root?;
        loop {
            match cur {
                ChildPtr::Leaf(_) => {
                    let l = cur.as_leaf().unwrap();
                    return l.rank_of(id).ok().map(|r| l.weight_at(r));
                }
                ChildPtr::Inner(_) => {
                    let n = cur.as_inner().unwrap();
                    if !shares_prefix(id, u32::from_be_bytes(n.prefix), n.depth) {
                        return None;
                    }
                    cur = n.children.get(bytes[n.depth as usize])?;
                }
            }
        }
    }

    /// Visit every member in ascending order.
    pub fn scan(&self, mut f: impl FnMut(VertexId, Option<u32>)) {
        let mut cur = self.cursor();
        while let Some((id, w)) = cur.next() {
            f(VertexId(id), w);
        }
    }

    pub fn to_vec(&self) -> Vec<VertexId> {
        let mut out = Vec::with_capacity(self.len as usize);
        self.scan(|v, _| out.push(v));
        out
    }

    pub fn cursor(&self) -> CartCursor<'_> {
        CartCursor::new(self)
    }

    /// Copy-on-write insert. Returns the new version and whether the set
    /// grew; inserting an existing member shares the whole old tree.
    pub fn insert(&self, v: VertexId, weight: Option<u32>, ctx: &CartCtx) -> (CartTree, bool) {
        let id = v.0;
        let bytes = v.byte_seq();
        match self.root {
            None => {
                let l = alloc_leaf(ctx.pool, 0, &[(id, weight)], ctx.weights);
                (
                    CartTree {
                        root: Some(ChildPtr::Leaf(l)),
                        len: 1,
                    },
                    true,
                )
            }
            Some(root) => {
                let new_root = match root {
                    ChildPtr::Leaf(_) => {
                        let l = root.as_leaf().unwrap();
                        if l.contains(id) {
                            None
                        } else if l.count() < ctx.leaf_cap {
                            Some(ChildPtr::Leaf(leaf_with_inserted(
                                ctx.pool,
                                l,
                                id,
                                weight,
                                ctx.weights,
                            )))
                        } else {
                            // a root leaf behaves like a leaf under a single key
                            Some(split_full_leaf(l, Some((id, weight)), bytes, ctx))
                        }
                    }
                    ChildPtr::Inner(_) => insert_into_node(root, bytes, id, weight, ctx),
                };
                match new_root {
                    None => (self.clone_ref(), false),
                    Some(r) => (
                        CartTree {
                            root: Some(r),
                            len: self.len + 1,
                        },
                        true,
                    ),
                }
            }
        }
    }

    /// Copy-on-write delete; removing an absent member shares the old tree.
    pub fn remove(&self, v: VertexId, ctx: &CartCtx) -> (CartTree, bool) {
        let id = v.0;
        let bytes = v.byte_seq();
        match self.root {
            None => (CartTree::empty(), false),
            Some(root) => match root {
                ChildPtr::Leaf(_) => {
                    let l = root.as_leaf().unwrap();
                    if !l.contains(id) {
                        (self.clone_ref(), false)
                    } else if l.count() == 1 {
                        (CartTree::empty(), true)
                    } else {
                        let nl = leaf_with_removed(ctx.pool, l, id, ctx.weights);
                        (
                            CartTree {
                                root: Some(ChildPtr::Leaf(nl)),
                                len: self.len - 1,
                            },
                            true,
                        )
                    }
                }
                ChildPtr::Inner(_) => match remove_from_node(root, bytes, id, 0, ctx) {
                    RemoveOutcome::NotFound => (self.clone_ref(), false),
                    RemoveOutcome::Replaced(r) => (
                        CartTree {
                            root: Some(r),
                            len: self.len - 1,
                        },
                        true,
                    ),
                    RemoveOutcome::Emptied => (CartTree::empty(), true),
                },
            },
        }
    }

    /// Entries common to `a` and `b`, ascending. `Auto` merges when the
    /// larger/smaller cardinality ratio is below `ratio_threshold` and
    /// probes otherwise; the forced strategies exist for equivalence tests.
    pub fn intersect(
        a: &CartTree,
        b: &CartTree,
        ratio_threshold: u32,
        strategy: IntersectStrategy,
    ) -> Vec<VertexId> {
        let (small, large) = if a.len <= b.len { (a, b) } else { (b, a) };
        if small.len == 0 {
            return Vec::new();
        }
        let strategy = match strategy {
            IntersectStrategy::Auto => {
                if large.len < small.len * ratio_threshold as u64 {
                    IntersectStrategy::Merge
                } else {
                    IntersectStrategy::Probe
                }
            }
            s => s,
        };
        let mut out = Vec::new();
        match strategy {
            IntersectStrategy::Merge => {
                let mut ca = small.cursor();
                let mut cb = large.cursor();
                let mut x = ca.next();
                let mut y = cb.next();
                while let (Some((ia, _)), Some((ib, _))) = (x, y) {
                    match ia.cmp(&ib) {
                        std::cmp::Ordering::Less => x = ca.next(),
                        std::cmp::Ordering::Greater => y = cb.next(),
                        std::cmp::Ordering::Equal => {
                            out.push(VertexId(ia));
                            x = ca.next();
                            y = cb.next();
                        }
                    }
                }
            }
            IntersectStrategy::Probe => {
                let mut cur = small.cursor();
                while let Some((id, _)) = cur.next() {
                    if large.search(VertexId(id)).is_some() {
                        out.push(VertexId(id));
                    }
                }
            }
            IntersectStrategy::Auto => unreachable!(),
        }
        out
    }

    /// Entries stored divided by total leaf slots (`leaves × B`).
    pub fn filling_ratio(&self, leaf_cap: u32) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let s = self.stats();
        Some(s.entries as f64 / (s.leaves as f64 * leaf_cap as f64))
    }

    pub fn stats(&self) -> CartStats {
        let mut s = CartStats::default();
        if let Some(r) = self.root {
            collect_stats(r, &mut s);
        }
        s
    }

    /// Build a tree from ascending `(id, weight)` entries.
    pub fn from_sorted(entries: &[(u32, Option<u32>)], ctx: &CartCtx) -> CartTree {
        if entries.is_empty() {
            return CartTree::empty();
        }
        if entries.len() as u32 <= ctx.leaf_cap {
            let l = alloc_leaf(ctx.pool, 0, entries, ctx.weights);
            return CartTree {
                root: Some(ChildPtr::Leaf(l)),
                len: entries.len() as u64,
            };
        }
        let mut t = CartTree::empty();
        for (id, w) in entries {
            let (next, added) = t.insert(VertexId(*id), *w, ctx);
            debug_assert!(added);
            t.release(ctx.pool);
            t = next;
        }
        t
    }
}

fn collect_stats(p: ChildPtr, s: &mut CartStats) {
    match p {
        ChildPtr::Leaf(_) => {
            let l = p.as_leaf().unwrap();
            s.leaves += 1;
            s.entries += l.count() as u64;
            if l.is_bitmap() {
                s.bitmap_leaves += 1;
            }
            s.heap_bytes += l.byte_size() as u64;
        }
        ChildPtr::Inner(_) => {
            let n = p.as_inner().unwrap();
            s.inner_nodes += 1;
            s.heap_bytes += n.byte_size() as u64;
            let mut prev: Option<ChildPtr> = None;
            for (_, c) in n.children.iter() {
                if prev == Some(c) {
                    continue; // alias keys share one leaf
                }
                prev = Some(c);
                collect_stats(c, s);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// insertion

/// Insert into the subtree rooted at `ptr` (an inner node). `None` means the
/// member already exists and nothing changed; otherwise the returned pointer
/// is the copied replacement subtree (one owned reference).
fn insert_into_node(
    ptr: ChildPtr,
    bytes: [u8; KEY_WIDTH],
    id: u32,
    weight: Option<u32>,
    ctx: &CartCtx,
) -> Option<ChildPtr> {
    let n = ptr.as_inner().unwrap();
    // path-compressed prefix check
    for j in 0..n.depth as usize {
        if bytes[j] != n.prefix[j] {
            // diverges above this node: new branch node holding both
            let nl = alloc_leaf(ctx.pool, j as u8, &[(id, weight)], ctx.weights);
            ptr.retain();
            let mut pairs = [(n.prefix[j], ptr), (bytes[j], ChildPtr::Leaf(nl))];
            pairs.sort_by_key(|(k, _)| *k);
            return Some(ChildPtr::Inner(alloc_inner(
                ctx.pool, j as u8, bytes, &pairs,
            )));
        }
    }
    let depth = n.depth as usize;
    let c = bytes[depth];
    match n.children.get(c) {
        Some(child @ ChildPtr::Inner(_)) => {
            let new_child = insert_into_node(child, bytes, id, weight, ctx)?;
            let mut edit = EditPairs::from_node(n);
            edit.set(c, new_child, ctx.pool);
            new_child.release(ctx.pool);
            Some(edit.build(ctx.pool, n.depth, n.prefix))
        }
        Some(child @ ChildPtr::Leaf(_)) => {
            let l = child.as_leaf().unwrap();
            if l.contains(id) {
                return None;
            }
            let mut edit = EditPairs::from_node(n);
            if l.count() < ctx.leaf_cap {
                let nl = ChildPtr::Leaf(leaf_with_inserted(ctx.pool, l, id, weight, ctx.weights));
                edit.replace_all(child, nl, ctx.pool);
                nl.release(ctx.pool);
            } else if edit.alias_count(child) >= 2 {
                split_shared_leaf(&mut edit, child, c, (id, weight), depth, ctx);
            } else {
                // single key: re-expand under the leaf's own common prefix
                let sub = split_full_leaf(l, Some((id, weight)), bytes, ctx);
                edit.set(c, sub, ctx.pool);
                sub.release(ctx.pool);
            }
            Some(edit.build(ctx.pool, n.depth, n.prefix))
        }
        None => {
            // join the adjacent sibling leaf when there is one, keeping
            // leaves densely shared across neighboring keys
            let target = pred_child(&n.children, c)
                .filter(|(_, p)| p.is_leaf())
                .or_else(|| n.children.next_after(c as i16).filter(|(_, p)| p.is_leaf()));
            let mut edit = EditPairs::from_node(n);
            match target {
                Some((_, t)) if t.as_leaf().unwrap().count() < ctx.leaf_cap => {
                    let l = t.as_leaf().unwrap();
                    let nl =
                        ChildPtr::Leaf(leaf_with_inserted(ctx.pool, l, id, weight, ctx.weights));
                    edit.replace_all(t, nl, ctx.pool);
                    edit.set(c, nl, ctx.pool);
                    nl.release(ctx.pool);
                }
                Some((_, t)) => {
                    split_shared_leaf(&mut edit, t, c, (id, weight), depth, ctx);
                }
                None => {
                    let nl =
                        ChildPtr::Leaf(alloc_leaf(ctx.pool, n.depth, &[(id, weight)], ctx.weights));
                    edit.set(c, nl, ctx.pool);
                    nl.release(ctx.pool);
                    merge_underfull(&mut edit, nl, ctx);
                }
            }
            Some(edit.build(ctx.pool, n.depth, n.prefix))
        }
    }
}

/// Split a full leaf shared by the keys of the edited node (or gaining a new
/// key `c`) into two leaves at the first key-group boundary where the
/// cumulative entry count reaches half the capacity, with the new entry
/// placed on its side.
fn split_shared_leaf(
    edit: &mut EditPairs,
    old: ChildPtr,
    c: u8,
    new_entry: (u32, Option<u32>),
    depth: usize,
    ctx: &CartCtx,
) {
    let l = old.as_leaf().unwrap();
    let mut entries = l.entries();
    let pos = entries
        .binary_search_by_key(&new_entry.0, |e| e.0)
        .unwrap_err();
    entries.insert(pos, new_entry);
    let (le, re) = split_by_group(entries, depth, ctx.leaf_cap);
    let right_first = byte_at(re[0].0, depth);
    let left = ChildPtr::Leaf(alloc_leaf(ctx.pool, depth as u8, &le, ctx.weights));
    let right = ChildPtr::Leaf(alloc_leaf(ctx.pool, depth as u8, &re, ctx.weights));
    let mut keys: Vec<u8> = edit
        .pairs()
        .iter()
        .filter(|(_, p)| *p == old)
        .map(|(k, _)| *k)
        .collect();
    if !keys.contains(&c) {
        keys.push(c);
    }
    for k in keys {
        edit.set(k, if k < right_first { left } else { right }, ctx.pool);
    }
    left.release(ctx.pool);
    right.release(ctx.pool);
    merge_underfull(edit, left, ctx);
    merge_underfull(edit, right, ctx);
}

/// Case of a full leaf referenced by a single key (or the root handle):
/// create an internal node over the entries' own longest common prefix and
/// split beneath it. `extra` is the incoming entry; when it diverges from
/// that prefix the regular insert walks the fresh subtree instead.
fn split_full_leaf(
    l: &LeafSegment,
    extra: Option<(u32, Option<u32>)>,
    bytes: [u8; KEY_WIDTH],
    ctx: &CartCtx,
) -> ChildPtr {
    let mut entries = l.entries();
    let first = entries[0].0;
    let last = entries[entries.len() - 1].0;
    let lcp = lcp_len_of(first, last);
    debug_assert!(lcp >= l.lcp_len);
    let mut deferred = None;
    if let Some((id, w)) = extra {
        if shares_prefix(id, first, lcp) {
            let pos = entries.binary_search_by_key(&id, |e| e.0).unwrap_err();
            entries.insert(pos, (id, w));
        } else {
            deferred = Some((id, w));
        }
    }
    let (le, re) = split_by_group(entries, lcp as usize, ctx.leaf_cap);
    let left = ChildPtr::Leaf(alloc_leaf(ctx.pool, lcp, &le, ctx.weights));
    let right = ChildPtr::Leaf(alloc_leaf(ctx.pool, lcp, &re, ctx.weights));
    let mut pairs: Vec<(u8, ChildPtr)> = Vec::new();
    for (side_entries, side) in [(&le, left), (&re, right)] {
        let mut prev: Option<u8> = None;
        for (eid, _) in side_entries.iter() {
            let g = byte_at(*eid, lcp as usize);
            if prev != Some(g) {
                side.retain();
                pairs.push((g, side));
                prev = Some(g);
            }
        }
    }
    left.release(ctx.pool);
    right.release(ctx.pool);
    let node = ChildPtr::Inner(alloc_inner(ctx.pool, lcp, first.to_be_bytes(), &pairs));
    match deferred {
        None => node,
        Some((id, w)) => {
            let wrapped = insert_into_node(node, bytes, id, w, ctx)
                .expect("fresh subtree cannot already contain the entry");
            node.release(ctx.pool);
            wrapped
        }
    }
}

/// One leaf entry: a full vertex ID with its optional weight.
type Entry = (u32, Option<u32>);

/// Split sorted entries at the first boundary between byte groups (at
/// position `pos`) where the cumulative count reaches `cap / 2`; falls back
/// to the last interior boundary when every one lies earlier.
fn split_by_group(mut entries: Vec<Entry>, pos: usize, cap: u32) -> (Vec<Entry>, Vec<Entry>) {
    let half = (cap / 2) as usize;
    let mut cut = None;
    let mut last_interior = None;
    for i in 1..entries.len() {
        if byte_at(entries[i - 1].0, pos) != byte_at(entries[i].0, pos) {
            last_interior = Some(i);
            if i >= half {
                cut = Some(i);
                break;
            }
        }
    }
    let cut = cut
        .or(last_interior)
        .expect("leaf spans at least two byte groups");
    let right = entries.split_off(cut);
    (entries, right)
}

/// Largest key strictly below `c` with its child.
fn pred_child(children: &Children, c: u8) -> Option<(u8, ChildPtr)> {
    let mut out = None;
    for (k, p) in children.iter() {
        if k >= c {
            break;
        }
        out = Some((k, p));
    }
    out
}

/// While the given leaf holds fewer than `B/2` entries, merge it with an
/// adjacent sibling leaf whenever the combined count stays within `B`.
fn merge_underfull(edit: &mut EditPairs, mut target: ChildPtr, ctx: &CartCtx) {
    let half = ctx.leaf_cap / 2;
    loop {
        let l = match target.as_leaf() {
            Some(l) => l,
            None => return,
        };
        if l.count() >= half {
            return;
        }
        let (s, e) = edit.alias_range(target);
        let pick = |idx: usize| -> Option<ChildPtr> {
            let p = edit.pairs()[idx].1;
            let sib = p.as_leaf()?;
            (sib.count() + l.count() <= ctx.leaf_cap).then_some(p)
        };
        let sib = if s > 0 { pick(s - 1) } else { None };
        let sib = sib.or_else(|| if e < edit.len() { pick(e) } else { None });
        let sib = match sib {
            Some(p) => p,
            None => return,
        };
        let merged = ChildPtr::Leaf(leaf_merge(ctx.pool, sib.as_leaf().unwrap(), l, ctx.weights));
        edit.replace_all(sib, merged, ctx.pool);
        edit.replace_all(target, merged, ctx.pool);
        merged.release(ctx.pool);
        target = merged;
    }
}

// ---------------------------------------------------------------------------
// deletion

enum RemoveOutcome {
    NotFound,
    Replaced(ChildPtr),
    Emptied,
}

fn remove_from_node(
    ptr: ChildPtr,
    bytes: [u8; KEY_WIDTH],
    id: u32,
    slot_depth: u8,
    ctx: &CartCtx,
) -> RemoveOutcome {
    let n = ptr.as_inner().unwrap();
    if !shares_prefix(id, u32::from_be_bytes(n.prefix), n.depth) {
        return RemoveOutcome::NotFound;
    }
    let depth = n.depth as usize;
    let c = bytes[depth];
    let child = match n.children.get(c) {
        Some(p) => p,
        None => return RemoveOutcome::NotFound,
    };
    let edit = match child {
        ChildPtr::Leaf(_) => {
            let l = child.as_leaf().unwrap();
            if !l.contains(id) {
                return RemoveOutcome::NotFound;
            }
            let mut edit = EditPairs::from_node(n);
            if l.count() == 1 {
                edit.remove_key(c, ctx.pool);
                merge_new_neighbors(&mut edit, c, ctx);
            } else {
                let nl = ChildPtr::Leaf(leaf_with_removed(ctx.pool, l, id, ctx.weights));
                edit.replace_all(child, nl, ctx.pool);
                nl.release(ctx.pool);
                if !nl.as_leaf().unwrap().has_group(depth, c) {
                    edit.remove_key(c, ctx.pool);
                }
                merge_underfull(&mut edit, nl, ctx);
            }
            edit
        }
        ChildPtr::Inner(_) => match remove_from_node(child, bytes, id, n.depth, ctx) {
            RemoveOutcome::NotFound => return RemoveOutcome::NotFound,
            RemoveOutcome::Replaced(p) => {
                let mut edit = EditPairs::from_node(n);
                edit.set(c, p, ctx.pool);
                p.release(ctx.pool);
                if p.is_leaf() {
                    merge_underfull(&mut edit, p, ctx);
                }
                edit
            }
            RemoveOutcome::Emptied => {
                let mut edit = EditPairs::from_node(n);
                edit.remove_key(c, ctx.pool);
                merge_new_neighbors(&mut edit, c, ctx);
                edit
            }
        },
    };
    // lazy-expansion collapse: a node whose keys all reach one child folds away
    if edit.len() == 0 {
        edit.discard(ctx.pool);
        return RemoveOutcome::Emptied;
    }
    let first = edit.pairs()[0].1;
    if edit.pairs().iter().all(|(_, p)| *p == first) {
        let out = match first {
            ChildPtr::Inner(_) => {
                debug_assert_eq!(edit.len(), 1);
                first.retain();
                first
            }
            ChildPtr::Leaf(_) => ChildPtr::Leaf(leaf_rebased(
                ctx.pool,
                first.as_leaf().unwrap(),
                slot_depth,
                ctx.weights,
            )),
        };
        edit.discard(ctx.pool);
        return RemoveOutcome::Replaced(out);
    }
    RemoveOutcome::Replaced(edit.build(ctx.pool, n.depth, n.prefix))
}

/// After removing key `c`, leaves on either side of the gap become adjacent;
/// give each a merge chance.
fn merge_new_neighbors(edit: &mut EditPairs, c: u8, ctx: &CartCtx) {
    let sides: Vec<ChildPtr> = [
        edit.pairs()
            .iter()
            .rev()
            .find(|(k, _)| *k < c)
            .map(|(_, p)| *p),
        edit.pairs().iter().find(|(k, _)| *k > c).map(|(_, p)| *p),
    ]
    .into_iter()
    .flatten()
    .collect();
    for side in sides {
        // the first merge may have consumed the second side already
        if side.is_leaf() && edit.contains_ptr(side) {
            merge_underfull(edit, side, ctx);
        }
    }
}

// ---------------------------------------------------------------------------
// cursor

enum LeafPos {
    Sorted { rank: u32 },
    Bitmap { last: i16, rank: u32 },
}

struct Frame<'a> {
    node: &'a InnerNode,
    last_key: i16,
    last_ptr: Option<ChildPtr>,
}

/// Streaming in-order iterator over one tree version.
pub struct CartCursor<'a> {
    stack: Vec<Frame<'a>>,
    leaf: Option<(&'a LeafSegment, LeafPos)>,
}

impl<'a> CartCursor<'a> {
    fn new(tree: &'a CartTree) -> CartCursor<'a> {
        let mut cur = CartCursor {
            stack: Vec::new(),
            leaf: None,
        };
        match tree.root {
            None => {}
            Some(p) => cur.descend(p),
        }
        cur
    }

    fn descend(&mut self, p: ChildPtr) {
        match p {
            ChildPtr::Leaf(q) => {
                let l: &'a LeafSegment = unsafe { q.as_ref() };
                let pos = if l.is_bitmap() {
                    LeafPos::Bitmap { last: -1, rank: 0 }
                } else {
                    LeafPos::Sorted { rank: 0 }
                };
                self.leaf = Some((l, pos));
            }
            ChildPtr::Inner(q) => {
                let n: &'a InnerNode = unsafe { q.as_ref() };
                self.stack.push(Frame {
                    node: n,
                    last_key: -1,
                    last_ptr: None,
                });
            }
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Option<(u32, Option<u32>)> {
        loop {
            if let Some((l, pos)) = &mut self.leaf {
                match pos {
                    LeafPos::Sorted { rank } => {
                        if *rank < l.count() {
                            let out = (l.entry_id(*rank), l.weight_at(*rank));
                            *rank += 1;
                            return Some(out);
                        }
                    }
                    LeafPos::Bitmap { last, rank } => {
                        if let leaf::LeafBody::Bitmap { bits, .. } = &l.body {
                            if let Some(b) = bits::next_one(bits, *last) {
                                let base = u32::from_be_bytes(l.lcp) & !0xFF;
                                let out = (base | b as u32, l.weight_at(*rank));
                                *last = b as i16;
                                *rank += 1;
                                return Some(out);
                            }
                        }
                    }
                }
                self.leaf = None;
            }
            let frame = self.stack.last_mut()?;
            match frame.node.children.next_after(frame.last_key) {
                None => {
                    self.stack.pop();
                }
                Some((k, p)) => {
                    frame.last_key = k as i16;
                    if frame.last_ptr == Some(p) {
                        continue; // alias of the leaf just visited
                    }
                    frame.last_ptr = Some(p);
                    self.descend(p);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// structure validation (test support)

#[doc(hidden)]
pub mod validate {
    use super::*;
    use std::collections::HashMap;

    fn ptr_key(p: ChildPtr) -> (usize, bool) {
        match p {
            ChildPtr::Inner(q) => (q.as_ptr() as usize, false),
            ChildPtr::Leaf(q) => (q.as_ptr() as usize, true),
        }
    }

    /// Walk one subtree checking every structural invariant; returns the
    /// entry total.
    fn check_subtree(p: ChildPtr, slot_depth: u8, prefix: &[u8], cap: u32) -> u64 {
        match p {
            ChildPtr::Leaf(_) => {
                let l = p.as_leaf().unwrap();
                assert_eq!(
                    l.lcp_len, slot_depth,
                    "leaf lcp length equals its slot depth"
                );
                let n = l.count();
                assert!(n >= 1 && n <= cap, "leaf count {} within [1, {}]", n, cap);
                assert_eq!(l.is_bitmap(), l.lcp_len == 3, "bitmap exactly at depth 3");
                let entries = l.entries();
                assert!(
                    entries.windows(2).all(|w| w[0].0 < w[1].0),
                    "leaf ascending"
                );
                for (id, _) in &entries {
                    assert!(
                        id.to_be_bytes().starts_with(prefix),
                        "leaf entries under node prefix"
                    );
                }
                n as u64
            }
            ChildPtr::Inner(_) => {
                let node = p.as_inner().unwrap();
                assert!(node.depth < 4);
                assert!(node.depth as usize >= prefix.len());
                assert!(
                    node.prefix_slice().starts_with(prefix),
                    "prefix extends parent path"
                );
                let pairs: Vec<(u8, ChildPtr)> = node.children.iter().collect();
                let kc = pairs.len();
                assert_eq!(kc, node.children.key_count());
                assert!(kc >= 1);
                let fits = match &node.children {
                    Children::N4 { .. } => kc <= 4,
                    Children::N16 { .. } => kc > 4 && kc <= 16,
                    Children::N48 { .. } => kc > 16 && kc <= 48,
                    Children::N256 { .. } => kc > 48,
                };
                assert!(fits, "node kind is the smallest that fits {} keys", kc);
                assert!(node.children.bitmap_consistent(), "N256 presence bitmap");
                assert!(pairs.windows(2).all(|w| w[0].0 < w[1].0), "keys ascending");
                // alias groups are contiguous and leaves match their keys
                let mut total = 0u64;
                let mut i = 0;
                let mut seen: Vec<ChildPtr> = Vec::new();
                let mut groups: Vec<(ChildPtr, Vec<u8>)> = Vec::new();
                while i < kc {
                    let (k, cp) = pairs[i];
                    let mut keys = vec![k];
                    let mut j = i + 1;
                    while j < kc && pairs[j].1 == cp {
                        keys.push(pairs[j].0);
                        j += 1;
                    }
                    assert!(!seen.contains(&cp), "aliases of one child are contiguous");
                    seen.push(cp);
                    groups.push((cp, keys));
                    i = j;
                }
                for (cp, keys) in &groups {
                    match cp {
                        ChildPtr::Leaf(_) => {
                            let l = cp.as_leaf().unwrap();
                            // key set == set of entry bytes at this depth
                            let mut bytes_present: Vec<u8> = l
                                .entries()
                                .iter()
                                .map(|(id, _)| id.to_be_bytes()[node.depth as usize])
                                .collect();
                            bytes_present.dedup();
                            assert_eq!(&bytes_present, keys, "leaf groups match alias keys");
                            total += check_subtree(*cp, node.depth, node.prefix_slice(), cap);
                        }
                        ChildPtr::Inner(_) => {
                            assert_eq!(keys.len(), 1, "inner children are never aliased");
                            let child = cp.as_inner().unwrap();
                            assert!(child.depth > node.depth);
                            assert_eq!(
                                child.prefix[node.depth as usize], keys[0],
                                "child prefix carries its key byte"
                            );
                            let mut pfx = node.prefix_slice().to_vec();
                            pfx.push(keys[0]);
                            total += check_subtree(*cp, node.depth, &pfx, cap);
                        }
                    }
                }
                // no two adjacent sibling leaves may both be mergeable-small
                for w in groups.windows(2) {
                    if let (Some(a), Some(b)) = (w[0].0.as_leaf(), w[1].0.as_leaf()) {
                        let small = |l: &LeafSegment| l.count() < cap / 2;
                        assert!(
                            !(small(a) && small(b) && a.count() + b.count() <= cap),
                            "adjacent underfull sibling leaves left unmerged"
                        );
                    }
                }
                total
            }
        }
    }

    /// Full structural validation of one tree.
    pub fn check_tree(t: &CartTree, cap: u32) {
        match t.root {
            None => assert_eq!(t.len(), 0),
            Some(p) => {
                if let Some(l) = p.as_leaf() {
                    assert_eq!(l.lcp_len, 0, "root leaf has empty lcp");
                }
                let total = check_subtree(p, 0, &[], cap);
                assert_eq!(total, t.len(), "cached cardinality matches entries");
            }
        }
        // scans come out strictly ascending
        let mut prev = None;
        t.scan(|v, _| {
            assert!(prev.is_none_or(|p| p < v.0), "scan ascending");
            prev = Some(v.0);
        });
    }

    /// Refcount conservation across a forest of live roots: every reachable
    /// node's reference count equals its in-degree (root handles plus key
    /// slots, aliases counted per slot).
    pub fn check_refcounts(trees: &[&CartTree]) {
        let mut map: HashMap<(usize, bool), (u64, ChildPtr)> = HashMap::new();
        for t in trees {
            if let Some(r) = t.root {
                in_degrees_rooted(r, &mut map);
            }
        }
        for ((_, _), (deg, p)) in &map {
            let rc = match p {
                ChildPtr::Inner(q) => unsafe { q.as_ref() }
                    .refcount
                    .load(std::sync::atomic::Ordering::Acquire),
                ChildPtr::Leaf(q) => unsafe { q.as_ref() }
                    .refcount
                    .load(std::sync::atomic::Ordering::Acquire),
            } as u64;
            assert_eq!(rc, *deg, "refcount equals in-degree");
        }
    }

    fn in_degrees_rooted(p: ChildPtr, map: &mut HashMap<(usize, bool), (u64, ChildPtr)>) {
        let first_visit = {
            let e = map.entry(ptr_key(p)).or_insert((0, p));
            e.0 += 1;
            e.0 == 1
        };
        if !first_visit {
            return;
        }
        if let Some(n) = p.as_inner() {
            for (_, c) in n.children.iter() {
                in_degrees_rooted(c, map);
            }
        }
    }
}
