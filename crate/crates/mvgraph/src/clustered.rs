//! Clustered index: a copy-on-write B+-tree keyed by `(src, dst)` edge
//! pairs, holding the neighbor sets of all low-degree vertices of one
//! subgraph contiguously in key order. Mutation duplicates the root-to-leaf
//! path and shares the rest, with the same per-pointer reference counting
//! discipline as the radix tree.

use std::ptr::NonNull;
use std::sync::atomic::{fence, AtomicU32, Ordering};

use crate::pool::{MemPool, ObjClass};
use crate::types::VertexId;

/// Composite edge key ordered by `(src, dst)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct CiKey {
    pub src: u32,
    pub dst: u32,
}

impl CiKey {
    pub fn new(src: VertexId, dst: VertexId) -> CiKey {
        CiKey {
            src: src.0,
            dst: dst.0,
        }
    }
}

#[derive(Clone, Copy)]
pub struct CiCtx<'a> {
    pub pool: &'a MemPool,
    pub leaf_fanout: usize,
    pub internal_fanout: usize,
    pub weights: bool,
}

pub struct CiNode {
    refcount: AtomicU32,
    body: CiBody,
}

enum CiBody {
    /// `keys[i]` is the smallest key reachable under `children[i]`.
    Internal {
        keys: Vec<CiKey>,
        children: Vec<CiPtr>,
    },
    Leaf {
        entries: Vec<(CiKey, u32)>,
    },
}

/// Owned handle to a node (one reference per stored copy).
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct CiPtr(NonNull<CiNode>);

unsafe impl Send for CiPtr {}
unsafe impl Sync for CiPtr {}

impl CiPtr {
    #[inline]
    fn node(&self) -> &CiNode {
        unsafe { self.0.as_ref() }
    }

    fn retain(&self) {
        let prev = self.node().refcount.fetch_add(1, Ordering::Relaxed);
        assert!(prev > 0, "retain of a reclaimed node");
    }

    fn release(self, pool: &MemPool) {
        let prev = self.node().refcount.fetch_sub(1, Ordering::Release);
        assert!(prev > 0, "release without a matching reference");
        if prev != 1 {
            return;
        }
        fence(Ordering::Acquire);
        if let CiBody::Internal { children, .. } = &self.node().body {
            let kids: Vec<CiPtr> = children.clone();
            for k in kids {
                k.release(pool);
            }
        }
        unsafe { pool.dealloc(ObjClass::CiNode, self.0) };
    }
}

fn alloc_node(pool: &MemPool, body: CiBody) -> CiPtr {
    CiPtr(pool.alloc(
        ObjClass::CiNode,
        CiNode {
            refcount: AtomicU32::new(1),
            body,
        },
    ))
}

/// Smallest key stored under `p`.
fn subtree_min(p: CiPtr) -> CiKey {
    match &p.node().body {
        CiBody::Leaf { entries } => entries[0].0,
        CiBody::Internal { keys, .. } => keys[0],
    }
}

/// Handle to one immutable index version.
pub struct CiTree {
    root: Option<CiPtr>,
    len: u64,
}

impl CiTree {
    pub fn empty() -> CiTree {
        CiTree { root: None, len: 0 }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn clone_ref(&self) -> CiTree {
        if let Some(r) = self.root {
            r.retain();
        }
        CiTree {
            root: self.root,
            len: self.len,
        }
    }

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

    pub fn search(&self, key: CiKey, weights: bool) -> Option<Option<u32>> {
        let mut cur = self.root?;
        loop {
            match &cur.node().body {
                CiBody::Leaf { entries } => {
                    return entries
                        .binary_search_by_key(&key, |e| e.0)
                        .ok()
                        .map(|i| weights.then(|| entries[i].1));
                }
                CiBody::Internal { keys, children } => {
                    let idx = match keys.binary_search(&key) {
                        Ok(i) => i,
                        Err(0) => return None, // below the smallest key
                        Err(i) => i - 1,
                    };
                    cur = children[idx];
                }
            }
        }
    }

    /// Visit every `(key, weight)` at or after `start`, ascending, while the
    /// visitor returns `true`.
    pub fn scan_from(
        &self,
        start: CiKey,
        weights: bool,
        mut f: impl FnMut(CiKey, Option<u32>) -> bool,
    ) {
        let root = match self.root {
            Some(r) => r,
            None => return,
        };
        // descend to the leaf covering `start`, keeping the path
        let mut stack: Vec<(CiPtr, usize)> = Vec::new();
        let mut cur = root;
        let leaf_start;
        loop {
            match &cur.node().body {
                CiBody::Internal { keys, children } => {
                    let idx = match keys.binary_search(&start) {
                        Ok(i) => i,
                        Err(0) => 0,
                        Err(i) => i - 1,
                    };
                    stack.push((cur, idx));
                    cur = children[idx];
                }
                CiBody::Leaf { entries } => {
                    leaf_start = match entries.binary_search_by_key(&start, |e| e.0) {
                        Ok(i) => i,
                        Err(i) => i,
                    };
                    break;
                }
            }
        }
        let mut leaf = cur;
        let mut pos = leaf_start;
        loop {
            if let CiBody::Leaf { entries } = &leaf.node().body {
                while pos < entries.len() {
                    let (k, w) = entries[pos];
                    if !f(k, weights.then_some(w)) {
                        return;
                    }
                    pos += 1;
                }
            }
            // advance to the next leaf via the parent stack
            loop {
                match stack.last_mut() {
                    None => return,
                    Some((node, idx)) => {
                        if let CiBody::Internal { children, .. } = &node.node().body {
                            if *idx + 1 < children.len() {
                                *idx += 1;
                                let mut next = children[*idx];
                                while let CiBody::Internal { children, .. } = &next.node().body {
                                    stack.push((next, 0));
                                    next = children[0];
                                }
                                leaf = next;
                                pos = 0;
                                break;
                            }
                        }
                        stack.pop();
                    }
                }
            }
        }
    }

    /// Ascending neighbor scan of one source vertex.
    pub fn scan_src(&self, src: VertexId, weights: bool, mut f: impl FnMut(VertexId, Option<u32>)) {
        self.scan_from(CiKey { src: src.0, dst: 0 }, weights, |k, w| {
            if k.src != src.0 {
                return false;
            }
            f(VertexId(k.dst), w);
            true
        });
    }

    pub fn insert(&self, key: CiKey, weight: Option<u32>, ctx: &CiCtx) -> (CiTree, bool) {
        let w = weight.unwrap_or(0);
        match self.root {
            None => {
                let leaf = alloc_node(
                    ctx.pool,
                    CiBody::Leaf {
                        entries: vec![(key, w)],
                    },
                );
                (
                    CiTree {
                        root: Some(leaf),
                        len: 1,
                    },
                    true,
                )
            }
            Some(root) => match insert_rec(root, key, w, ctx) {
                None => (self.clone_ref(), false),
                Some(InsertResult::One(p)) => (
                    CiTree {
                        root: Some(p),
                        len: self.len + 1,
                    },
                    true,
                ),
                Some(InsertResult::Split(l, rmin, r)) => {
                    let root = alloc_node(
                        ctx.pool,
                        CiBody::Internal {
                            keys: vec![subtree_min(l), rmin],
                            children: vec![l, r],
                        },
                    );
                    (
                        CiTree {
                            root: Some(root),
                            len: self.len + 1,
                        },
                        true,
                    )
                }
            },
        }
    }

    pub fn remove(&self, key: CiKey, ctx: &CiCtx) -> (CiTree, bool) {
        match self.root {
            None => (CiTree::empty(), false),
            Some(root) => match remove_rec(root, key, ctx) {
                None => (self.clone_ref(), false),
                Some(p) => {
                    let node = p.node();
                    match &node.body {
                        CiBody::Leaf { entries } if entries.is_empty() => {
                            p.release(ctx.pool);
                            (CiTree { root: None, len: 0 }, true)
                        }
                        CiBody::Internal { children, .. } if children.len() == 1 => {
                            let child = children[0];
                            child.retain();
                            p.release(ctx.pool);
                            (
                                CiTree {
                                    root: Some(child),
                                    len: self.len - 1,
                                },
                                true,
                            )
                        }
                        _ => (
                            CiTree {
                                root: Some(p),
                                len: self.len - 1,
                            },
                            true,
                        ),
                    }
                }
            },
        }
    }

    /// Remove and return the whole neighbor set of `src` (ascending), as one
    /// copy-on-write step sequence; the original tree is untouched.
    pub fn extract_src(&self, src: VertexId, ctx: &CiCtx) -> (Vec<(u32, Option<u32>)>, CiTree) {
        let mut out = Vec::new();
        self.scan_src(src, ctx.weights, |dst, w| out.push((dst.0, w)));
        let mut t = self.clone_ref();
        for (dst, _) in &out {
            let (t2, removed) = t.remove(
                CiKey {
                    src: src.0,
                    dst: *dst,
                },
                ctx,
            );
            debug_assert!(removed);
            t.release(ctx.pool);
            t = t2;
        }
        (out, t)
    }

    /// Walk every entry with its physical position `(leaf, offset)`.
    pub(crate) fn for_each_entry_pos(&self, mut f: impl FnMut(CiKey, CiPtr, u32)) {
        fn walk(p: CiPtr, f: &mut impl FnMut(CiKey, CiPtr, u32)) {
            match &p.node().body {
                CiBody::Leaf { entries } => {
                    for (i, (k, _)) in entries.iter().enumerate() {
                        f(*k, p, i as u32);
                    }
                }
                CiBody::Internal { children, .. } => {
                    for c in children {
                        walk(*c, f);
                    }
                }
            }
        }
        if let Some(r) = self.root {
            walk(r, &mut f);
        }
    }

    /// Scan a leaf from `offset`, returning `false` from the visitor to stop;
    /// returns whether the run ended inside the leaf (true) or hit its end.
    pub(crate) fn scan_leaf_run(
        leaf: CiPtr,
        offset: u32,
        weights: bool,
        f: &mut impl FnMut(CiKey, Option<u32>) -> bool,
    ) -> bool {
        if let CiBody::Leaf { entries } = &leaf.node().body {
            for (k, w) in entries.iter().skip(offset as usize) {
                if !f(*k, weights.then_some(*w)) {
                    return true;
                }
            }
        }
        false
    }

    pub fn node_count(&self) -> u64 {
        fn count(p: CiPtr) -> u64 {
            match &p.node().body {
                CiBody::Leaf { .. } => 1,
                CiBody::Internal { children, .. } => {
                    1 + children.iter().map(|c| count(*c)).sum::<u64>()
                }
            }
        }
        self.root.map_or(0, count)
    }

    pub fn depth(&self) -> usize {
        let mut d = 0;
        let mut cur = self.root;
        while let Some(p) = cur {
            d += 1;
            cur = match &p.node().body {
                CiBody::Internal { children, .. } => Some(children[0]),
                CiBody::Leaf { .. } => None,
            };
        }
        d
    }

    pub fn heap_bytes(&self) -> u64 {
        fn walk(p: CiPtr) -> u64 {
            let own = std::mem::size_of::<CiNode>() as u64
                + match &p.node().body {
                    CiBody::Leaf { entries } => (entries.capacity() * 12) as u64,
                    CiBody::Internal { keys, children } => {
                        (keys.capacity() * 8 + children.capacity() * 8) as u64
                    }
                };
            match &p.node().body {
                CiBody::Leaf { .. } => own,
                CiBody::Internal { children, .. } => {
                    own + children.iter().map(|c| walk(*c)).sum::<u64>()
                }
            }
        }
        self.root.map_or(0, walk)
    }
}

enum InsertResult {
    One(CiPtr),
    Split(CiPtr, CiKey, CiPtr),
}

fn min_occupancy(fanout: usize) -> usize {
    fanout.div_ceil(2)
}

fn insert_rec(p: CiPtr, key: CiKey, w: u32, ctx: &CiCtx) -> Option<InsertResult> {
    match &p.node().body {
        CiBody::Leaf { entries } => {
            let pos = match entries.binary_search_by_key(&key, |e| e.0) {
                Ok(_) => return None, // duplicate edge
                Err(i) => i,
            };
            let mut new = entries.clone();
            new.insert(pos, (key, w));
            if new.len() <= ctx.leaf_fanout {
                Some(InsertResult::One(alloc_node(
                    ctx.pool,
                    CiBody::Leaf { entries: new },
                )))
            } else {
                let right = new.split_off(new.len() / 2);
                let rmin = right[0].0;
                let l = alloc_node(ctx.pool, CiBody::Leaf { entries: new });
                let r = alloc_node(ctx.pool, CiBody::Leaf { entries: right });
                Some(InsertResult::Split(l, rmin, r))
            }
        }
        CiBody::Internal { keys, children } => {
            let idx = match keys.binary_search(&key) {
                Ok(i) => i,
                Err(0) => 0, // new smallest key goes through the first child
                Err(i) => i - 1,
            };
            let res = insert_rec(children[idx], key, w, ctx)?;
            let mut nkeys = keys.clone();
            let mut nchildren: Vec<CiPtr> = children.clone();
            for (i, c) in nchildren.iter().enumerate() {
                if i != idx {
                    c.retain();
                }
            }
            match res {
                InsertResult::One(c) => {
                    nchildren[idx] = c;
                    nkeys[idx] = subtree_min(c);
                }
                InsertResult::Split(l, rmin, r) => {
                    nchildren[idx] = l;
                    nkeys[idx] = subtree_min(l);
                    nchildren.insert(idx + 1, r);
                    nkeys.insert(idx + 1, rmin);
                }
            }
            if nchildren.len() <= ctx.internal_fanout {
                Some(InsertResult::One(alloc_node(
                    ctx.pool,
                    CiBody::Internal {
                        keys: nkeys,
                        children: nchildren,
                    },
                )))
            } else {
                let half = nchildren.len() / 2;
                let rkeys = nkeys.split_off(half);
                let rchildren = nchildren.split_off(half);
                let rmin = rkeys[0];
                let l = alloc_node(
                    ctx.pool,
                    CiBody::Internal {
                        keys: nkeys,
                        children: nchildren,
                    },
                );
                let r = alloc_node(
                    ctx.pool,
                    CiBody::Internal {
                        keys: rkeys,
                        children: rchildren,
                    },
                );
                Some(InsertResult::Split(l, rmin, r))
            }
        }
    }
}

/// Copy-on-write removal; `None` when the key is absent. The returned node
/// may be under-occupied only when it is about to become the root.
fn remove_rec(p: CiPtr, key: CiKey, ctx: &CiCtx) -> Option<CiPtr> {
    match &p.node().body {
        CiBody::Leaf { entries } => {
            let pos = entries.binary_search_by_key(&key, |e| e.0).ok()?;
            let mut new = entries.clone();
            new.remove(pos);
            Some(alloc_node(ctx.pool, CiBody::Leaf { entries: new }))
        }
        CiBody::Internal { keys, children } => {
            let idx = match keys.binary_search(&key) {
                Ok(i) => i,
                Err(0) => return None,
                Err(i) => i - 1,
            };
            let nc = remove_rec(children[idx], key, ctx)?;
            let mut nkeys = keys.clone();
            let mut nchildren: Vec<CiPtr> = children.clone();
            for (i, c) in nchildren.iter().enumerate() {
                if i != idx {
                    c.retain();
                }
            }
            nchildren[idx] = nc;
            let empty = match &nc.node().body {
                CiBody::Leaf { entries } => entries.is_empty(),
                CiBody::Internal { children, .. } => children.is_empty(),
            };
            if empty {
                nc.release(ctx.pool);
                nchildren.remove(idx);
                nkeys.remove(idx);
            } else {
                nkeys[idx] = subtree_min(nc);
                rebalance(&mut nkeys, &mut nchildren, idx, ctx);
            }
            Some(alloc_node(
                ctx.pool,
                CiBody::Internal {
                    keys: nkeys,
                    children: nchildren,
                },
            ))
        }
    }
}

/// Restore occupancy of `children[idx]` by borrowing from or merging with an
/// adjacent sibling. Both touched nodes are rebuilt (they are fresh copies
/// or become ones here), siblings are released from this edit.
fn rebalance(keys: &mut Vec<CiKey>, children: &mut Vec<CiPtr>, idx: usize, ctx: &CiCtx) {
    let (size, min) = {
        let c = children[idx].node();
        match &c.body {
            CiBody::Leaf { entries } => (entries.len(), min_occupancy(ctx.leaf_fanout)),
            CiBody::Internal { children: ch, .. } => (ch.len(), min_occupancy(ctx.internal_fanout)),
        }
    };
    if size >= min || children.len() < 2 {
        return;
    }
    let sib_idx = if idx > 0 { idx - 1 } else { idx + 1 };
    let (li, ri) = if sib_idx < idx {
        (sib_idx, idx)
    } else {
        (idx, sib_idx)
    };
    let left = children[li];
    let right = children[ri];
    match (&left.node().body, &right.node().body) {
        (CiBody::Leaf { entries: le }, CiBody::Leaf { entries: re }) => {
            let mut all: Vec<(CiKey, u32)> = le.clone();
            all.extend(re.iter().copied());
            if all.len() <= ctx.leaf_fanout {
                let merged = alloc_node(ctx.pool, CiBody::Leaf { entries: all });
                splice_merge(keys, children, li, merged, ctx);
            } else {
                let rhalf = all.split_off(all.len() / 2);
                let nl = alloc_node(ctx.pool, CiBody::Leaf { entries: all });
                let nr = alloc_node(ctx.pool, CiBody::Leaf { entries: rhalf });
                splice_borrow(keys, children, li, nl, nr, ctx);
            }
        }
        (
            CiBody::Internal {
                keys: lk,
                children: lc,
            },
            CiBody::Internal {
                keys: rk,
                children: rc,
            },
        ) => {
            let mut ak: Vec<CiKey> = lk.clone();
            ak.extend(rk.iter().copied());
            let mut ac: Vec<CiPtr> = lc.clone();
            ac.extend(rc.iter().copied());
            for c in &ac {
                c.retain();
            }
            if ac.len() <= ctx.internal_fanout {
                let merged = alloc_node(
                    ctx.pool,
                    CiBody::Internal {
                        keys: ak,
                        children: ac,
                    },
                );
                splice_merge(keys, children, li, merged, ctx);
            } else {
                let half = ac.len() / 2;
                let rkeys = ak.split_off(half);
                let rchildren = ac.split_off(half);
                let nl = alloc_node(
                    ctx.pool,
                    CiBody::Internal {
                        keys: ak,
                        children: ac,
                    },
                );
                let nr = alloc_node(
                    ctx.pool,
                    CiBody::Internal {
                        keys: rkeys,
                        children: rchildren,
                    },
                );
                splice_borrow(keys, children, li, nl, nr, ctx);
            }
        }
        _ => unreachable!("siblings at one level share a kind"),
    }
}

fn splice_merge(
    keys: &mut Vec<CiKey>,
    children: &mut Vec<CiPtr>,
    li: usize,
    merged: CiPtr,
    ctx: &CiCtx,
) {
    children[li].release(ctx.pool);
    children[li + 1].release(ctx.pool);
    children[li] = merged;
    keys[li] = subtree_min(merged);
    children.remove(li + 1);
    keys.remove(li + 1);
}

fn splice_borrow(
    keys: &mut [CiKey],
    children: &mut [CiPtr],
    li: usize,
    nl: CiPtr,
    nr: CiPtr,
    ctx: &CiCtx,
) {
    children[li].release(ctx.pool);
    children[li + 1].release(ctx.pool);
    children[li] = nl;
    children[li + 1] = nr;
    keys[li] = subtree_min(nl);
    keys[li + 1] = subtree_min(nr);
}

// ---------------------------------------------------------------------------
// validation (test support)

#[doc(hidden)]
pub mod validate {
    use super::*;
    use std::collections::HashMap;

    fn check_node(p: CiPtr, is_root: bool, depth: usize, ctx: &CiCtx) -> (u64, usize) {
        match &p.node().body {
            CiBody::Leaf { entries } => {
                assert!(!entries.is_empty());
                if !is_root {
                    assert!(
                        entries.len() >= min_occupancy(ctx.leaf_fanout),
                        "leaf occupancy {} >= {}",
                        entries.len(),
                        min_occupancy(ctx.leaf_fanout)
                    );
                }
                assert!(entries.len() <= ctx.leaf_fanout);
                assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
                (entries.len() as u64, depth)
            }
            CiBody::Internal { keys, children } => {
                assert_eq!(keys.len(), children.len());
                assert!(keys.windows(2).all(|w| w[0] < w[1]));
                if is_root {
                    assert!(
                        children.len() >= 2,
                        "internal root has at least two children"
                    );
                } else {
                    assert!(children.len() >= min_occupancy(ctx.internal_fanout));
                }
                assert!(children.len() <= ctx.internal_fanout);
                let mut total = 0;
                let mut d = 0;
                for (i, c) in children.iter().enumerate() {
                    assert_eq!(keys[i], subtree_min(*c), "router key is the child minimum");
                    let (t, cd) = check_node(*c, false, depth + 1, ctx);
                    total += t;
                    if d == 0 {
                        d = cd;
                    } else {
                        assert_eq!(d, cd, "uniform depth");
                    }
                }
                (total, d)
            }
        }
    }

    pub fn check_tree(t: &CiTree, ctx: &CiCtx) {
        match t.root {
            None => assert_eq!(t.len(), 0),
            Some(r) => {
                let (total, _) = check_node(r, true, 1, ctx);
                assert_eq!(total, t.len(), "cached length matches entries");
            }
        }
        let mut prev: Option<CiKey> = None;
        t.scan_from(CiKey { src: 0, dst: 0 }, false, |k, _| {
            assert!(prev.is_none_or(|p| p < k), "global key order");
            prev = Some(k);
            true
        });
    }

    pub fn check_refcounts(trees: &[&CiTree]) {
        let mut deg: HashMap<usize, (u64, CiPtr)> = HashMap::new();
        fn walk(p: CiPtr, deg: &mut HashMap<usize, (u64, CiPtr)>) {
            let e = deg.entry(p.0.as_ptr() as usize).or_insert((0, p));
            e.0 += 1;
            if e.0 > 1 {
                return;
            }
            if let CiBody::Internal { children, .. } = &p.node().body {
                for c in children {
                    walk(*c, deg);
                }
            }
        }
        for t in trees {
            if let Some(r) = t.root {
                walk(r, &mut deg);
            }
        }
        for (d, p) in deg.values() {
            assert_eq!(p.node().refcount.load(Ordering::Acquire) as u64, *d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::validate::{check_refcounts, check_tree};
    use super::*;
    use crate::types::PoolMode;
    use std::collections::BTreeMap;

    fn ctx(pool: &MemPool) -> CiCtx<'_> {
        CiCtx {
            pool,
            leaf_fanout: 8,
            internal_fanout: 8,
            weights: false,
        }
    }

    struct Rng(u64);
    impl Rng {
        fn next(&mut self) -> u64 {
            self.0 ^= self.0 << 13;
            self.0 ^= self.0 >> 7;
            self.0 ^= self.0 << 17;
            self.0
        }
    }

    #[test]
    fn empty_and_single() {
        let pool = MemPool::new(PoolMode::PassThrough);
        let c = ctx(&pool);
        let t = CiTree::empty();
        assert_eq!(t.search(CiKey { src: 3, dst: 7 }, false), None);
        let (t1, added) = t.insert(CiKey { src: 3, dst: 7 }, None, &c);
        assert!(added);
        assert_eq!(t1.search(CiKey { src: 3, dst: 7 }, false), Some(None));
        assert_eq!(t1.search(CiKey { src: 3, dst: 8 }, false), None);
        t1.release(&pool);
        assert_eq!(pool.live_total(), 0);
    }

    #[test]
    fn leaf_split_builds_two_level_tree() {
        let pool = MemPool::new(PoolMode::PassThrough);
        let c = ctx(&pool);
        let mut t = CiTree::empty();
        for i in 0..9u32 {
            let (t2, _) = t.insert(CiKey { src: 0, dst: i }, None, &c);
            t.release(&pool);
            t = t2;
        }
        assert_eq!(t.depth(), 2, "split once");
        check_tree(&t, &c);
        t.release(&pool);
        assert_eq!(pool.live_total(), 0);
    }

    #[test]
    fn scan_src_in_insert_order_independence() {
        let pool = MemPool::new(PoolMode::PassThrough);
        let c = ctx(&pool);
        let mut t = CiTree::empty();
        for dst in [7u32, 1, 9] {
            let (t2, _) = t.insert(CiKey { src: 3, dst }, None, &c);
            t.release(&pool);
            t = t2;
        }
        let mut got = Vec::new();
        t.scan_src(VertexId(3), false, |v, _| got.push(v.0));
        assert_eq!(got, vec![1, 7, 9]);
        let mut none = Vec::new();
        t.scan_src(VertexId(4), false, |v, _| none.push(v.0));
        assert!(none.is_empty());
        t.release(&pool);
        assert_eq!(pool.live_total(), 0);
    }

    #[test]
    fn random_ops_match_oracle_snapshots() {
        let pool = MemPool::new(PoolMode::PassThrough);
        let c = ctx(&pool);
        let mut rng = Rng(0xC1C1);
        let mut oracle: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        let mut t = CiTree::empty();
        let mut snaps: Vec<(CiTree, Vec<(u32, u32)>)> = Vec::new();
        for step in 0..10_000u32 {
            let src = (rng.next() % 40) as u32;
            let dst = (rng.next() % 50) as u32;
            let key = CiKey { src, dst };
            let (t2, _) = if rng.next().is_multiple_of(3) {
                oracle.remove(&(src, dst));
                t.remove(key, &c)
            } else {
                oracle.entry((src, dst)).or_insert(0);
                t.insert(key, None, &c)
            };
            t.release(&pool);
            t = t2;
            if step.is_multiple_of(1000) {
                check_tree(&t, &c);
                snaps.push((t.clone_ref(), oracle.keys().copied().collect()));
            }
        }
        // final state and every retained snapshot match their oracles
        let want: Vec<(u32, u32)> = oracle.keys().copied().collect();
        let mut got = Vec::new();
        t.scan_from(CiKey { src: 0, dst: 0 }, false, |k, _| {
            got.push((k.src, k.dst));
            true
        });
        assert_eq!(got, want);
        for (s, want) in &snaps {
            let mut got = Vec::new();
            s.scan_from(CiKey { src: 0, dst: 0 }, false, |k, _| {
                got.push((k.src, k.dst));
                true
            });
            assert_eq!(&got, want, "snapshot unchanged by later writes");
        }
        let roots: Vec<&CiTree> = snaps.iter().map(|(s, _)| s).chain([&t]).collect();
        check_refcounts(&roots);
        for (s, _) in snaps {
            s.release(&pool);
        }
        t.release(&pool);
        assert_eq!(pool.live_total(), 0);
    }

    #[test]
    fn extract_roundtrip() {
        let pool = MemPool::new(PoolMode::PassThrough);
        let c = ctx(&pool);
        let mut t = CiTree::empty();
        for src in 0..6u32 {
            for dst in 0..12u32 {
                let (t2, _) = t.insert(CiKey { src, dst: dst * 3 }, None, &c);
                t.release(&pool);
                t = t2;
            }
        }
        let (extracted, t2) = t.extract_src(VertexId(2), &c);
        assert_eq!(extracted.len(), 12);
        assert!(extracted.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(t2.len(), t.len() - 12);
        let mut none = Vec::new();
        t2.scan_src(VertexId(2), false, |v, _| none.push(v.0));
        assert!(none.is_empty());
        check_tree(&t2, &c);
        // original untouched
        let mut still = Vec::new();
        t.scan_src(VertexId(2), false, |v, _| still.push(v.0));
        assert_eq!(still.len(), 12);
        // extract of an absent vertex returns an equal tree
        let (e2, t3) = t2.extract_src(VertexId(99), &c);
        assert!(e2.is_empty());
        assert_eq!(t3.len(), t2.len());
        // reinsert restores the original contents
        let mut t4 = t3.clone_ref();
        for (dst, w) in &extracted {
            let (n, _) = t4.insert(CiKey { src: 2, dst: *dst }, *w, &c);
            t4.release(&pool);
            t4 = n;
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        t.scan_from(CiKey { src: 0, dst: 0 }, false, |k, _| {
            a.push(k);
            true
        });
        t4.scan_from(CiKey { src: 0, dst: 0 }, false, |k, _| {
            b.push(k);
            true
        });
        assert_eq!(a, b);
        t.release(&pool);
        t2.release(&pool);
        t3.release(&pool);
        t4.release(&pool);
        assert_eq!(pool.live_total(), 0);
    }

    #[test]
    fn locator_walk_positions_are_scannable() {
        let pool = MemPool::new(PoolMode::PassThrough);
        let c = ctx(&pool);
        let mut t = CiTree::empty();
        for src in [1u32, 2, 5] {
            for dst in 0..20u32 {
                let (t2, _) = t.insert(CiKey { src, dst }, None, &c);
                t.release(&pool);
                t = t2;
            }
        }
        let mut firsts: BTreeMap<u32, (CiPtr, u32)> = BTreeMap::new();
        t.for_each_entry_pos(|k, leaf, off| {
            firsts.entry(k.src).or_insert((leaf, off));
        });
        assert_eq!(firsts.len(), 3);
        for (src, (leaf, off)) in firsts {
            let mut run = Vec::new();
            let stopped = CiTree::scan_leaf_run(leaf, off, false, &mut |k, _| {
                if k.src != src {
                    return false;
                }
                run.push(k.dst);
                true
            });
            assert!(!run.is_empty());
            assert_eq!(run[0], 0, "run starts at the first neighbor");
            let _ = stopped;
        }
        t.release(&pool);
        assert_eq!(pool.live_total(), 0);
    }
}
