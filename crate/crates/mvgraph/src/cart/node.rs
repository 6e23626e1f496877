//! Inner nodes of the radix tree and the reference-counting protocol.
//!
//! Four node kinds (N4/N16/N48/N256) hold children keyed by one byte; a node
//! always uses the smallest kind that fits its key count. Several
//! consecutive keys may point to the same leaf segment.
//!
//! Reference counting is per stored pointer: every key slot (and every tree
//! root handle) owns one reference on its target. Constructors hand back an
//! owned reference; storing a pointer under m alias keys requires m
//! references. Releasing a node releases each of its slots once and reclaims
//! the node when its count reaches zero. Published nodes are immutable, so
//! any number of threads may read them while holding a reference.

use std::ptr::NonNull;
use std::sync::atomic::{fence, AtomicU32, Ordering};

use super::bits::{self, Bits256};
use super::leaf::LeafSegment;
use crate::pool::{MemPool, ObjClass};
use crate::types::KEY_WIDTH;

/// Tagged handle to an inner node or a leaf segment.
#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum ChildPtr {
    Inner(NonNull<InnerNode>),
    Leaf(NonNull<LeafSegment>),
}

// Nodes are immutable once published and refcounts are atomic.
unsafe impl Send for ChildPtr {}
unsafe impl Sync for ChildPtr {}

impl ChildPtr {
    #[inline]
    pub(crate) fn as_inner(&self) -> Option<&InnerNode> {
        match self {
            ChildPtr::Inner(p) => Some(unsafe { p.as_ref() }),
            ChildPtr::Leaf(_) => None,
        }
    }

    #[inline]
    pub(crate) fn as_leaf(&self) -> Option<&LeafSegment> {
        match self {
            ChildPtr::Leaf(p) => Some(unsafe { p.as_ref() }),
            ChildPtr::Inner(_) => None,
        }
    }

    #[inline]
    pub(crate) fn is_leaf(&self) -> bool {
        matches!(self, ChildPtr::Leaf(_))
    }

    fn refcount_cell(&self) -> &AtomicU32 {
        match self {
            ChildPtr::Inner(p) => &unsafe { p.as_ref() }.refcount,
            ChildPtr::Leaf(p) => &unsafe { p.as_ref() }.refcount,
        }
    }

    /// Add one owned reference.
    #[inline]
    pub(crate) fn retain(&self) {
        let prev = self.refcount_cell().fetch_add(1, Ordering::Relaxed);
        assert!(prev > 0, "retain of a reclaimed node");
    }

    /// Drop one owned reference; reclaims the subtree top-down when the
    /// count reaches zero.
    pub(crate) fn release(self, pool: &MemPool) {
        let prev = self.refcount_cell().fetch_sub(1, Ordering::Release);
        assert!(prev > 0, "release without a matching reference");
        if prev != 1 {
            return;
        }
        fence(Ordering::Acquire);
        match self {
            ChildPtr::Inner(p) => {
                let children: Vec<ChildPtr> = unsafe { p.as_ref() }
                    .children
                    .iter()
                    .map(|(_, c)| c)
                    .collect();
                for c in children {
                    c.release(pool);
                }
                unsafe { pool.dealloc(ObjClass::CartInner, p) };
            }
            ChildPtr::Leaf(p) => unsafe { pool.dealloc(ObjClass::CartLeaf, p) },
        }
    }
}

pub struct InnerNode {
    pub(crate) refcount: AtomicU32,
    /// Byte index this node discriminates on; equals the prefix length.
    pub(crate) depth: u8,
    /// Common prefix of every key below, from the root (`prefix[..depth]`).
    pub(crate) prefix: [u8; KEY_WIDTH],
    pub(crate) children: Children,
}

impl InnerNode {
    #[inline]
    pub(crate) fn prefix_slice(&self) -> &[u8] {
        &self.prefix[..self.depth as usize]
    }

    pub(crate) fn byte_size(&self) -> usize {
        std::mem::size_of::<Self>() + self.children.heap_size()
    }
}

pub(crate) enum Children {
    N4 {
        len: u8,
        keys: [u8; 4],
        ptrs: [Option<ChildPtr>; 4],
    },
    N16 {
        len: u8,
        keys: [u8; 16],
        ptrs: Box<[Option<ChildPtr>; 16]>,
    },
    N48 {
        len: u8,
        slots: Box<[u8; 256]>,
        ptrs: Box<[Option<ChildPtr>; 48]>,
    },
    N256 {
        len: u16,
        bitmap: Box<Bits256>,
        ptrs: Box<[Option<ChildPtr>; 256]>,
    },
}

const N48_EMPTY: u8 = 0xFF;

impl Children {
    /// Smallest kind that fits `pairs` (sorted by key, one owned ref each).
    pub(crate) fn from_pairs(pairs: &[(u8, ChildPtr)]) -> Children {
        debug_assert!(
            pairs.windows(2).all(|p| p[0].0 < p[1].0),
            "keys sorted and unique"
        );
        let n = pairs.len();
        if n <= 4 {
            let mut keys = [0u8; 4];
            let mut ptrs = [None; 4];
            for (i, (k, p)) in pairs.iter().enumerate() {
                keys[i] = *k;
                ptrs[i] = Some(*p);
            }
            Children::N4 {
                len: n as u8,
                keys,
                ptrs,
            }
        } else if n <= 16 {
            let mut keys = [0u8; 16];
            let mut ptrs = Box::new([None; 16]);
            for (i, (k, p)) in pairs.iter().enumerate() {
                keys[i] = *k;
                ptrs[i] = Some(*p);
            }
            Children::N16 {
                len: n as u8,
                keys,
                ptrs,
            }
        } else if n <= 48 {
            let mut slots = Box::new([N48_EMPTY; 256]);
            let mut ptrs = Box::new([None; 48]);
            for (i, (k, p)) in pairs.iter().enumerate() {
                slots[*k as usize] = i as u8;
                ptrs[i] = Some(*p);
            }
            Children::N48 {
                len: n as u8,
                slots,
                ptrs,
            }
        } else {
            let mut bitmap = Box::new(bits::EMPTY);
            let mut ptrs = Box::new([None; 256]);
            for (k, p) in pairs {
                bits::set(&mut bitmap, *k);
                ptrs[*k as usize] = Some(*p);
            }
            Children::N256 {
                len: n as u16,
                bitmap,
                ptrs,
            }
        }
    }

    pub(crate) fn key_count(&self) -> usize {
        match self {
            Children::N4 { len, .. } | Children::N16 { len, .. } | Children::N48 { len, .. } => {
                *len as usize
            }
            Children::N256 { len, .. } => *len as usize,
        }
    }

    pub(crate) fn get(&self, key: u8) -> Option<ChildPtr> {
        match self {
            Children::N4 { len, keys, ptrs } => keys[..*len as usize]
                .iter()
                .position(|&k| k == key)
                .and_then(|i| ptrs[i]),
            Children::N16 { len, keys, ptrs } => keys[..*len as usize]
                .iter()
                .position(|&k| k == key)
                .and_then(|i| ptrs[i]),
            Children::N48 { slots, ptrs, .. } => {
                let s = slots[key as usize];
                if s == N48_EMPTY {
                    None
                } else {
                    ptrs[s as usize]
                }
            }
            Children::N256 { ptrs, .. } => ptrs[key as usize],
        }
    }

    /// Smallest key greater than `after` (pass -1 to start), with its child.
    pub(crate) fn next_after(&self, after: i16) -> Option<(u8, ChildPtr)> {
        match self {
            Children::N4 { len, keys, ptrs } => keys[..*len as usize]
                .iter()
                .position(|&k| (k as i16) > after)
                .map(|i| (keys[i], ptrs[i].unwrap())),
            Children::N16 { len, keys, ptrs } => keys[..*len as usize]
                .iter()
                .position(|&k| (k as i16) > after)
                .map(|i| (keys[i], ptrs[i].unwrap())),
            Children::N48 { slots, ptrs, .. } => {
                let mut k = after + 1;
                while k <= 255 {
                    let s = slots[k as usize];
                    if s != N48_EMPTY {
                        return Some((k as u8, ptrs[s as usize].unwrap()));
                    }
                    k += 1;
                }
                None
            }
            Children::N256 { bitmap, ptrs, .. } => {
                bits::next_one(bitmap, after).map(|k| (k, ptrs[k as usize].unwrap()))
            }
        }
    }

    pub(crate) fn iter(&self) -> ChildIter<'_> {
        ChildIter {
            children: self,
            last: -1,
        }
    }

    pub(crate) fn heap_size(&self) -> usize {
        match self {
            Children::N4 { .. } => 0,
            Children::N16 { .. } => 16 * std::mem::size_of::<Option<ChildPtr>>(),
            Children::N48 { .. } => 256 + 48 * std::mem::size_of::<Option<ChildPtr>>(),
            Children::N256 { .. } => 32 + 256 * std::mem::size_of::<Option<ChildPtr>>(),
        }
    }

    /// N256 keeps a presence bitmap; its popcount must equal the key count.
    pub(crate) fn bitmap_consistent(&self) -> bool {
        match self {
            Children::N256 { len, bitmap, ptrs } => {
                bits::count(bitmap) == *len as u32
                    && (0..=255u8).all(|k| bits::test(bitmap, k) == ptrs[k as usize].is_some())
            }
            _ => true,
        }
    }
}

pub(crate) struct ChildIter<'a> {
    children: &'a Children,
    last: i16,
}

impl Iterator for ChildIter<'_> {
    type Item = (u8, ChildPtr);

    fn next(&mut self) -> Option<(u8, ChildPtr)> {
        let (k, p) = self.children.next_after(self.last)?;
        self.last = k as i16;
        Some((k, p))
    }
}

/// Allocate an inner node from sorted pairs, taking ownership of one
/// reference per pair.
pub(crate) fn alloc_inner(
    pool: &MemPool,
    depth: u8,
    prefix: [u8; KEY_WIDTH],
    pairs: &[(u8, ChildPtr)],
) -> NonNull<InnerNode> {
    debug_assert!((depth as usize) < KEY_WIDTH);
    pool.alloc(
        ObjClass::CartInner,
        InnerNode {
            refcount: AtomicU32::new(1),
            depth,
            prefix,
            children: Children::from_pairs(pairs),
        },
    )
}

/// Mutable working copy of a node's child list used while building the
/// copy-on-write replacement. Every entry owns one reference; `build`
/// transfers them into the new node.
pub(crate) struct EditPairs {
    pairs: Vec<(u8, ChildPtr)>,
}

impl EditPairs {
    /// Start from an existing node, retaining every slot's pointer.
    pub(crate) fn from_node(n: &InnerNode) -> EditPairs {
        let pairs: Vec<(u8, ChildPtr)> = n.children.iter().collect();
        for (_, p) in &pairs {
            p.retain();
        }
        EditPairs { pairs }
    }

    pub(crate) fn len(&self) -> usize {
        self.pairs.len()
    }

    pub(crate) fn pairs(&self) -> &[(u8, ChildPtr)] {
        &self.pairs
    }

    pub(crate) fn alias_count(&self, ptr: ChildPtr) -> usize {
        self.pairs.iter().filter(|(_, p)| *p == ptr).count()
    }

    pub(crate) fn contains_ptr(&self, ptr: ChildPtr) -> bool {
        self.pairs.iter().any(|(_, p)| *p == ptr)
    }

    /// Replace the child under `key` with `new` (retaining it); releases the
    /// displaced reference.
    pub(crate) fn set(&mut self, key: u8, new: ChildPtr, pool: &MemPool) {
        new.retain();
        match self.pairs.binary_search_by_key(&key, |(k, _)| *k) {
            Ok(i) => {
                let old = self.pairs[i].1;
                self.pairs[i].1 = new;
                old.release(pool);
            }
            Err(i) => self.pairs.insert(i, (key, new)),
        }
    }

    /// Repoint every slot holding `old` to `new`; each repointed slot
    /// releases `old` and retains `new`.
    pub(crate) fn replace_all(&mut self, old: ChildPtr, new: ChildPtr, pool: &MemPool) {
        for i in 0..self.pairs.len() {
            if self.pairs[i].1 == old {
                new.retain();
                self.pairs[i].1 = new;
                old.release(pool);
            }
        }
    }

    pub(crate) fn remove_key(&mut self, key: u8, pool: &MemPool) {
        if let Ok(i) = self.pairs.binary_search_by_key(&key, |(k, _)| *k) {
            let (_, p) = self.pairs.remove(i);
            p.release(pool);
        }
    }

    /// Contiguous index range of slots pointing at `ptr`.
    pub(crate) fn alias_range(&self, ptr: ChildPtr) -> (usize, usize) {
        let start = self
            .pairs
            .iter()
            .position(|(_, p)| *p == ptr)
            .expect("ptr present");
        let mut end = start + 1;
        while end < self.pairs.len() && self.pairs[end].1 == ptr {
            end += 1;
        }
        debug_assert!(
            self.pairs[end..].iter().all(|(_, p)| *p != ptr),
            "aliases are contiguous"
        );
        (start, end)
    }

    /// Build the replacement node; the held references move into its slots.
    pub(crate) fn build(self, pool: &MemPool, depth: u8, prefix: [u8; KEY_WIDTH]) -> ChildPtr {
        ChildPtr::Inner(alloc_inner(pool, depth, prefix, &self.pairs))
    }

    /// Abort an edit, dropping every held reference.
    #[allow(dead_code)]
    pub(crate) fn discard(self, pool: &MemPool) {
        for (_, p) in self.pairs {
            p.release(pool);
        }
    }
}
