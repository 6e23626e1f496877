//! Leaf segments: compressed sorted runs of neighbor IDs.
//!
//! A leaf stores up to `B` entries that all share a common prefix (the LCP)
//! of `lcp_len` bytes; only the remaining suffix bytes are kept, packed at a
//! fixed width of `4 - lcp_len`. When entries differ only in their last byte
//! the suffixes collapse into a 256-bit bitmap. Leaves are immutable after
//! publication; mutation builds a fresh leaf.

use std::ptr::NonNull;
use std::sync::atomic::AtomicU32;

use super::bits::{self, Bits256};
use crate::pool::{MemPool, ObjClass};
use crate::types::KEY_WIDTH;

pub struct LeafSegment {
    pub(crate) refcount: AtomicU32,
    /// Length of the shared prefix in bytes; equals the owning node's depth
    /// (0 for a leaf that is the tree root).
    pub(crate) lcp_len: u8,
    pub(crate) lcp: [u8; KEY_WIDTH],
    pub(crate) body: LeafBody,
}

pub(crate) enum LeafBody {
    /// Packed big-endian suffixes, stride `4 - lcp_len`, strictly ascending.
    Sorted {
        suffixes: Vec<u8>,
        weights: Option<Vec<u32>>,
    },
    /// One bit per final byte; used exactly when `lcp_len == 3`.
    Bitmap {
        bits: Box<Bits256>,
        weights: Option<Vec<u32>>,
    },
}

/// Low 8·w bits of an ID (its suffix value under a w-byte-wide suffix).
#[inline]
fn suffix_mask(width: usize) -> u32 {
    if width >= 4 {
        u32::MAX
    } else {
        (1u32 << (8 * width)) - 1
    }
}

impl LeafSegment {
    pub(crate) fn suffix_width(&self) -> usize {
        KEY_WIDTH - self.lcp_len as usize
    }

    pub(crate) fn count(&self) -> u32 {
        match &self.body {
            LeafBody::Sorted { suffixes, .. } => (suffixes.len() / self.suffix_width()) as u32,
            LeafBody::Bitmap { bits, .. } => bits::count(bits),
        }
    }

    /// Full vertex ID of the entry at `rank`.
    pub(crate) fn entry_id(&self, rank: u32) -> u32 {
        let w = self.suffix_width();
        let base = if self.lcp_len == 0 {
            0
        } else {
            u32::from_be_bytes(self.lcp) & !suffix_mask(w)
        };
        match &self.body {
            LeafBody::Sorted { suffixes, .. } => {
                let off = rank as usize * w;
                let mut v = 0u32;
                for &b in &suffixes[off..off + w] {
                    v = (v << 8) | b as u32;
                }
                base | v
            }
            LeafBody::Bitmap { bits, .. } => {
                let mut cur = -1i16;
                for _ in 0..=rank {
                    cur = bits::next_one(bits, cur).expect("rank within count") as i16;
                }
                base | cur as u32
            }
        }
    }

    pub(crate) fn weight_at(&self, rank: u32) -> Option<u32> {
        let weights = match &self.body {
            LeafBody::Sorted { weights, .. } => weights,
            LeafBody::Bitmap { weights, .. } => weights,
        };
        weights.as_ref().map(|w| w[rank as usize])
    }

    /// Rank of `id` if present, else the rank it would occupy.
    pub(crate) fn rank_of(&self, id: u32) -> Result<u32, u32> {
        let w = self.suffix_width();
        let target = id & suffix_mask(w);
        match &self.body {
            LeafBody::Sorted { suffixes, .. } => {
                let n = suffixes.len() / w;
                let mut lo = 0usize;
                let mut hi = n;
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    let mut v = 0u32;
                    for &b in &suffixes[mid * w..mid * w + w] {
                        v = (v << 8) | b as u32;
                    }
                    match v.cmp(&target) {
                        std::cmp::Ordering::Less => lo = mid + 1,
                        std::cmp::Ordering::Greater => hi = mid,
                        std::cmp::Ordering::Equal => return Ok(mid as u32),
                    }
                }
                Err(lo as u32)
            }
            LeafBody::Bitmap { bits, .. } => {
                let b = target as u8;
                let r = bits::rank(bits, b);
                if bits::test(bits, b) {
                    Ok(r)
                } else {
                    Err(r)
                }
            }
        }
    }

    pub(crate) fn contains(&self, id: u32) -> bool {
        self.rank_of(id).is_ok()
    }

    /// Does any entry carry byte value `b` at key position `pos`?
    pub(crate) fn has_group(&self, pos: usize, b: u8) -> bool {
        debug_assert!(pos >= self.lcp_len as usize);
        let n = self.count();
        for r in 0..n {
            if self.entry_id(r).to_be_bytes()[pos] == b {
                return true;
            }
        }
        false
    }

    /// All entries as `(id, weight)` pairs, ascending.
    pub(crate) fn entries(&self) -> Vec<(u32, Option<u32>)> {
        let n = self.count();
        let mut out = Vec::with_capacity(n as usize);
        match &self.body {
            LeafBody::Sorted { suffixes, weights } => {
                let w = self.suffix_width();
                let base = if self.lcp_len == 0 {
                    0
                } else {
                    u32::from_be_bytes(self.lcp) & !suffix_mask(w)
                };
                for r in 0..n as usize {
                    let mut v = 0u32;
                    for &b in &suffixes[r * w..r * w + w] {
                        v = (v << 8) | b as u32;
                    }
                    out.push((base | v, weights.as_ref().map(|ws| ws[r])));
                }
            }
            LeafBody::Bitmap { bits, weights } => {
                let base = u32::from_be_bytes(self.lcp) & !0xFF;
                let mut cur = -1i16;
                let mut r = 0usize;
                while let Some(b) = bits::next_one(bits, cur) {
                    out.push((base | b as u32, weights.as_ref().map(|ws| ws[r])));
                    cur = b as i16;
                    r += 1;
                }
            }
        }
        out
    }

    pub(crate) fn is_bitmap(&self) -> bool {
        matches!(self.body, LeafBody::Bitmap { .. })
    }

    /// Approximate heap footprint, for the memory report.
    pub(crate) fn byte_size(&self) -> usize {
        let body = match &self.body {
            LeafBody::Sorted { suffixes, weights } => {
                suffixes.capacity() + weights.as_ref().map_or(0, |w| w.capacity() * 4)
            }
            LeafBody::Bitmap { weights, .. } => {
                32 + weights.as_ref().map_or(0, |w| w.capacity() * 4)
            }
        };
        std::mem::size_of::<Self>() + body
    }
}

/// Build a leaf from sorted `(id, weight)` entries sharing `lcp_len` prefix
/// bytes. Chooses the bitmap representation when only the last byte varies.
pub(crate) fn alloc_leaf(
    pool: &MemPool,
    lcp_len: u8,
    entries: &[(u32, Option<u32>)],
    with_weights: bool,
) -> NonNull<LeafSegment> {
    debug_assert!(!entries.is_empty());
    debug_assert!((lcp_len as usize) < KEY_WIDTH);
    let lcp = entries[0].0.to_be_bytes();
    let w = KEY_WIDTH - lcp_len as usize;
    debug_assert!(
        entries.windows(2).all(|p| p[0].0 < p[1].0),
        "entries ascending"
    );
    debug_assert!(
        entries
            .iter()
            .all(|e| e.0 & !suffix_mask(w) == entries[0].0 & !suffix_mask(w)),
        "entries share the lcp"
    );
    let weights = with_weights.then(|| entries.iter().map(|e| e.1.unwrap_or(0)).collect());
    let body = if lcp_len as usize == KEY_WIDTH - 1 {
        let mut bits = Box::new(bits::EMPTY);
        for (id, _) in entries {
            bits::set(&mut bits, (*id & 0xFF) as u8);
        }
        LeafBody::Bitmap { bits, weights }
    } else {
        let mut suffixes = Vec::with_capacity(entries.len() * w);
        for (id, _) in entries {
            let b = id.to_be_bytes();
            suffixes.extend_from_slice(&b[lcp_len as usize..]);
        }
        LeafBody::Sorted { suffixes, weights }
    };
    pool.alloc(
        ObjClass::CartLeaf,
        LeafSegment {
            refcount: AtomicU32::new(1),
            lcp_len,
            lcp,
            body,
        },
    )
}

/// Copy of `leaf` with `(id, weight)` inserted at its sorted position.
pub(crate) fn leaf_with_inserted(
    pool: &MemPool,
    leaf: &LeafSegment,
    id: u32,
    weight: Option<u32>,
    with_weights: bool,
) -> NonNull<LeafSegment> {
    let mut entries = leaf.entries();
    let pos = entries.binary_search_by_key(&id, |e| e.0).unwrap_err();
    entries.insert(pos, (id, weight));
    alloc_leaf(pool, leaf.lcp_len, &entries, with_weights)
}

/// Copy of `leaf` without `id`; caller ensures the result stays non-empty.
pub(crate) fn leaf_with_removed(
    pool: &MemPool,
    leaf: &LeafSegment,
    id: u32,
    with_weights: bool,
) -> NonNull<LeafSegment> {
    let mut entries = leaf.entries();
    let pos = entries
        .binary_search_by_key(&id, |e| e.0)
        .expect("entry present");
    entries.remove(pos);
    alloc_leaf(pool, leaf.lcp_len, &entries, with_weights)
}

/// Merge two sibling leaves (same lcp_len, disjoint key ranges) into one.
pub(crate) fn leaf_merge(
    pool: &MemPool,
    a: &LeafSegment,
    b: &LeafSegment,
    with_weights: bool,
) -> NonNull<LeafSegment> {
    debug_assert_eq!(a.lcp_len, b.lcp_len);
    let (lo, hi) = if a.entry_id(0) < b.entry_id(0) {
        (a, b)
    } else {
        (b, a)
    };
    let mut entries = lo.entries();
    entries.extend(hi.entries());
    alloc_leaf(pool, a.lcp_len, &entries, with_weights)
}

/// Copy of `leaf` re-based to a shorter shared prefix (suffixes widen).
pub(crate) fn leaf_rebased(
    pool: &MemPool,
    leaf: &LeafSegment,
    new_lcp_len: u8,
    with_weights: bool,
) -> NonNull<LeafSegment> {
    debug_assert!(new_lcp_len <= leaf.lcp_len);
    let entries = leaf.entries();
    alloc_leaf(pool, new_lcp_len, &entries, with_weights)
}
