//! Block pool for node and leaf allocation.
//!
//! All tree nodes, leaf segments, snapshots and chain entries are allocated
//! through a [`MemPool`] so that live-object counters are exact (they back
//! the leak checks and the memory report). The default mode is a pass
//! through to the global allocator; `SizeClass` mode recycles object shells
//! through sharded per-class free lists to cut allocator churn under heavy
//! copy-on-write traffic. Both modes are functionally identical.

use std::alloc::Layout;
use std::ptr::NonNull;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::types::PoolMode;

const SHARDS: usize = 8;
const SHARD_CAP: usize = 1024;

/// One cached shell: raw allocation plus the layout it was made with.
type Shell = (NonNull<u8>, Layout);

/// Which live-object counter an allocation belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjClass {
    CartInner = 0,
    CartLeaf = 1,
    CiNode = 2,
    Snapshot = 3,
    ChainEntry = 4,
}

const CLASSES: usize = 5;

struct FreeList {
    shards: [Mutex<Vec<Shell>>; SHARDS],
}

// Free-list entries are raw shells with no owner; moving them across threads
// is sound because they carry no data until reinitialized.
unsafe impl Send for FreeList {}
unsafe impl Sync for FreeList {}

impl FreeList {
    fn new() -> Self {
        FreeList {
            shards: std::array::from_fn(|_| Mutex::new(Vec::new())),
        }
    }

    fn shard(&self) -> &Mutex<Vec<Shell>> {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        std::thread::current().id().hash(&mut h);
        &self.shards[(h.finish() as usize) % SHARDS]
    }

    fn pop(&self, layout: Layout) -> Option<NonNull<u8>> {
        let mut s = self.shard().lock().unwrap();
        match s.last() {
            Some((_, l)) if *l == layout => s.pop().map(|(p, _)| p),
            _ => None,
        }
    }

    fn push(&self, p: NonNull<u8>, layout: Layout) -> bool {
        let mut s = self.shard().lock().unwrap();
        if s.len() >= SHARD_CAP {
            return false;
        }
        s.push((p, layout));
        true
    }

    fn drain(&self) {
        for shard in &self.shards {
            for (p, layout) in shard.lock().unwrap().drain(..) {
                unsafe { std::alloc::dealloc(p.as_ptr(), layout) };
            }
        }
    }
}

/// Allocation source shared by one store (or one test fixture).
pub struct MemPool {
    mode: PoolMode,
    live: [AtomicU64; CLASSES],
    allocated: [AtomicU64; CLASSES],
    free_lists: [FreeList; CLASSES],
}

impl MemPool {
    pub fn new(mode: PoolMode) -> Self {
        MemPool {
            mode,
            live: std::array::from_fn(|_| AtomicU64::new(0)),
            allocated: std::array::from_fn(|_| AtomicU64::new(0)),
            free_lists: std::array::from_fn(|_| FreeList::new()),
        }
    }

    /// Allocate and initialize one object of class `class`.
    pub fn alloc<T>(&self, class: ObjClass, value: T) -> NonNull<T> {
        self.live[class as usize].fetch_add(1, Ordering::Relaxed);
        self.allocated[class as usize].fetch_add(1, Ordering::Relaxed);
        if self.mode == PoolMode::SizeClass {
            if let Some(shell) = self.free_lists[class as usize].pop(Layout::new::<T>()) {
                let p = shell.cast::<T>();
                unsafe { std::ptr::write(p.as_ptr(), value) };
                return p;
            }
        }
        let b = Box::new(value);
        unsafe { NonNull::new_unchecked(Box::into_raw(b)) }
    }

    /// Drop and reclaim an object previously produced by [`alloc`](Self::alloc).
    ///
    /// # Safety
    /// `ptr` must come from `alloc` on this pool with the same `T`/`class`
    /// and must not be used afterwards.
    pub unsafe fn dealloc<T>(&self, class: ObjClass, ptr: NonNull<T>) {
        self.live[class as usize].fetch_sub(1, Ordering::Relaxed);
        if self.mode == PoolMode::SizeClass {
            std::ptr::drop_in_place(ptr.as_ptr());
            if self.free_lists[class as usize].push(ptr.cast(), Layout::new::<T>()) {
                return;
            }
            std::alloc::dealloc(ptr.as_ptr().cast(), Layout::new::<T>());
            return;
        }
        drop(Box::from_raw(ptr.as_ptr()));
    }

    pub fn live(&self, class: ObjClass) -> u64 {
        self.live[class as usize].load(Ordering::Acquire)
    }

    /// Total live objects across every class; 0 means everything was released.
    pub fn live_total(&self) -> u64 {
        self.live.iter().map(|c| c.load(Ordering::Acquire)).sum()
    }

    /// Cumulative allocation count (never decreases).
    pub fn allocated(&self, class: ObjClass) -> u64 {
        self.allocated[class as usize].load(Ordering::Acquire)
    }

    pub fn mode(&self) -> PoolMode {
        self.mode
    }
}

impl Drop for MemPool {
    fn drop(&mut self) {
        for fl in &self.free_lists {
            fl.drain();
        }
    }
}
