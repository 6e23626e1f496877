//! Lock-acquisition accounting.
//!
//! Every blocking lock the engine takes (subgraph locks, the limbo list,
//! the vertex-reuse queue, pool free lists) reports here. Read paths are
//! required to take none; tests and the benchmark harness assert that by
//! sampling the per-thread counter around reader code.

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};

static GLOBAL_LOCKS: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static THREAD_LOCKS: Cell<u64> = const { Cell::new(0) };
}

/// Record one blocking lock acquisition on this thread.
#[inline]
pub fn note_lock_acquired() {
    GLOBAL_LOCKS.fetch_add(1, Ordering::Relaxed);
    THREAD_LOCKS.with(|c| c.set(c.get() + 1));
}

/// Lock acquisitions recorded on the current thread so far.
#[inline]
pub fn locks_on_current_thread() -> u64 {
    THREAD_LOCKS.with(|c| c.get())
}

/// Process-wide lock acquisitions (all threads).
#[inline]
pub fn locks_global() -> u64 {
    GLOBAL_LOCKS.load(Ordering::Relaxed)
}

/// Asserts that the enclosed scope acquired no locks on this thread.
pub struct NoLockScope {
    start: u64,
}

impl NoLockScope {
    pub fn enter() -> Self {
        NoLockScope {
            start: locks_on_current_thread(),
        }
    }

    /// Locks taken on this thread since [`enter`](Self::enter).
    pub fn taken(&self) -> u64 {
        locks_on_current_thread() - self.start
    }
}
