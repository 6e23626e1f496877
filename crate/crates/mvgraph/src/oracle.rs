//! Serial reference implementation and history checking.
//!
//! [`SerialStore`] replays committed operation batches in timestamp order on
//! a plain sorted-map adjacency, giving the state any reader must observe at
//! a given start timestamp. [`check_history`] validates a recorded
//! concurrent execution against it: every reader observation must equal a
//! committed prefix, commit timestamps must be gap-free, and sampled version
//! chains must stay within the `k + 1` bound.
//!
//! Everything here is single-threaded by design; the [`HistoryRecorder`] is
//! the only concurrency-aware piece and just timestamps events.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::types::{Error, Result};

/// One replayable operation, as committed by a write transaction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleOp {
    #[serde(rename = "ie")]
    InsertEdge { u: u32, v: u32, w: Option<u32> },
    #[serde(rename = "de")]
    DeleteEdge { u: u32, v: u32 },
    #[serde(rename = "iv")]
    InsertVertex { u: u32 },
    #[serde(rename = "dv")]
    DeleteVertex { u: u32 },
}

/// Graph state under serial replay. Present flags start according to
/// `preinit` (all vertices present) or empty (vertices appear on first use).
#[derive(Clone, Debug, Default)]
pub struct SerialState {
    preinit: bool,
    present: std::collections::BTreeSet<u32>,
    absent: std::collections::BTreeSet<u32>,
    adj: BTreeMap<u32, BTreeMap<u32, Option<u32>>>,
    edges: u64,
}

impl SerialState {
    pub fn new(preinit: bool) -> SerialState {
        SerialState {
            preinit,
            ..Default::default()
        }
    }

    pub fn contains_vertex(&self, u: u32) -> bool {
        if self.preinit {
            !self.absent.contains(&u)
        } else {
            self.present.contains(&u)
        }
    }

    fn mark_present(&mut self, u: u32) {
        if self.preinit {
            self.absent.remove(&u);
        } else {
            self.present.insert(u);
        }
    }

    fn mark_absent(&mut self, u: u32) {
        if self.preinit {
            self.absent.insert(u);
        } else {
            self.present.remove(&u);
        }
    }

    pub fn apply_op(&mut self, op: &OracleOp) {
        match op {
            OracleOp::InsertEdge { u, v, w } => {
                self.mark_present(*u);
                let row = self.adj.entry(*u).or_default();
                if !row.contains_key(v) {
                    row.insert(*v, *w);
                    self.edges += 1;
                }
            }
            OracleOp::DeleteEdge { u, v } => {
                if !self.contains_vertex(*u) {
                    return;
                }
                if let Some(row) = self.adj.get_mut(u) {
                    if row.remove(v).is_some() {
                        self.edges -= 1;
                    }
                }
            }
            OracleOp::InsertVertex { u } => self.mark_present(*u),
            OracleOp::DeleteVertex { u } => {
                debug_assert!(self.degree(*u) == 0, "vertex delete with residual edges");
                self.adj.remove(u);
                self.mark_absent(*u);
            }
        }
    }

    pub fn degree(&self, u: u32) -> u64 {
        self.adj.get(&u).map_or(0, |r| r.len() as u64)
    }

    pub fn neighbors(&self, u: u32) -> Vec<u32> {
        self.adj
            .get(&u)
            .map_or_else(Vec::new, |r| r.keys().copied().collect())
    }

    pub fn weight(&self, u: u32, v: u32) -> Option<Option<u32>> {
        self.adj.get(&u).and_then(|r| r.get(&v)).copied()
    }

    pub fn edge_count(&self) -> u64 {
        self.edges
    }

    /// Intersection of the neighbor sets of `a` and `b`.
    pub fn intersect(&self, a: u32, b: u32) -> Vec<u32> {
        let (ra, rb) = match (self.adj.get(&a), self.adj.get(&b)) {
            (Some(ra), Some(rb)) => (ra, rb),
            _ => return Vec::new(),
        };
        ra.keys().filter(|v| rb.contains_key(*v)).copied().collect()
    }

    /// Order-sensitive checksum over the full scan (present vertices
    /// ascending, neighbors ascending), pairable with
    /// [`ChecksumBuilder`] on the engine side. A weight-carrying store
    /// records weightless inserts as 0, so the replay does too.
    pub fn checksum(&self, weights: bool) -> u64 {
        let mut cb = ChecksumBuilder::new();
        for (u, row) in &self.adj {
            if !self.contains_vertex(*u) {
                continue;
            }
            for (v, w) in row {
                cb.edge(*u, *v, if weights { Some(w.unwrap_or(0)) } else { None });
            }
        }
        cb.finish()
    }
}

/// Order-sensitive 64-bit scan checksum.
pub struct ChecksumBuilder {
    h: u64,
    n: u64,
}

fn mix64(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

impl ChecksumBuilder {
    #[allow(clippy::new_without_default)]
    pub fn new() -> ChecksumBuilder {
        ChecksumBuilder {
            h: 0x9e3779b97f4a7c15,
            n: 0,
        }
    }

    #[inline]
    pub fn edge(&mut self, u: u32, v: u32, w: Option<u32>) {
        let key = ((u as u64) << 32) | v as u64;
        let tag = w.map_or(0u64, |w| 1 << 63 | w as u64);
        self.h = mix64(self.h ^ mix64(key) ^ tag).rotate_left(7);
        self.n += 1;
    }

    pub fn finish(&self) -> u64 {
        mix64(self.h ^ self.n)
    }
}

/// Committed log plus an incrementally maintained head state.
pub struct SerialStore {
    preinit: bool,
    log: Vec<(u64, Vec<OracleOp>)>,
    head: SerialState,
}

impl SerialStore {
    pub fn new(preinit: bool) -> SerialStore {
        SerialStore {
            preinit,
            log: Vec::new(),
            head: SerialState::new(preinit),
        }
    }

    /// Append one committed batch; timestamps must increase strictly.
    pub fn apply(&mut self, ts: u64, ops: Vec<OracleOp>) -> Result<()> {
        let prev = self.log.last().map_or(0, |(t, _)| *t);
        if ts <= prev {
            return Err(Error::OutOfOrderTimestamp { prev, got: ts });
        }
        for op in &ops {
            self.head.apply_op(op);
        }
        self.log.push((ts, ops));
        Ok(())
    }

    /// State after replaying exactly the commits with timestamp <= `ts`,
    /// rebuilt from scratch (independent of the incremental head).
    pub fn state_at(&self, ts: u64) -> SerialState {
        let mut s = SerialState::new(self.preinit);
        for (t, ops) in &self.log {
            if *t > ts {
                break;
            }
            for op in ops {
                s.apply_op(op);
            }
        }
        s
    }

    /// Incrementally maintained latest state.
    pub fn head(&self) -> &SerialState {
        &self.head
    }

    pub fn last_ts(&self) -> u64 {
        self.log.last().map_or(0, |(t, _)| *t)
    }

    /// The rebuild-from-scratch route must agree with the incremental one.
    pub fn self_check(&self) -> bool {
        let rebuilt = self.state_at(u64::MAX);
        rebuilt.edge_count() == self.head.edge_count()
            && rebuilt.checksum(true) == self.head.checksum(true)
    }
}

// ---------------------------------------------------------------------------
// history recording and checking

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HistoryEvent {
    WriterCommit {
        writer: u64,
        ts: u64,
        ops: Vec<OracleOp>,
    },
    ReaderRegister {
        reader: u64,
        start_ts: u64,
    },
    ReaderObserve {
        reader: u64,
        start_ts: u64,
        edges: u64,
        checksum: u64,
    },
    ReaderUnregister {
        reader: u64,
    },
    ChainSample {
        partition: u32,
        len: u32,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeqEvent {
    pub seq: u64,
    pub event: HistoryEvent,
}

/// Thread-safe event sink with a global capture sequence.
pub struct HistoryRecorder {
    seq: AtomicU64,
    events: Mutex<Vec<SeqEvent>>,
}

impl HistoryRecorder {
    #[allow(clippy::new_without_default)]
    pub fn new() -> HistoryRecorder {
        HistoryRecorder {
            seq: AtomicU64::new(0),
            events: Mutex::new(Vec::new()),
        }
    }

    pub fn record(&self, event: HistoryEvent) {
        let seq = self.seq.fetch_add(1, Ordering::Relaxed);
        self.events.lock().unwrap().push(SeqEvent { seq, event });
    }

    pub fn take(&self) -> Vec<SeqEvent> {
        let mut v = std::mem::take(&mut *self.events.lock().unwrap());
        v.sort_by_key(|e| e.seq);
        v
    }
}

/// Newline-delimited JSON, one event per line.
pub fn write_ndjson(events: &[SeqEvent], mut w: impl Write) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e).map_err(|e| Error::MalformedHistory(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_ndjson(r: impl BufRead) -> Result<Vec<SeqEvent>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedHistory(e.to_string()))?);
    }
    Ok(out)
}

/// Outcome of validating one recorded execution.
#[derive(Debug, Clone)]
pub struct HistoryVerdict {
    pub passed: bool,
    /// First violation, if any.
    pub violation: Option<String>,
    pub commits: u64,
    pub observations: u64,
    pub max_chain_len: u32,
}

/// Validate a recorded execution: reader observations equal committed
/// prefixes, commit timestamps are unique and gap-free from 1, chain-length
/// samples stay within `k + 1`, and weight visibility follows `weights`.
pub fn check_history(
    events: &[SeqEvent],
    tracer_slots: usize,
    preinit: bool,
    weights: bool,
) -> Result<HistoryVerdict> {
    let mut commits: BTreeMap<u64, &Vec<OracleOp>> = BTreeMap::new();
    let mut observations: Vec<(u64, u64, u64, u64)> = Vec::new(); // (start_ts, edges, checksum, reader)
    let mut max_chain = 0u32;
    let verdict = |violation: String, commits: u64, obs: u64, max_chain: u32| HistoryVerdict {
        passed: false,
        violation: Some(violation),
        commits,
        observations: obs,
        max_chain_len: max_chain,
    };
    for e in events {
        match &e.event {
            HistoryEvent::WriterCommit { ts, ops, .. } => {
                if commits.insert(*ts, ops).is_some() {
                    return Ok(verdict(
                        format!("duplicate commit timestamp {ts}"),
                        commits.len() as u64,
                        observations.len() as u64,
                        max_chain,
                    ));
                }
            }
            HistoryEvent::ReaderObserve {
                start_ts,
                edges,
                checksum,
                reader,
            } => {
                observations.push((*start_ts, *edges, *checksum, *reader));
            }
            HistoryEvent::ChainSample { len, .. } => max_chain = max_chain.max(*len),
            HistoryEvent::ReaderRegister { .. } | HistoryEvent::ReaderUnregister { .. } => {}
        }
    }
    let n_commits = commits.len() as u64;
    let n_obs = observations.len() as u64;
    // commit timestamps are exactly 1..=n
    for (i, ts) in commits.keys().enumerate() {
        if *ts != i as u64 + 1 {
            return Ok(verdict(
                format!(
                    "commit timestamps not gap-free: expected {}, saw {ts}",
                    i + 1
                ),
                n_commits,
                n_obs,
                max_chain,
            ));
        }
    }
    if max_chain > tracer_slots as u32 + 1 {
        return Ok(verdict(
            format!(
                "chain length {max_chain} exceeds k + 1 = {}",
                tracer_slots + 1
            ),
            n_commits,
            n_obs,
            max_chain,
        ));
    }
    // forward replay, checking observations grouped by start timestamp
    observations.sort_by_key(|(ts, ..)| *ts);
    let mut state = SerialState::new(preinit);
    let mut replayed_to = 0u64;
    let mut commit_iter = commits.iter().peekable();
    let mut at_ts: Option<(u64, u64, u64)> = None; // (ts, edges, checksum) cache
    for (start_ts, edges, checksum, reader) in &observations {
        while let Some((ts, ops)) = commit_iter.peek() {
            if **ts > *start_ts {
                break;
            }
            for op in ops.iter() {
                state.apply_op(op);
            }
            replayed_to = **ts;
            commit_iter.next();
        }
        debug_assert!(replayed_to <= *start_ts);
        let (want_edges, want_sum) = match at_ts {
            Some((ts, e, s)) if ts == *start_ts => (e, s),
            _ => {
                let e = state.edge_count();
                let s = state.checksum(weights);
                at_ts = Some((*start_ts, e, s));
                (e, s)
            }
        };
        if want_edges != *edges || want_sum != *checksum {
            return Ok(verdict(
                format!(
                    "reader {reader} at start_ts {start_ts}: observed ({edges} edges, {checksum:#x}) \
                     but the committed prefix has ({want_edges} edges, {want_sum:#x})",
                ),
                n_commits,
                n_obs,
                max_chain,
            ));
        }
    }
    Ok(HistoryVerdict {
        passed: true,
        violation: None,
        commits: n_commits,
        observations: n_obs,
        max_chain_len: max_chain,
    })
}
