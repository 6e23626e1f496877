//! An in-memory multi-version dynamic graph storage engine.
//!
//! The graph is split into fixed-size vertex partitions (subgraphs), each
//! versioned as a whole: writers build new copy-on-write snapshots under
//! per-subgraph locks and publish them on version chains, while readers pick
//! a consistent set of snapshots by timestamp and then run without any
//! locks. Neighbor sets live in a compressed adaptive radix tree for
//! high-degree vertices and a per-subgraph clustered B+-tree for everyone
//! else.
//!
//! Entry points: [`GraphStore::open`] for the engine,
//! [`analytics`] for snapshot-consistent kernels, [`oracle`] for the serial
//! reference model and history checking used in tests and benchmarks.

pub mod analytics;
pub mod cart;
pub mod clustered;
pub mod instr;
pub mod mvcc;
pub mod oracle;
pub mod pool;
pub mod store;
pub mod subgraph;
pub mod types;

pub use store::{GraphStore, ReadHandle, StoreStats, WriteOp};
pub use types::{
    Config, Edge, Error, PartitionId, PoolMode, Result, Timestamp, TracerFullPolicy, VertexId,
};
