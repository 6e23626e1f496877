//! Shared domain types: vertex identifiers, edges, logical timestamps,
//! partition arithmetic and the engine configuration.
//!
//! Vertex IDs are dense 4-byte integers. Their big-endian byte sequence is
//! the radix-tree key, so tree order equals numeric order and in-order scans
//! come out ascending.

use serde::{Deserialize, Serialize};

/// Width of a vertex key in bytes.
pub const KEY_WIDTH: usize = 4;

/// A dense vertex identifier in `[0, max_vertices)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub u32);

impl VertexId {
    /// Big-endian byte sequence; index 0 is the most significant byte.
    #[inline]
    pub fn byte_seq(self) -> [u8; KEY_WIDTH] {
        self.0.to_be_bytes()
    }

    /// Inverse of [`byte_seq`](Self::byte_seq).
    #[inline]
    pub fn from_byte_seq(bytes: [u8; KEY_WIDTH]) -> Self {
        VertexId(u32::from_be_bytes(bytes))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Debug for VertexId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl std::fmt::Display for VertexId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for VertexId {
    fn from(v: u32) -> Self {
        VertexId(v)
    }
}

/// A directed edge with an optional fixed-width weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: VertexId,
    pub dst: VertexId,
    pub weight: Option<u32>,
}

impl Edge {
    pub fn new(src: u32, dst: u32) -> Self {
        Edge {
            src: VertexId(src),
            dst: VertexId(dst),
            weight: None,
        }
    }

    pub fn weighted(src: u32, dst: u32, weight: u32) -> Self {
        Edge {
            src: VertexId(src),
            dst: VertexId(dst),
            weight: Some(weight),
        }
    }
}

/// Index of a subgraph (one contiguous block of `partition_size` vertices).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct PartitionId(pub u32);

impl PartitionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Logical clock value. Commit timestamps start at 1; version 0 is the
/// initial (empty) graph.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);
}

impl std::fmt::Display for Timestamp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What a reader does when all tracer slots are busy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TracerFullPolicy {
    /// Spin with exponential backoff until a slot frees up (default).
    Spin,
    /// Fail immediately with [`Error::TracerFull`](crate::Error::TracerFull).
    Error,
}

/// Node and leaf allocation strategy; see [`crate::pool::MemPool`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolMode {
    /// Plain heap allocation (default).
    PassThrough,
    /// Recycle node shells through size-class free lists.
    SizeClass,
}

/// Engine configuration. `Config::default()` gives the documented defaults;
/// call [`validate`](Config::validate) (done by `GraphStore::open`) before use.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Config {
    /// Vertices per subgraph (`|P|`).
    pub partition_size: u32,
    /// Maximum entries per radix-tree leaf segment (`B`).
    pub leaf_capacity: u32,
    /// Reader tracer slots (`k`); defaults to the logical core count.
    pub tracer_slots: usize,
    /// Total vertex-ID capacity; the subgraph directory is sized once from this.
    pub max_vertices: u64,
    /// Store a 4-byte weight per edge.
    pub weights_enabled: bool,
    /// Cardinality ratio above which set intersection probes instead of merging.
    pub intersect_ratio_threshold: u32,
    /// Degree above which a vertex moves from the clustered index to its own tree.
    pub promote_threshold: u32,
    /// Max entries per clustered-index leaf.
    pub ci_leaf_fanout: usize,
    /// Max children per clustered-index internal node.
    pub ci_internal_fanout: usize,
    /// Mark every vertex present at store open (dense-ID datasets); when
    /// false, vertices appear on first touch or explicit insert.
    pub preinit_vertices: bool,
    /// The loader mirrors every edge (undirected graphs). The engine stays
    /// strictly directed; this only widens the vertex-delete lock set so
    /// reverse entries are removed in the same transaction.
    pub mirrored: bool,
    pub tracer_full_policy: TracerFullPolicy,
    pub pool_mode: PoolMode,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            partition_size: 64,
            leaf_capacity: 256,
            tracer_slots: std::thread::available_parallelism().map_or(8, |n| n.get()),
            max_vertices: 1 << 20,
            weights_enabled: false,
            intersect_ratio_threshold: 10,
            promote_threshold: 64,
            ci_leaf_fanout: 64,
            ci_internal_fanout: 64,
            preinit_vertices: true,
            mirrored: false,
            tracer_full_policy: TracerFullPolicy::Spin,
            pool_mode: PoolMode::PassThrough,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), Error> {
        if self.partition_size < 1 {
            return Err(Error::InvalidConfig("partition_size must be >= 1".into()));
        }
        if self.leaf_capacity < 2 || self.leaf_capacity > 65536 {
            return Err(Error::InvalidConfig(
                "leaf_capacity must be in [2, 65536]".into(),
            ));
        }
        if self.tracer_slots < 1 {
            return Err(Error::InvalidConfig("tracer_slots must be >= 1".into()));
        }
        if self.max_vertices < 1 || self.max_vertices > u32::MAX as u64 + 1 {
            return Err(Error::InvalidConfig(
                "max_vertices must be in [1, 2^32]".into(),
            ));
        }
        if self.intersect_ratio_threshold < 1 {
            return Err(Error::InvalidConfig(
                "intersect_ratio_threshold must be >= 1".into(),
            ));
        }
        if self.promote_threshold < 1 {
            return Err(Error::InvalidConfig(
                "promote_threshold must be >= 1".into(),
            ));
        }
        if self.ci_leaf_fanout < 4 || self.ci_internal_fanout < 4 {
            return Err(Error::InvalidConfig(
                "clustered-index fanout must be >= 4".into(),
            ));
        }
        Ok(())
    }

    /// Number of subgraphs: `p = ceil(max_vertices / partition_size)`.
    #[inline]
    pub fn partition_count(&self) -> usize {
        self.max_vertices.div_ceil(self.partition_size as u64) as usize
    }

    /// Subgraph that owns vertex `u` (continuous blocks of `partition_size` IDs).
    #[inline]
    pub fn partition_of(&self, u: VertexId) -> Result<PartitionId, Error> {
        self.check_vertex(u)?;
        Ok(PartitionId(u.0 / self.partition_size))
    }

    #[inline]
    pub fn check_vertex(&self, u: VertexId) -> Result<(), Error> {
        if (u.0 as u64) < self.max_vertices {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange {
                vertex: u.0,
                max: self.max_vertices,
            })
        }
    }

    /// First vertex ID of partition `pid`.
    #[inline]
    pub fn partition_base(&self, pid: PartitionId) -> u32 {
        pid.0 * self.partition_size
    }

    /// Number of valid vertex slots in partition `pid` (the last partition
    /// may be short when `max_vertices` is not a multiple of the size).
    #[inline]
    pub fn partition_len(&self, pid: PartitionId) -> usize {
        let base = self.partition_base(pid) as u64;
        (self.max_vertices - base).min(self.partition_size as u64) as usize
    }
}

/// Engine error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("vertex {vertex} out of range (max_vertices = {max})")]
    VertexOutOfRange { vertex: u32, max: u64 },
    #[error("vertex {0} does not exist")]
    VertexNotFound(u32),
    #[error("vertex {vertex} still has {degree} incident edges")]
    ResidualEdges { vertex: u32, degree: u32 },
    #[error("vertex capacity exhausted")]
    CapacityExhausted,
    #[error("all reader tracer slots are in use")]
    TracerFull,
    #[error("transaction carries {len} operations (limit {max})")]
    BatchTooLarge { len: usize, max: usize },
    #[error("operation undefined on an empty graph")]
    EmptyGraph,
    #[error("history log timestamp {got} not after {prev}")]
    OutOfOrderTimestamp { prev: u64, got: u64 },
    #[error("malformed history record: {0}")]
    MalformedHistory(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(partition_size: u32, max_vertices: u64) -> Config {
        Config {
            partition_size,
            max_vertices,
            ..Config::default()
        }
    }

    #[test]
    fn partition_of_matches_block_layout() {
        let c = cfg(64, 1 << 20);
        assert_eq!(c.partition_of(VertexId(0)).unwrap(), PartitionId(0));
        assert_eq!(c.partition_of(VertexId(64)).unwrap(), PartitionId(1));
        // vertices 6-8 form the third block when |P| = 3
        let c3 = cfg(3, 1 << 20);
        assert_eq!(c3.partition_of(VertexId(7)).unwrap(), PartitionId(2));
        assert_eq!(c3.partition_of(VertexId(6)).unwrap(), PartitionId(2));
        assert_eq!(c3.partition_of(VertexId(8)).unwrap(), PartitionId(2));
    }

    #[test]
    fn partition_of_rejects_out_of_range() {
        let c = cfg(64, 100);
        assert!(matches!(
            c.partition_of(VertexId(100)),
            Err(Error::VertexOutOfRange {
                vertex: 100,
                max: 100
            })
        ));
    }

    #[test]
    fn partition_of_is_surjective_and_order_preserving() {
        let c = cfg(7, 100);
        let p = c.partition_count();
        assert_eq!(p, 15);
        let mut seen = vec![false; p];
        let mut last = PartitionId(0);
        for u in 0..100 {
            let pid = c.partition_of(VertexId(u)).unwrap();
            assert!(pid.index() < p);
            assert!(pid >= last, "order preserved");
            seen[pid.index()] = true;
            last = pid;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn byte_seq_big_endian() {
        assert_eq!(VertexId(0x0102_00FF).byte_seq(), [0x01, 0x02, 0x00, 0xFF]);
        assert_eq!(VertexId(0).byte_seq(), [0, 0, 0, 0]);
    }

    #[test]
    fn byte_seq_roundtrip_and_order() {
        // deterministic LCG as the random source
        let mut x: u64 = 0x9E37_79B9_7F4A_7C15;
        let mut prev: Option<(u32, [u8; 4])> = None;
        for _ in 0..10_000 {
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let u = (x >> 32) as u32;
            let b = VertexId(u).byte_seq();
            assert_eq!(VertexId::from_byte_seq(b), VertexId(u));
            if let Some((pu, pb)) = prev {
                // big-endian bytes compare like the numbers themselves
                assert_eq!(pu.cmp(&u), pb.cmp(&b));
            }
            prev = Some((u, b));
        }
    }

    #[test]
    fn config_validation() {
        assert!(Config::default().validate().is_ok());
        assert!(cfg(0, 10).validate().is_err());
        let c = Config {
            leaf_capacity: 1,
            ..Config::default()
        };
        assert!(c.validate().is_err());
        let c = Config {
            leaf_capacity: 70000,
            ..Config::default()
        };
        assert!(c.validate().is_err());
        let c = Config {
            tracer_slots: 0,
            ..Config::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn partition_len_handles_short_tail() {
        let c = cfg(64, 100);
        assert_eq!(c.partition_count(), 2);
        assert_eq!(c.partition_len(PartitionId(0)), 64);
        assert_eq!(c.partition_len(PartitionId(1)), 36);
        let c1 = cfg(1, 100);
        assert_eq!(c1.partition_count(), 100);
    }
}
