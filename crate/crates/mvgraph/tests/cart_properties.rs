//! Property tests for the radix tree: membership against a sorted-set
//! oracle, copy-on-write isolation across retained versions, intersection
//! strategy equivalence and structural invariants after every operation.

use std::collections::BTreeSet;

use proptest::prelude::*;

use mvgraph::cart::validate::{check_refcounts, check_tree};
use mvgraph::cart::{CartCtx, CartTree, IntersectStrategy};
use mvgraph::pool::MemPool;
use mvgraph::types::PoolMode;
use mvgraph::VertexId;

#[derive(Clone, Debug)]
enum Op {
    Insert(u32),
    Remove(u32),
}

fn ops_strategy(universe: u32, len: usize) -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![
            3 => (0..universe).prop_map(Op::Insert),
            1 => (0..universe).prop_map(Op::Remove),
        ],
        1..len,
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn scan_and_search_match_sorted_set_oracle(
        ops in ops_strategy(1 << 16, 400),
        cap in prop_oneof![Just(4u32), Just(8), Just(16), Just(256)],
    ) {
        let pool = MemPool::new(PoolMode::PassThrough);
        let ctx = CartCtx { pool: &pool, leaf_cap: cap, weights: false };
        let mut oracle = BTreeSet::new();
        let mut tree = CartTree::empty();
        for op in &ops {
            let (next, changed) = match op {
                Op::Insert(v) => {
                    let changed = oracle.insert(*v);
                    let r = tree.insert(VertexId(*v), None, &ctx);
                    prop_assert_eq!(r.1, changed);
                    r
                }
                Op::Remove(v) => {
                    let changed = oracle.remove(v);
                    let r = tree.remove(VertexId(*v), &ctx);
                    prop_assert_eq!(r.1, changed);
                    r
                }
            };
            let _ = changed;
            tree.release(&pool);
            tree = next;
        }
        check_tree(&tree, cap);
        let got: Vec<u32> = tree.to_vec().iter().map(|v| v.0).collect();
        let want: Vec<u32> = oracle.iter().copied().collect();
        prop_assert_eq!(got, want);
        // membership probes for present and absent keys
        for probe in (0u32..1 << 16).step_by(997) {
            prop_assert_eq!(tree.search(VertexId(probe)).is_some(), oracle.contains(&probe));
        }
        tree.release(&pool);
        prop_assert_eq!(pool.live_total(), 0);
    }

    #[test]
    fn cow_versions_never_change(
        ops in ops_strategy(4096, 300),
        cap in prop_oneof![Just(4u32), Just(16)],
    ) {
        let pool = MemPool::new(PoolMode::PassThrough);
        let ctx = CartCtx { pool: &pool, leaf_cap: cap, weights: false };
        let mut tree = CartTree::empty();
        let mut keep: Vec<(CartTree, Vec<u32>)> = Vec::new();
        for (i, op) in ops.iter().enumerate() {
            let (next, _) = match op {
                Op::Insert(v) => tree.insert(VertexId(*v), None, &ctx),
                Op::Remove(v) => tree.remove(VertexId(*v), &ctx),
            };
            if i % 25 == 0 {
                let frozen: Vec<u32> = tree.to_vec().iter().map(|v| v.0).collect();
                keep.push((tree.clone_ref(), frozen));
            }
            tree.release(&pool);
            tree = next;
        }
        for (snap, want) in &keep {
            let got: Vec<u32> = snap.to_vec().iter().map(|v| v.0).collect();
            prop_assert_eq!(&got, want, "retained snapshot is immutable");
        }
        {
            let mut roots: Vec<&CartTree> = keep.iter().map(|(t, _)| t).collect();
            roots.push(&tree);
            check_refcounts(&roots);
        }
        for (snap, _) in keep {
            snap.release(&pool);
        }
        tree.release(&pool);
        prop_assert_eq!(pool.live_total(), 0, "no leaks after releasing every version");
    }

    #[test]
    fn intersections_agree_with_set_oracle(
        a in prop::collection::btree_set(0u32..2000, 0..300),
        b in prop::collection::btree_set(0u32..2000, 0..300),
    ) {
        let pool = MemPool::new(PoolMode::PassThrough);
        let ctx = CartCtx { pool: &pool, leaf_cap: 16, weights: false };
        let ea: Vec<(u32, Option<u32>)> = a.iter().map(|v| (*v, None)).collect();
        let eb: Vec<(u32, Option<u32>)> = b.iter().map(|v| (*v, None)).collect();
        let ta = CartTree::from_sorted(&ea, &ctx);
        let tb = CartTree::from_sorted(&eb, &ctx);
        let want: Vec<u32> = a.intersection(&b).copied().collect();
        for strat in [IntersectStrategy::Auto, IntersectStrategy::Merge, IntersectStrategy::Probe] {
            let got: Vec<u32> = CartTree::intersect(&ta, &tb, 10, strat)
                .iter()
                .map(|v| v.0)
                .collect();
            prop_assert_eq!(&got, &want);
        }
        ta.release(&pool);
        tb.release(&pool);
        prop_assert_eq!(pool.live_total(), 0);
    }
}

/// Long mixed run at a realistic leaf capacity, with snapshots retained and
/// re-checked at every prefix (the replay-oracle shape, sized for CI).
#[test]
fn replay_oracle_long_run() {
    let pool = MemPool::new(PoolMode::PassThrough);
    let ctx = CartCtx {
        pool: &pool,
        leaf_cap: 256,
        weights: false,
    };
    let mut x = 0x0DDB_1A5E_5BAD_5EEDu64;
    let mut rng = move || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        x
    };
    let mut oracle = BTreeSet::new();
    let mut tree = CartTree::empty();
    let mut snaps: Vec<(CartTree, u64)> = Vec::new();
    for step in 0..100_000u64 {
        let v = (rng() % (1 << 14)) as u32;
        let (next, _) = if rng() % 3 == 0 {
            oracle.remove(&v);
            tree.remove(VertexId(v), &ctx)
        } else {
            oracle.insert(v);
            tree.insert(VertexId(v), None, &ctx)
        };
        tree.release(&pool);
        tree = next;
        if step % 10_000 == 0 {
            snaps.push((tree.clone_ref(), step));
            check_tree(&tree, 256);
            let got: Vec<u32> = tree.to_vec().iter().map(|v| v.0).collect();
            let want: Vec<u32> = oracle.iter().copied().collect();
            assert_eq!(got, want, "prefix at step {step}");
        }
    }
    let got: Vec<u32> = tree.to_vec().iter().map(|v| v.0).collect();
    let want: Vec<u32> = oracle.iter().copied().collect();
    assert_eq!(got, want);
    for (s, _) in snaps {
        s.release(&pool);
    }
    tree.release(&pool);
    assert_eq!(pool.live_total(), 0);
}
