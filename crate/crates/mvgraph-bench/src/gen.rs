//! Deterministic synthetic edge-stream generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum GraphKind {
    Uniform,
    PowerLaw,
}

/// Distinct directed edges (no self-loops), fully determined by the seed.
pub fn generate(kind: GraphKind, n: u32, avg_degree: u32, seed: u64) -> Vec<(u32, u32)> {
    match kind {
        GraphKind::Uniform => uniform(n, n as u64 * avg_degree as u64, seed),
        GraphKind::PowerLaw => power_law(n, avg_degree, seed),
    }
}

fn uniform(n: u32, m: u64, seed: u64) -> Vec<(u32, u32)> {
    assert!(n >= 2, "need at least two vertices");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = m.min(n as u64 * (n as u64 - 1));
    let mut seen = HashSet::with_capacity(m as usize);
    let mut out = Vec::with_capacity(m as usize);
    while (out.len() as u64) < m {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v && seen.insert((u, v)) {
            out.push((u, v));
        }
    }
    out
}

/// Heavy-tailed out-degrees: vertex `i` gets ~`c / (i + 1)` neighbors with
/// uniform destinations, so a few sources are very hot and the tail is thin.
fn power_law(n: u32, avg_degree: u32, seed: u64) -> Vec<(u32, u32)> {
    assert!(n >= 2, "need at least two vertices");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = n as u64 * avg_degree as u64;
    let harmonic: f64 = (1..=n as u64).map(|i| 1.0 / i as f64).sum();
    let c = m as f64 / harmonic;
    let mut out = Vec::with_capacity(m as usize);
    for i in 0..n {
        let want = ((c / (i + 1) as f64).round() as u64).min(n as u64 - 1);
        let mut dsts = HashSet::with_capacity(want as usize);
        while (dsts.len() as u64) < want {
            let v = rng.gen_range(0..n);
            if v != i {
                dsts.insert(v);
            }
        }
        let mut dsts: Vec<u32> = dsts.into_iter().collect();
        dsts.sort_unstable();
        for v in dsts {
            out.push((i, v));
        }
    }
    out
}

/// Out-degree distribution summary of an edge stream.
pub fn degree_summary(n: u32, edges: &[(u32, u32)]) -> (f64, u32) {
    let mut deg = vec![0u32; n as usize];
    for (u, _) in edges {
        deg[*u as usize] += 1;
    }
    let avg = edges.len() as f64 / n as f64;
    let max = deg.iter().copied().max().unwrap_or(0);
    (avg, max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_stream_for_identical_seed() {
        let a = generate(GraphKind::Uniform, 10, 2, 7);
        let b = generate(GraphKind::Uniform, 10, 2, 7);
        assert_eq!(a, b);
        let c = generate(GraphKind::PowerLaw, 100, 4, 9);
        let d = generate(GraphKind::PowerLaw, 100, 4, 9);
        assert_eq!(c, d);
        assert_ne!(generate(GraphKind::Uniform, 10, 2, 8), a, "seed matters");
    }

    #[test]
    fn power_law_has_heavy_tail() {
        let n = 2000;
        let edges = generate(GraphKind::PowerLaw, n, 8, 3);
        let (avg, max) = degree_summary(n, &edges);
        assert!(
            max as f64 > 20.0 * avg,
            "max degree {max} ≫ average {avg:.1}"
        );
    }

    #[test]
    fn uniform_degrees_concentrate_near_average() {
        let n = 2000;
        let edges = generate(GraphKind::Uniform, n, 8, 3);
        let (avg, max) = degree_summary(n, &edges);
        assert!((avg - 8.0).abs() < 0.5);
        assert!(
            (max as f64) < 6.0 * avg,
            "no uniform vertex is extreme: max {max}"
        );
    }

    #[test]
    fn streams_have_no_duplicates_or_loops() {
        for kind in [GraphKind::Uniform, GraphKind::PowerLaw] {
            let edges = generate(kind, 500, 6, 11);
            let set: HashSet<_> = edges.iter().collect();
            assert_eq!(set.len(), edges.len(), "{kind:?} unique");
            assert!(edges.iter().all(|(u, v)| u != v), "{kind:?} loop-free");
        }
    }
}
