//! End-to-end CLI tests: generate/load roundtrips, report determinism and
//! invariant-driven exit codes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mvgraph-bench"))
}

fn run_ok(args: &[&str]) -> Vec<u8> {
    let out = bin().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn report_json(stdout: &[u8]) -> serde_json::Value {
    serde_json::from_slice(stdout).expect("valid JSON report")
}

#[test]
fn gen_then_load_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.el");
    let out = run_ok(&[
        "gen",
        "--out",
        graph.to_str().unwrap(),
        "--gen-kind",
        "uniform",
        "--gen-n",
        "100",
        "--gen-avg-degree",
        "4",
        "--seed",
        "7",
    ]);
    let r = report_json(&out);
    assert_eq!(r["edges_inserted"], 400);
    assert!(Path::new(&graph).exists());
    // load it back; counts must match
    let out = run_ok(&["load", "--graph", graph.to_str().unwrap()]);
    let r = report_json(&out);
    assert_eq!(r["edges_inserted"], 400);
    assert_eq!(r["final_edge_count"], 400);
    // undirected load mirrors every line
    let hand = dir.path().join("hand.el");
    std::fs::write(&hand, "# three disjoint pairs\n0 1\n2 3\n4 5\n").unwrap();
    let out = run_ok(&["load", "--graph", hand.to_str().unwrap()]);
    assert_eq!(report_json(&out)["final_edge_count"], 3);
    let out = run_ok(&["load", "--graph", hand.to_str().unwrap(), "--undirected"]);
    assert_eq!(report_json(&out)["final_edge_count"], 6);
}

#[test]
fn reports_are_byte_stable_with_zeroed_timings() {
    let args = [
        "bench-insert",
        "--gen-kind",
        "power-law",
        "--gen-n",
        "500",
        "--gen-avg-degree",
        "6",
        "--seed",
        "99",
        "--writers",
        "1",
        "--threads",
        "1",
        "--zero-timings",
    ];
    let a = run_ok(&args);
    let b = run_ok(&args);
    assert_eq!(a, b, "same seed, one thread: identical files");
    let r = report_json(&a);
    assert_eq!(r["workload"]["seed"], 99, "report embeds the seed");
    assert_eq!(r["workload"]["mode"], "insert");
    assert_eq!(r["elapsed_s"], 0.0);
    assert_eq!(
        r["edges_inserted"], r["final_edge_count"],
        "accounting closes for pure inserts"
    );
    assert_eq!(r["invariants"]["violations"], 0);
}

#[test]
fn csv_format_has_documented_header() {
    let out = run_ok(&[
        "bench-insert",
        "--gen-n",
        "200",
        "--gen-avg-degree",
        "4",
        "--format",
        "csv",
        "--zero-timings",
    ]);
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("row,mode,seed,label,ops"));
    assert!(text.lines().any(|l| l.starts_with("run,insert")));
    assert!(text.lines().any(|l| l.starts_with("sample,insert")));
}

#[test]
fn update_mode_keeps_edge_count_stable() {
    let out = run_ok(&[
        "bench-update",
        "--gen-n",
        "400",
        "--gen-avg-degree",
        "5",
        "--writers",
        "2",
        "--seed",
        "3",
    ]);
    let r = report_json(&out);
    assert_eq!(r["invariants"]["violations"], 0);
    assert_eq!(r["edges_inserted"], r["final_edge_count"]);
}

#[test]
fn concurrent_mode_reports_lock_free_readers() {
    let out = run_ok(&[
        "bench-concurrent",
        "--gen-n",
        "300",
        "--gen-avg-degree",
        "4",
        "--readers",
        "2",
        "--writers",
        "2",
        "--duration-s",
        "0.3",
    ]);
    let r = report_json(&out);
    assert_eq!(r["invariants"]["reader_lock_acquisitions"], 0);
    assert_eq!(r["invariants"]["violations"], 0);
    assert!(r["invariants"]["max_chain_len"].as_u64().unwrap() > 0);
}

#[test]
fn ops_and_analytics_modes_run() {
    let out = run_ok(&[
        "bench-ops",
        "--gen-n",
        "500",
        "--gen-avg-degree",
        "6",
        "--ops",
        "2000",
    ]);
    let r = report_json(&out);
    let labels: Vec<String> = r["samples"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["label"].as_str().unwrap().to_string())
        .collect();
    for want in [
        "search_general",
        "search_low_degree",
        "search_high_degree",
        "scan_general",
    ] {
        assert!(
            labels.iter().any(|l| l == want),
            "{want} present in {labels:?}"
        );
    }
    let out = run_ok(&[
        "bench-analytics",
        "--gen-n",
        "300",
        "--gen-avg-degree",
        "4",
        "--undirected",
    ]);
    let r = report_json(&out);
    let labels: Vec<String> = r["samples"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["label"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(labels, vec!["bfs", "pagerank", "sssp", "wcc", "tc"]);
    assert!(r["extra"]["triangles"].as_f64().unwrap() >= 0.0);
}

#[test]
fn config_file_defines_the_store_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("engine.json");
    // serialized engine Config with a nonstandard partition size
    std::fs::write(
        &cfg,
        serde_json::json!({
            "partition_size": 8,
            "leaf_capacity": 32,
            "tracer_slots": 4,
            "max_vertices": 4096,
            "weights_enabled": false,
            "intersect_ratio_threshold": 10,
            "promote_threshold": 16,
            "ci_leaf_fanout": 16,
            "ci_internal_fanout": 16,
            "preinit_vertices": true,
            "mirrored": false,
            "tracer_full_policy": "Spin",
            "pool_mode": "PassThrough"
        })
        .to_string(),
    )
    .unwrap();
    let out = run_ok(&[
        "bench-insert",
        "--config",
        cfg.to_str().unwrap(),
        "--gen-n",
        "200",
        "--gen-avg-degree",
        "4",
        "--zero-timings",
    ]);
    let r = report_json(&out);
    assert_eq!(r["workload"]["partition_size"], 8);
    assert_eq!(r["workload"]["leaf_capacity"], 32);
    assert_eq!(r["workload"]["max_vertices"], 4096);
}

#[test]
fn concurrent_thread_budget_enforced() {
    let out = bin()
        .args([
            "bench-concurrent",
            "--gen-n",
            "100",
            "--readers",
            "8",
            "--writers",
            "8",
            "--threads",
            "4",
            "--duration-s",
            "0.1",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("thread budget"));
}

#[test]
fn parse_errors_exit_nonzero_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("bad.el");
    std::fs::write(&graph, "0 1\nbroken line\n").unwrap();
    let out = bin()
        .args(["load", "--graph", graph.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":2"), "line number reported: {err}");
}
