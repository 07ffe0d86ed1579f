//! Drives the compiled binary over the bundled fixtures and checks exit
//! codes, diagnostics, and artifact bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn refgraph() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_refgraph"));
    // Isolate tests from any config the invoking shell points at.
    cmd.env_remove("REFGRAPH_CONFIG");
    cmd
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).expect("artifact was written")
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary is runnable");
    assert!(
        out.status.success(),
        "expected success, stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(cmd: &mut Command, code: i32) -> String {
    let out = cmd.output().expect("binary is runnable");
    assert_eq!(
        out.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn analyze_chain(out_dir: &Path) {
    run_ok(refgraph()
        .arg("analyze")
        .arg("--traffic")
        .arg(fixture("chain/traffic.jsonl"))
        .arg("--indicators")
        .arg(fixture("chain/indicators.txt"))
        .arg("--out")
        .arg(out_dir));
}

#[test]
fn analyze_chain_fixture_reproduces_the_hand_walked_matrices() {
    let dir = tempfile::tempdir().unwrap();
    analyze_chain(dir.path());
    assert_eq!(
        read(dir.path(), "confusion.csv"),
        "hop,fp,fn,tp,tn\n\
         0,1,0,1,0\n\
         1,0,0,1,0\n\
         2,0,0,1,0\n\
         3,0,0,0,0\n\
         4,0,0,0,0\n"
    );
    assert_eq!(
        read(dir.path(), "hopmap.csv"),
        "domain,distance\nt.example,0\nb.example,1\na.example,2\n"
    );
}

#[test]
fn analyze_summary_reports_the_run_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = refgraph()
        .arg("analyze")
        .arg("--traffic")
        .arg(fixture("chain/traffic.jsonl"))
        .arg("--indicators")
        .arg(fixture("chain/indicators.txt"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .expect("binary is runnable");
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(stdout.contains("records accepted: 3"));
    assert!(stdout.contains("threats labeled: 1"));
    assert!(stdout.contains("paths reconstructed: 1"));
    assert_eq!(stdout, read(dir.path(), "summary.txt"));
}

#[test]
fn analyze_without_indicators_yields_only_true_negatives() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(refgraph()
        .arg("analyze")
        .arg("--traffic")
        .arg(fixture("chain/traffic.jsonl"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(
        read(dir.path(), "confusion.csv"),
        "hop,fp,fn,tp,tn\n\
         0,0,0,0,3\n\
         1,0,0,0,3\n\
         2,0,0,0,3\n\
         3,0,0,0,3\n\
         4,0,0,0,3\n"
    );
}

#[test]
fn analyze_nonexistent_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let stderr = run_err(
        refgraph()
            .arg("analyze")
            .arg("--traffic")
            .arg(dir.path().join("missing.jsonl"))
            .arg("--out")
            .arg(dir.path()),
        2,
    );
    assert!(stderr.contains("cannot read"), "stderr: {stderr}");
}

#[test]
fn analyze_empty_traffic_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let stderr = run_err(
        refgraph()
            .arg("analyze")
            .arg("--traffic")
            .arg(&empty)
            .arg("--out")
            .arg(dir.path()),
        1,
    );
    assert!(stderr.contains("no records"), "stderr: {stderr}");
}

#[test]
fn analyze_rejects_a_zero_hop_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let stderr = run_err(
        refgraph()
            .arg("analyze")
            .arg("--traffic")
            .arg(fixture("chain/traffic.jsonl"))
            .arg("--max-hops")
            .arg("0")
            .arg("--out")
            .arg(dir.path()),
        2,
    );
    assert!(stderr.contains("at least 1"), "stderr: {stderr}");
}

#[test]
fn score_reuses_the_snapshot_a_prior_analyze_wrote() {
    let dir = tempfile::tempdir().unwrap();
    analyze_chain(dir.path());
    run_ok(refgraph().arg("score").arg("--out").arg(dir.path()));
    assert_eq!(
        read(dir.path(), "scores.csv"),
        "domain,score,band,contributions\n\
         b.example,4.0000,silent,t.example@1\n\
         a.example,2.0000,silent,t.example@2\n"
    );
}

#[test]
fn score_from_traffic_flags_the_two_threat_neighbor() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(refgraph()
        .arg("score")
        .arg("--traffic")
        .arg(fixture("twothreat/traffic.jsonl"))
        .arg("--indicators")
        .arg(fixture("twothreat/indicators.txt"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(
        read(dir.path(), "scores.csv"),
        "domain,score,band,contributions\n\
         x.example,8.0000,block,t1.example@1|t2.example@1\n"
    );
}

#[test]
fn score_without_any_graph_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let stderr = run_err(refgraph().arg("score").arg("--out").arg(dir.path()), 2);
    assert!(stderr.contains("no graph available"), "stderr: {stderr}");
}

#[test]
fn score_of_an_empty_snapshot_succeeds_with_a_bare_header() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("nodes.csv"), "domain,visit_count,is_threat\n").unwrap();
    fs::write(
        dir.path().join("edges.csv"),
        "from,to,weight,first_seq,last_seq\n",
    )
    .unwrap();
    run_ok(refgraph().arg("score").arg("--out").arg(dir.path()));
    assert_eq!(
        read(dir.path(), "scores.csv"),
        "domain,score,band,contributions\n"
    );
}

#[test]
fn export_renders_the_focus_neighborhood() {
    let dir = tempfile::tempdir().unwrap();
    analyze_chain(dir.path());

    run_ok(refgraph()
        .arg("export")
        .arg("--out")
        .arg(dir.path())
        .arg("--focus")
        .arg("t.example")
        .arg("--radius")
        .arg("2"));
    let dot = read(dir.path(), "graph.dot");
    for domain in ["a.example", "b.example", "t.example"] {
        assert!(dot.contains(domain), "missing {domain} in: {dot}");
    }
    assert!(dot.contains("octagon"));

    run_ok(refgraph()
        .arg("export")
        .arg("--out")
        .arg(dir.path())
        .arg("--focus")
        .arg("t.example")
        .arg("--radius")
        .arg("0"));
    let dot = read(dir.path(), "graph.dot");
    assert!(dot.contains("t.example"));
    assert!(!dot.contains("a.example"));
    assert!(!dot.contains("->"));
}

#[test]
fn export_with_an_unknown_focus_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    analyze_chain(dir.path());
    let stderr = run_err(
        refgraph()
            .arg("export")
            .arg("--out")
            .arg(dir.path())
            .arg("--focus")
            .arg("nowhere.example"),
        2,
    );
    assert!(stderr.contains("nowhere.example"), "stderr: {stderr}");
}

#[test]
fn synth_runs_are_byte_identical_for_one_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        run_ok(refgraph()
            .arg("synth")
            .arg("--seed")
            .arg("42")
            .arg("--n-sites")
            .arg("30")
            .arg("--n-threats")
            .arg("3")
            .arg("--edge-density")
            .arg("0.1")
            .arg("--n-paths")
            .arg("40")
            .arg("--click-through")
            .arg("0.6")
            .arg("--max-len")
            .arg("6")
            .arg("--out")
            .arg(dir));
    }
    for name in ["records.jsonl", "indicators.txt", "manifest.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
}

#[test]
fn synth_rejects_invalid_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let stderr = run_err(
        refgraph()
            .arg("synth")
            .arg("--n-threats")
            .arg("500")
            .arg("--n-sites")
            .arg("10")
            .arg("--out")
            .arg(dir.path()),
        2,
    );
    assert!(!stderr.is_empty());
}

#[test]
fn roc_reemits_the_same_artifacts_analyze_wrote() {
    let dir = tempfile::tempdir().unwrap();
    analyze_chain(dir.path());
    let redo = tempfile::tempdir().unwrap();
    run_ok(refgraph()
        .arg("roc")
        .arg(dir.path().join("confusion.csv"))
        .arg("--out")
        .arg(redo.path()));
    assert_eq!(read(dir.path(), "roc.csv"), read(redo.path(), "roc.csv"));
    assert_eq!(read(dir.path(), "roc.svg"), read(redo.path(), "roc.svg"));
}

#[test]
fn roc_on_a_malformed_csv_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "hop,fp,fn,tp,tn\n0,one,0,0,0\n").unwrap();
    let stderr = run_err(refgraph().arg("roc").arg(&bad).arg("--out").arg(dir.path()), 1);
    assert!(!stderr.is_empty());
}

#[test]
fn config_file_supplies_settings_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let conf = dir.path().join("refgraph.conf");
    fs::write(
        &conf,
        format!(
            "# test config\ntraffic={}\nindicators={}\nmax_hops=1\nout={}\n",
            fixture("chain/traffic.jsonl").display(),
            fixture("chain/indicators.txt").display(),
            out_a.display()
        ),
    )
    .unwrap();

    // Everything from the file: only distance <= 1 domains are mapped.
    run_ok(refgraph().arg("analyze").env("REFGRAPH_CONFIG", &conf));
    assert_eq!(
        read(&out_a, "hopmap.csv"),
        "domain,distance\nt.example,0\nb.example,1\n"
    );

    // Flags override the file's hop horizon and output directory.
    run_ok(refgraph()
        .arg("analyze")
        .arg("--max-hops")
        .arg("4")
        .arg("--out")
        .arg(&out_b)
        .env("REFGRAPH_CONFIG", &conf));
    assert_eq!(
        read(&out_b, "hopmap.csv"),
        "domain,distance\nt.example,0\nb.example,1\na.example,2\n"
    );
}

#[test]
fn config_file_with_an_unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("refgraph.conf");
    fs::write(&conf, "max_hopz=3\n").unwrap();
    let stderr = run_err(
        refgraph()
            .arg("analyze")
            .arg("--traffic")
            .arg(fixture("chain/traffic.jsonl"))
            .arg("--out")
            .arg(dir.path())
            .env("REFGRAPH_CONFIG", &conf),
        2,
    );
    assert!(stderr.contains("max_hopz"), "stderr: {stderr}");
}

#[test]
fn two_analyze_runs_write_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    analyze_chain(a.path());
    analyze_chain(b.path());
    for name in [
        "confusion.csv",
        "metrics.csv",
        "roc.csv",
        "roc.svg",
        "nodes.csv",
        "edges.csv",
        "hopmap.csv",
        "summary.txt",
    ] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
}
