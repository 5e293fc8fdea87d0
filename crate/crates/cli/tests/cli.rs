use std::path::Path;
use std::process::{Command, Output};

fn pipeline(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pipeline"))
        .current_dir(dir)
        .args(args)
        .env_remove("BACKEND_CHAT_URL")
        .env_remove("BACKEND_RERANK_URL")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Synthetic corpus plus a config pointing at it.
fn workspace(extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = pipeline(dir.path(), &["synth", "--docs", "20", "--out", "corpus.jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::write(dir.path().join("config.toml"), format!("[input]\ncorpus = \"corpus.jsonl\"\n{extra}")).unwrap();
    dir
}

fn statuses(o: &Output) -> Vec<(String, String)> {
    stdout(o)
        .lines()
        .map(|l| {
            let (a, b) = l.split_once('\t').unwrap();
            (a.to_string(), b.to_string())
        })
        .collect()
}

#[test]
fn stage_before_upstream_exits_3() {
    let dir = workspace("");
    let o = pipeline(dir.path(), &["mine", "-c", "config.toml"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("gen-bottomup"));
}

#[test]
fn rerun_is_no_op_and_threshold_change_is_partial() {
    let dir = workspace("");
    let first = pipeline(dir.path(), &["all", "-c", "config.toml"]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(statuses(&first).iter().all(|(_, s)| s == "ran"));
    assert_eq!(statuses(&first).len(), 10);

    let second = pipeline(dir.path(), &["all", "-c", "config.toml"]);
    assert!(statuses(&second).iter().all(|(_, s)| s == "up-to-date"), "{}", stdout(&second));

    std::fs::write(
        dir.path().join("config.toml"),
        "[input]\ncorpus = \"corpus.jsonl\"\n[mining]\nthreshold = 0.9\n",
    )
    .unwrap();
    let third = pipeline(dir.path(), &["all", "-c", "config.toml"]);
    let rerun: Vec<String> = statuses(&third).into_iter().filter(|(_, s)| s == "ran").map(|(n, _)| n).collect();
    assert_eq!(rerun, ["mine", "emit", "audit", "eval"]);
    assert!(dir.path().join("artifacts/dataset/stats.tsv").exists());
    assert!(dir.path().join("artifacts/eval/metrics.tsv").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = workspace("bogus = 1\n");
    let o = pipeline(dir.path(), &["ingest", "-c", "config.toml"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = workspace("[chunk]\npassage_len = 0\n[mining]\nthreshold = 2.0\n");
    let o = pipeline(dir.path(), &["ingest", "-c", "config.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("chunk.passage_len") && err.contains("mining.threshold"), "{err}");
}

#[test]
fn unreachable_backend_exits_4() {
    let dir = workspace("[llm]\nretries = 0\n[backends]\ntimeout_secs = 1\n[backends.chat]\nurl = \"http://127.0.0.1:9\"\n");
    for stage in ["ingest", "chunk", "clean"] {
        let o = pipeline(dir.path(), &[stage, "-c", "config.toml"]);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    let o = pipeline(dir.path(), &["gen-bottomup", "-c", "config.toml"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn estimate_cost_explicit_and_from_corpus() {
    let dir = workspace("");
    let o = pipeline(dir.path(), &["estimate-cost", "--n", "100", "--t", "500"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("quantity\tvalue\n"));
    assert!(out.contains("NC1\t500.0000") && out.contains("NC2\t100.0000"), "{out}");

    let o = pipeline(dir.path(), &["estimate-cost"]);
    assert_eq!(o.status.code(), Some(3));
    pipeline(dir.path(), &["ingest", "-c", "config.toml"]);
    let o = pipeline(dir.path(), &["estimate-cost"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("n\t20.0000"));
}

#[test]
fn correlate_prints_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let a = "model\tx\ty\nm1\t0.1\t0.5\nm2\t0.2\t0.4\nm3\t0.3\t0.9\n";
    let b = "model\tz\nm1\t1.0\nm2\t2.0\nm3\t3.0\nm4\t9.0\n";
    std::fs::write(dir.path().join("a.tsv"), a).unwrap();
    std::fs::write(dir.path().join("b.tsv"), b).unwrap();
    let o = pipeline(dir.path(), &["correlate", "a.tsv", "b.tsv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("x\t1.0000")), "{out}");
}
