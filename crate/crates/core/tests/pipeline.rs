use std::path::Path;

use hqrel::pipeline::{Pipeline, PipelineConfig, PipelineError, Stage, StageStatus, ARTIFACTS_DIR};
use hqrel::synth::{render_input_jsonl, synthetic_corpus};

fn setup(dir: &Path) -> PipelineConfig {
    let corpus = dir.join("corpus.jsonl");
    std::fs::write(&corpus, render_input_jsonl(&synthetic_corpus(20, 3))).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.input.corpus = corpus;
    cfg
}

fn ran(p: &Pipeline) -> Vec<Stage> {
    p.run_all()
        .unwrap()
        .into_iter()
        .filter(|r| r.status == StageStatus::Ran)
        .map(|r| r.stage)
        .collect()
}

#[test]
fn second_run_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(setup(dir.path()), dir.path());
    assert_eq!(ran(&p), Stage::ALL);
    assert!(ran(&p).is_empty());
}

#[test]
fn threshold_change_reruns_mine_and_downstream_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = setup(dir.path());
    ran(&Pipeline::new(cfg.clone(), dir.path()));
    cfg.mining.threshold = 0.9;
    let again = ran(&Pipeline::new(cfg, dir.path()));
    assert_eq!(again, [Stage::Mine, Stage::Emit, Stage::Audit, Stage::Eval]);
}

#[test]
fn tampered_output_is_regenerated() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(setup(dir.path()), dir.path());
    ran(&p);
    let target = dir.path().join(ARTIFACTS_DIR).join("passages.jsonl");
    let original = std::fs::read(&target).unwrap();
    std::fs::write(&target, b"{}\n").unwrap();
    let again = ran(&p);
    assert_eq!(again.first(), Some(&Stage::Chunk));
    assert_eq!(std::fs::read(&target).unwrap(), original);
    // identical content downstream, so nothing past chunk had to change
    assert_eq!(again, [Stage::Chunk]);
}

#[test]
fn corpus_edit_invalidates_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    ran(&Pipeline::new(cfg.clone(), dir.path()));
    std::fs::write(&cfg.input.corpus, render_input_jsonl(&synthetic_corpus(21, 3))).unwrap();
    let r = Pipeline::new(cfg, dir.path()).run_stage(Stage::Ingest).unwrap();
    assert_eq!(r.status, StageStatus::Ran);
    assert!(r.stale);
}

#[test]
fn deleted_upstream_output_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(setup(dir.path()), dir.path());
    ran(&p);
    std::fs::remove_file(dir.path().join(ARTIFACTS_DIR).join("topic_model.json")).unwrap();
    match p.run_stage(Stage::GenTopDown) {
        Err(e @ PipelineError::UpstreamMissing { missing: Stage::Cluster, .. }) => assert_eq!(e.exit_code(), 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn no_temporary_files_left_behind() {
    let dir = tempfile::tempdir().unwrap();
    ran(&Pipeline::new(setup(dir.path()), dir.path()));
    let mut stack = vec![dir.path().to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.file_name().unwrap().to_string_lossy().to_string();
                assert!(!name.starts_with(".tmp"), "leftover {name}");
            }
        }
    }
}
