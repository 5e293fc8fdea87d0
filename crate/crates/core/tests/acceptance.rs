//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::{Days, NaiveDate};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hqrel::audit::{bin_and_sample, bin_bounds, bin_index, rates, JudgeScore, BIN_LOWER};
use hqrel::bottom_up::{Query, QueryLevel, QuerySource};
use hqrel::corpus::{chunk_document, Document};
use hqrel::dataset::{estimate_cost, STATS_HEADER};
use hqrel::eval::{ndcg_at_k, pearson, recall_at_k, Qrels, RunResult};
use hqrel::gateway::Backends;
use hqrel::pipeline::{file_digest, Pipeline, PipelineConfig, Stage, ARTIFACTS_DIR};
use hqrel::relevance::{
    mine_level, passage_spaces, sentence_spaces, MiningConfig, ScoredPair, SpaceKind, SpaceMember, TraversalSpace,
};
use hqrel::synth::{render_input_jsonl, synthetic_corpus};
use hqrel::top_down::{cluster_topics, encode_days, encode_time, TitleAssignment};

type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------- chunking

const CJK: &[char] = &['市', '场', '需', '求', '回', '暖', '价', '格', '钢', '材', '银', '行', '利', '润', '增', '长'];

fn random_doc(rng: &mut ChaCha8Rng, i: usize) -> Document {
    let mut text = String::new();
    let target = rng.gen_range(50..3000);
    while text.chars().count() < target {
        match rng.gen_range(0..10) {
            // long run with no terminator at all
            0 => (0..rng.gen_range(100..700)).for_each(|_| text.push(*CJK.choose(rng).unwrap())),
            1 => text.push_str(["；", "，", "abc ", "12.5%", "\u{3000}"].choose(rng).unwrap()),
            2..=4 => text.push(*['。', '！', '？', '!', '?'].choose(rng).unwrap()),
            _ => (0..rng.gen_range(1..40)).for_each(|_| text.push(*CJK.choose(rng).unwrap())),
        }
    }
    Document {
        doc_id: format!("rnd{i:03}"),
        title: "随机文档".into(),
        text: text.trim().to_string(),
        publish_date: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
        report_type: String::new(),
        company: None,
        ordinal: i,
    }
}

fn c1_chunking() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut docs = synthetic_corpus(100, 11);
    docs.extend((100..200).map(|i| random_doc(&mut rng, i)));
    let start = Instant::now();
    let mut unsplittable = 0;
    for d in &docs {
        let ps = chunk_document(d, 500, 100);
        let joined: String = ps.iter().map(|p| p.text.as_str()).collect();
        ensure(joined == d.text, || format!("{}: passages do not reproduce the text", d.doc_id))?;
        for p in &ps {
            let n = p.text.chars().count();
            ensure(n <= 500 && n == p.char_len, || format!("{}: passage length {n}", p.passage_id))?;
            let sj: String = p.sentences.iter().map(|s| s.text.as_str()).collect();
            ensure(sj == p.text, || format!("{}: sentences do not reproduce the passage", p.passage_id))?;
            for s in &p.sentences {
                let sn = s.text.chars().count();
                ensure(sn <= 100 || s.unsplittable, || format!("{}: sentence length {sn} unflagged", s.sentence_id))?;
                unsplittable += usize::from(s.unsplittable);
            }
        }
    }
    let took = start.elapsed();
    ensure(unsplittable > 0, || "fixture never produced an unsplittable sentence".into())?;
    ensure(took < Duration::from_secs(1), || format!("took {took:?}"))
}

// ------------------------------------------------------------------ mining

fn phrase(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(10..40);
    (0..n).map(|_| *CJK.choose(rng).unwrap()).collect()
}

/// Exact copies, one-char edits and appends of a small phrase pool, so
/// scores land on both sides of every threshold.
fn variant(rng: &mut ChaCha8Rng, pool: &[String]) -> String {
    let base = pool.choose(rng).unwrap().clone();
    match rng.gen_range(0..10) {
        0..=3 => base,
        4..=5 => {
            let mut cs: Vec<char> = base.chars().collect();
            let i = rng.gen_range(0..cs.len());
            cs[i] = *CJK.choose(rng).unwrap();
            cs.into_iter().collect()
        }
        6..=7 => format!("{base}{}", CJK.choose(rng).unwrap()),
        _ => phrase(rng),
    }
}

struct Fixture {
    queries: Vec<Query>,
    assignments: Vec<TitleAssignment>,
    topic: Vec<TraversalSpace>,
}

fn fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<String> = (0..6).map(|_| phrase(&mut rng)).collect();
    let ndocs = rng.gen_range(2..6);
    let mut queries = Vec::new();
    let mut assignments = Vec::new();
    for d in 0..ndocs {
        let doc = format!("d{d}");
        let subtree = format!("t{}", d % 2);
        assignments.push(TitleAssignment {
            doc_id: doc.clone(),
            title_doc_id: Some(doc.clone()),
            leaf: Some(subtree.clone()),
            subtree: Some(subtree),
            flags: vec![],
        });
        for p in 0..rng.gen_range(1..5) {
            let pid = format!("{doc}-p{p}");
            let src = |sid: Option<String>| QuerySource {
                doc_id: Some(doc.clone()),
                passage_id: Some(pid.clone()),
                sentence_id: sid,
                topic_id: None,
            };
            queries.push(Query {
                query_id: format!("{pid}-q"),
                text: variant(&mut rng, &pool),
                level: QueryLevel::Passage,
                source: src(None),
            });
            for s in 0..rng.gen_range(1..5) {
                queries.push(Query {
                    query_id: format!("{pid}-s{s}-q"),
                    text: variant(&mut rng, &pool),
                    level: QueryLevel::Sentence,
                    source: src(Some(format!("{pid}-s{s}"))),
                });
            }
        }
    }
    let topic = ["t0", "t1"]
        .iter()
        .map(|t| {
            let targets: Vec<SpaceMember> = queries
                .iter()
                .filter(|q| q.level == QueryLevel::Passage)
                .filter(|q| {
                    let doc = q.source.doc_id.as_deref().unwrap();
                    assignments.iter().any(|a| a.doc_id == doc && a.subtree.as_deref() == Some(*t))
                })
                .map(|q| SpaceMember {
                    query_id: q.query_id.clone(),
                    text: q.text.clone(),
                    passage_id: q.source.passage_id.clone().unwrap(),
                })
                .collect();
            let subqueries = (0..rng.gen_range(1..4))
                .map(|k| (format!("{t}-i0-sq{k}"), variant(&mut rng, &pool)))
                .collect();
            TraversalSpace {
                id: t.to_string(),
                level: QueryLevel::Topic,
                kind: SpaceKind::Directed { intent_id: format!("{t}-i0"), subqueries, targets },
            }
        })
        .collect();
    Fixture { queries, assignments, topic }
}

impl Fixture {
    fn spaces(&self) -> Vec<TraversalSpace> {
        let mut s = sentence_spaces(&self.queries);
        s.extend(passage_spaces(&self.queries, &self.assignments).0);
        s.extend(self.topic.iter().cloned());
        s
    }
}

type LabelKey = (QueryLevel, String, String);

fn mined(spaces: &[TraversalSpace], threshold: f64, backends: &Backends) -> BTreeMap<LabelKey, f64> {
    let cfg = MiningConfig { threshold, audit_floor: 0.85, ..MiningConfig::default() };
    let mut out = BTreeMap::new();
    for level in [QueryLevel::Sentence, QueryLevel::Passage, QueryLevel::Topic] {
        for l in mine_level(level, spaces, &cfg, backends).expect("mock rerank").labels {
            out.insert((level, l.query_id, l.passage_id), l.score);
        }
    }
    out
}

/// Exhaustive scoring written against the space definitions only.
fn oracle(spaces: &[TraversalSpace], threshold: f64, backends: &Backends) -> BTreeMap<LabelKey, f64> {
    let mut out: BTreeMap<LabelKey, f64> = BTreeMap::new();
    let score = |a: &str, b: &str| backends.rerank(a, b).unwrap().value();
    let mut put = |k: LabelKey, s: f64| {
        let e = out.entry(k).or_insert(s);
        *e = e.max(s);
    };
    for sp in spaces {
        match &sp.kind {
            SpaceKind::Undirected { members } => {
                for a in members {
                    for b in members {
                        if a.query_id < b.query_id && a.passage_id != b.passage_id {
                            let s = score(&a.text, &b.text);
                            if s >= threshold {
                                put((sp.level, a.query_id.clone(), b.passage_id.clone()), s);
                                put((sp.level, b.query_id.clone(), a.passage_id.clone()), s);
                            }
                        }
                    }
                }
            }
            SpaceKind::Directed { intent_id, subqueries, targets } => {
                for (_, text) in subqueries {
                    for t in targets {
                        let s = score(text, &t.text);
                        if s >= threshold {
                            put((sp.level, intent_id.clone(), t.passage_id.clone()), s);
                        }
                    }
                }
            }
        }
    }
    out
}

fn c2_mining_oracle() -> Check {
    let backends = Backends::mock(0);
    let start = Instant::now();
    let mut levels_hit = BTreeSet::new();
    for seed in 0..40 {
        let f = fixture(seed);
        let spaces = f.spaces();
        for s in &spaces {
            let n = match &s.kind {
                SpaceKind::Undirected { members } => members.len(),
                SpaceKind::Directed { subqueries, targets, .. } => subqueries.len().max(targets.len()),
            };
            ensure(n <= 50, || format!("fixture {seed}: space {} has {n} queries", s.id))?;
        }
        let got = mined(&spaces, 0.99, &backends);
        let want = oracle(&spaces, 0.99, &backends);
        ensure(got == want, || format!("fixture {seed}: {} mined vs {} expected", got.len(), want.len()))?;
        levels_hit.extend(got.keys().map(|k| k.0));
    }
    ensure(levels_hit.len() == 3, || format!("fixtures only produced labels at {levels_hit:?}"))?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(5), || format!("took {took:?}"))
}

fn c3_monotonicity() -> Check {
    let backends = Backends::mock(0);
    let mut runner = TestRunner::new(RunnerConfig { cases: 100, failure_persistence: None, ..RunnerConfig::default() });
    runner
        .run(&any::<u64>(), |seed| {
            let spaces = fixture(seed).spaces();
            let keys = |t| mined(&spaces, t, &backends).into_keys().collect::<BTreeSet<_>>();
            let (hi, mid, lo) = (keys(0.99), keys(0.95), keys(0.9));
            prop_assert!(hi.is_subset(&mid), "0.99 not within 0.95");
            prop_assert!(mid.is_subset(&lo), "0.95 not within 0.9");
            Ok(())
        })
        .map_err(|e| e.to_string())
}

// ------------------------------------------------------------ end to end

struct Run {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

fn e2e() -> Result<Run, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().to_path_buf();
    let corpus = root.join("corpus.jsonl");
    std::fs::write(&corpus, render_input_jsonl(&synthetic_corpus(30, 7))).map_err(|e| e.to_string())?;
    let mut cfg = PipelineConfig::default();
    cfg.input.corpus = corpus;
    Pipeline::new(cfg, &root).run_all().map_err(|e| e.to_string())?;
    Ok(Run { _dir: dir, root })
}

fn tree_digests(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, file_digest(&p).unwrap());
            }
        }
    }
    out
}

fn c11_determinism(a: &Run) -> Check {
    let start = Instant::now();
    let b = e2e()?;
    let took = start.elapsed();
    let (da, db) = (tree_digests(&a.root.join(ARTIFACTS_DIR)), tree_digests(&b.root.join(ARTIFACTS_DIR)));
    ensure(!da.is_empty(), || "no artifacts written".into())?;
    ensure(da == db, || {
        let diff: Vec<_> = da.iter().filter(|(k, v)| db.get(*k) != Some(v)).map(|(k, _)| k.clone()).collect();
        format!("artifacts differ: {diff:?}")
    })?;
    // manifests carry wall-clock timestamps; everything else must match
    let pa = Pipeline::new(PipelineConfig::default(), &a.root);
    let pb = Pipeline::new(PipelineConfig::default(), &b.root);
    for s in Stage::ALL {
        let (ma, mb) = (pa.manifest(s), pb.manifest(s));
        let (Some(ma), Some(mb)) = (ma, mb) else { return Err(format!("{s}: manifest missing")) };
        let same_inputs = ma.inputs.iter().filter(|(k, _)| !k.starts_with("input:")).eq(mb
            .inputs
            .iter()
            .filter(|(k, _)| !k.starts_with("input:")));
        ensure(same_inputs && ma.outputs == mb.outputs && ma.config_digest == mb.config_digest, || {
            format!("{s}: manifests differ")
        })?;
    }
    ensure(took < Duration::from_secs(60), || format!("took {took:?}"))
}

fn read_ids(path: &Path, key: &str) -> Result<BTreeSet<String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).map_err(|e| e.to_string())?;
            v[key].as_str().map(str::to_string).ok_or_else(|| format!("{}: no {key}", path.display()))
        })
        .collect()
}

const SUBSETS: [&str; 6] = ["sentence", "sentence-mined", "passage", "passage-mined", "topic", "all"];

fn stats_rows(run: &Run) -> Result<(String, Vec<Vec<String>>), String> {
    let text = std::fs::read_to_string(run.root.join(ARTIFACTS_DIR).join("dataset/stats.tsv")).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().to_string();
    Ok((header, lines.map(|l| l.split('\t').map(str::to_string).collect()).collect()))
}

fn c4_direct_avg_rel(run: &Run) -> Check {
    let (_, rows) = stats_rows(run)?;
    for name in ["sentence", "passage"] {
        let row = rows.iter().find(|r| r[0] == name).ok_or_else(|| format!("no {name} row"))?;
        ensure(row[3] == "1.00", || format!("{name}: avg_rel {}", row[3]))?;
        ensure(row[4].parse::<usize>().unwrap_or(0) > 0, || format!("{name}: empty subset"))?;
        // recount from the qrels file itself
        let qrels = std::fs::read_to_string(run.root.join(ARTIFACTS_DIR).join("dataset").join(name).join("qrels.tsv"))
            .map_err(|e| e.to_string())?;
        let mut per_query: BTreeMap<&str, usize> = BTreeMap::new();
        for l in qrels.lines().skip(1) {
            *per_query.entry(l.split('\t').next().unwrap()).or_default() += 1;
        }
        ensure(per_query.values().all(|&c| c == 1), || format!("{name}: query with != 1 relevant passage"))?;
    }
    Ok(())
}

fn c12_format(run: &Run) -> Check {
    let ds = run.root.join(ARTIFACTS_DIR).join("dataset");
    let corpus = read_ids(&ds.join("corpus.jsonl"), "_id")?;
    let mut rows_seen = 0;
    for name in SUBSETS {
        let queries = read_ids(&ds.join(name).join("queries.jsonl"), "_id")?;
        let qrels = std::fs::read_to_string(ds.join(name).join("qrels.tsv")).map_err(|e| e.to_string())?;
        let mut lines = qrels.lines();
        ensure(lines.next() == Some("query-id\tcorpus-id\tscore"), || format!("{name}: bad qrels header"))?;
        for l in lines {
            let f: Vec<&str> = l.split('\t').collect();
            ensure(f.len() == 3, || format!("{name}: malformed row {l:?}"))?;
            ensure(queries.contains(f[0]), || format!("{name}: unknown query {}", f[0]))?;
            ensure(corpus.contains(f[1]), || format!("{name}: unknown passage {}", f[1]))?;
            rows_seen += 1;
        }
    }
    ensure(rows_seen > 0, || "no qrels rows".into())?;
    let (header, rows) = stats_rows(run)?;
    let want = ["subset", "avg_query_len", "avg_doc_len", "avg_rel_docs_per_query", "pair_count"];
    ensure(header == STATS_HEADER && header.split('\t').eq(want), || format!("stats header {header:?}"))?;
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    ensure(names == SUBSETS, || format!("stats rows {names:?}"))?;
    ensure(rows.iter().all(|r| r.len() == want.len()), || "ragged stats row".into())
}

// ----------------------------------------------------------------- metrics

fn reference_metrics(run: &RunResult, qrels: &Qrels, k: usize) -> (f64, f64) {
    let (mut recall, mut ndcg, mut n) = (0.0, 0.0, 0usize);
    for (q, rel) in qrels {
        if rel.is_empty() {
            continue;
        }
        n += 1;
        let Some(list) = run.get(q) else { continue };
        let mut hits = 0.0;
        let mut dcg = 0.0;
        for (rank, (pid, _)) in list.iter().enumerate() {
            if rank >= k {
                break;
            }
            if rel.contains(pid) {
                hits += 1.0;
                dcg += 1.0 / (rank as f64 + 2.0).log2();
            }
        }
        let mut ideal = vec![1.0; rel.len()];
        ideal.resize(list.len().max(rel.len()), 0.0);
        let idcg: f64 = ideal.iter().take(k).enumerate().map(|(i, g)| g / (i as f64 + 2.0).log2()).sum();
        recall += hits / rel.len() as f64;
        ndcg += dcg / idcg;
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (recall / n as f64, ndcg / n as f64)
    }
}

fn c5_metrics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pids: Vec<String> = (0..30).map(|i| format!("p{i}")).collect();
    for case in 0..100 {
        let k = *[1usize, 3, 5, 10, 20].choose(&mut rng).unwrap();
        let mut run = RunResult::new();
        let mut qrels = Qrels::new();
        for q in 0..rng.gen_range(1..12) {
            let qid = format!("q{q}");
            if rng.gen_bool(0.85) {
                let mut ranked: Vec<String> = pids.clone();
                ranked.shuffle(&mut rng);
                ranked.truncate(rng.gen_range(0..30));
                let list = ranked.into_iter().enumerate().map(|(i, p)| (p, 1.0 - i as f64 * 0.01)).collect();
                run.insert(qid.clone(), list);
            }
            if rng.gen_bool(0.9) {
                let size = rng.gen_range(0..6);
                let rel = pids.choose_multiple(&mut rng, size).cloned().collect();
                qrels.insert(qid, rel);
            }
        }
        let (r, n) = reference_metrics(&run, &qrels, k);
        let (gr, gn) = (recall_at_k(&run, &qrels, k).value, ndcg_at_k(&run, &qrels, k).value);
        ensure(close(r, gr, 1e-9), || format!("case {case}: recall {gr} vs {r}"))?;
        ensure(close(n, gn, 1e-9), || format!("case {case}: ndcg {gn} vs {n}"))?;
    }
    let run = RunResult::from([("q".into(), vec![("x".into(), 2.0), ("y".into(), 1.0)])]);
    let qrels = Qrels::from([("q".into(), BTreeSet::from(["y".to_string()]))]);
    let v = ndcg_at_k(&run, &qrels, 10).value;
    ensure(close(v, 1.0 / 3f64.log2(), 1e-9), || format!("rank-2 ndcg {v}"))
}

fn c6_pearson() -> Check {
    let v = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]);
    ensure(close(v, 1.0, 1e-12), || format!("[1,2,3] vs [2,4,6] = {v}"))?;
    let v = pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]);
    ensure(close(v, -1.0, 1e-12), || format!("reversed = {v}"))?;
    // hand computed: x=[1,2,3,4], y=[2,1,4,3] -> 0.6
    let v = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]);
    ensure(close(v, 0.6, 1e-12), || format!("hand case = {v}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..200 {
        let n = rng.gen_range(3..20);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let (a, b) = (rng.gen_range(0.1..10.0), rng.gen_range(-5.0..5.0));
        let base = pearson(&x, &y);
        let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let yt: Vec<f64> = y.iter().map(|v| a * v - b).collect();
        ensure(close(pearson(&xt, &y), base, 1e-9), || format!("case {case}: x transform"))?;
        ensure(close(pearson(&x, &yt), base, 1e-9), || format!("case {case}: y transform"))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- temporal

fn c7_temporal() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let epoch = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
    for _ in 0..1000 {
        let date = epoch + Days::new(rng.gen_range(0..18000));
        let reference = epoch + Days::new(rng.gen_range(0..18000));
        let e = encode_time(date, reference).0;
        for k in 0..3 {
            let s = e[2 * k].powi(2) + e[2 * k + 1].powi(2);
            ensure(close(s, 1.0, 1e-9), || format!("{date} vs {reference}: component {k} = {s}"))?;
        }
        let d = (date - reference).num_days() as f64;
        let (now, later) = (encode_days(d).0, encode_days(d + 7.0).0);
        ensure(close(now[0], later[0], 1e-9) && close(now[1], later[1], 1e-9), || format!("d={d}: week not 7-periodic"))?;
    }
    let zero = encode_days(0.0).0;
    let want = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
    ensure(zero.iter().zip(want).all(|(a, b)| close(*a, b, 1e-12)), || format!("d=0 -> {zero:?}"))
}

// -------------------------------------------------------------- clustering

fn blob(cx: f64, cy: f64, n: usize, spread: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let r = spread * ((i as f64 + 0.5) / n as f64).sqrt();
            let a = i as f64 * 2.399_963;
            vec![cx + r * a.cos(), cy + r * a.sin()]
        })
        .collect()
}

/// Naive agglomeration over mutual-reachability distances. Descends from
/// the top merge through splits that shed fewer than `m` points until the
/// first split where both sides hold at least `m`; returns those sides.
fn oracle_split(pts: &[Vec<f64>], m: usize) -> Vec<BTreeSet<usize>> {
    let n = pts.len();
    let d = |i: usize, j: usize| pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let core: Vec<f64> = (0..n)
        .map(|i| {
            let mut ds: Vec<f64> = (0..n).map(|j| d(i, j)).collect();
            ds.sort_by(f64::total_cmp);
            ds[m - 1]
        })
        .collect();
    let mr = |i: usize, j: usize| d(i, j).max(core[i]).max(core[j]);

    // nodes: leaves 0..n, merges appended; children recorded per merge
    let mut members: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
    let mut kids: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut active: Vec<usize> = (0..n).collect();
    while active.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let (a, b) = (active[x], active[y]);
                let link = members[a]
                    .iter()
                    .flat_map(|&i| members[b].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| mr(i, j))
                    .fold(f64::INFINITY, f64::min);
                if link < best.0 {
                    best = (link, x, y);
                }
            }
        }
        let (a, b) = (active[best.1], active[best.2]);
        let merged: BTreeSet<usize> = members[a].union(&members[b]).copied().collect();
        members.push(merged);
        kids.push(Some((a, b)));
        active.retain(|&c| c != a && c != b);
        active.push(members.len() - 1);
    }
    let mut node = active[0];
    while let Some((a, b)) = kids[node] {
        match (members[a].len() >= m, members[b].len() >= m) {
            (true, true) => return vec![members[a].clone(), members[b].clone()],
            (true, false) => node = a,
            (false, true) => node = b,
            (false, false) => break,
        }
    }
    vec![members[node].clone()]
}

fn c8_clustering() -> Check {
    let mut pts = blob(0.0, 0.0, 20, 1.0);
    pts.extend(blob(10.0, 0.0, 20, 1.0));
    pts.push(vec![5.0, 40.0]);
    let c = cluster_topics(&pts, 5);
    let leaves = c.leaves();
    ensure(leaves.len() == 2, || format!("{} leaves", leaves.len()))?;
    let mut got: Vec<BTreeSet<usize>> = leaves.iter().map(|&l| c.nodes[l].members.iter().copied().collect()).collect();
    got.sort();
    let mut want = oracle_split(&pts, 5);
    want.sort();
    ensure(got == want, || format!("leaves {got:?} vs oracle {want:?}"))?;
    ensure(got[0] == (0..20).collect() && got[1] == (20..40).collect(), || "blob membership wrong".into())?;
    ensure(c.labels[40].is_none(), || "outlier not noise".into())
}

// ------------------------------------------------------------------- audit

fn pair(score: f64, i: usize) -> ScoredPair {
    ScoredPair {
        query_a_id: format!("a{i}"),
        query_b_id: format!("b{i}"),
        text_a: String::new(),
        text_b: String::new(),
        score,
        level: QueryLevel::Sentence,
        space_id: "s".into(),
    }
}

fn c9_audit() -> Check {
    ensure(BIN_LOWER.len() == 8, || "not 8 bins".into())?;
    ensure(bin_bounds(0).1 == 1.0 && bin_bounds(7).0 == 0.85, || "bins do not span [0.85, 1]".into())?;
    for i in 0..7 {
        ensure(bin_bounds(i).0 == bin_bounds(i + 1).1, || format!("gap between bins {i} and {}", i + 1))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut edges: Vec<f64> = BIN_LOWER.to_vec();
    edges.extend([1.0, 0.849_999, 0.0]);
    let randoms: Vec<f64> = (0..10_000).map(|_| rng.gen_range(0.8..=1.0)).collect();
    for s in edges.into_iter().chain(randoms) {
        match bin_index(s) {
            Some(i) => {
                let (lo, hi) = bin_bounds(i);
                ensure(lo <= s && (s < hi || (i == 0 && s == 1.0)), || format!("{s} in bin {i}"))?;
            }
            None => ensure(s < 0.85, || format!("{s} fell outside every bin"))?,
        }
    }
    let log: Vec<ScoredPair> = (0..3000).map(|i| pair(rng.gen_range(0.85..=1.0), i)).collect();
    let bins = bin_and_sample(&log, 50, 3);
    ensure(bins.iter().map(|b| b.total).sum::<usize>() == log.len(), || "bin totals lose pairs".into())?;
    for b in &bins {
        ensure(b.samples.len() == b.total.min(50), || format!("bin {}: {} samples", b.lower, b.samples.len()))?;
        ensure(b.samples.iter().all(|p| p.score >= b.lower), || "sample outside its bin".into())?;
    }
    // above 0.99: ratings 5,5,4,2,1 -> 2 FP of 5; below: 4,3,3,2 -> 1 FN of 4; one unreadable
    let judged: Vec<JudgeScore> = [
        (0.995, Some(5)),
        (1.0, Some(5)),
        (0.99, Some(4)),
        (0.992, Some(2)),
        (0.999, Some(1)),
        (0.98, Some(4)),
        (0.95, Some(3)),
        (0.90, Some(3)),
        (0.86, Some(2)),
        (0.97, None),
    ]
    .iter()
    .enumerate()
    .map(|(i, &(score, rating))| JudgeScore { pair: pair(score, i), rating, rationale: String::new(), transcript: vec![] })
    .collect();
    let r = rates(&judged, 0.99);
    ensure(
        (r.above, r.false_positives, r.below, r.false_negatives) == (5, 2, 4, 1),
        || format!("counts {r:?}"),
    )?;
    ensure(r.fp_rate == Some(0.4) && r.fn_rate == Some(0.25), || format!("rates {r:?}"))
}

// -------------------------------------------------------------------- cost

fn c10_cost() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let n = rng.gen_range(1.0..1e6_f64).round();
        let t = rng.gen_range(1.0..20_000.0_f64).round();
        let c = estimate_cost(n, t, None, None);
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        ensure(rel(c.nc1, n * t / 100.0), || format!("NC1 n={n} t={t}"))?;
        ensure(rel(c.nc2, n * t / 500.0), || format!("NC2 n={n} t={t}"))?;
        ensure(rel(c.nc1, 5.0 * c.nc2), || format!("NC1 != 5 NC2 at n={n} t={t}"))?;
        let doubled = estimate_cost(2.0 * n, t, Some((2.0 * n).sqrt()), None);
        let single = estimate_cost(n, t, Some(n.sqrt()), None);
        let ratio = doubled.rerank_passage / single.rerank_passage;
        ensure(close(ratio, 2.0 * 2f64.sqrt(), 1e-9), || format!("scaling {ratio} at n={n}"))?;
    }
    Ok(())
}

// -------------------------------------------------------------------- main

fn main() {
    let started = Instant::now();
    let run = e2e();
    let with_run = |f: fn(&Run) -> Check| -> Check {
        match &run {
            Ok(r) => f(r),
            Err(e) => Err(format!("pipeline failed: {e}")),
        }
    };
    let results: Vec<(u32, &str, Check)> = vec![
        (1, "chunking round-trip", c1_chunking()),
        (2, "mining matches exhaustive scoring", c2_mining_oracle()),
        (3, "threshold monotonicity", c3_monotonicity()),
        (4, "direct subsets average one relevant passage", with_run(c4_direct_avg_rel)),
        (5, "recall/ndcg match reference", c5_metrics()),
        (6, "pearson correctness", c6_pearson()),
        (7, "temporal encoding", c7_temporal()),
        (8, "clustering sanity", c8_clustering()),
        (9, "audit binning and rates", c9_audit()),
        (10, "cost estimator identities", c10_cost()),
        (11, "end-to-end determinism", with_run(c11_determinism)),
        (12, "emitted format integrity", with_run(c12_format)),
    ];
    let mut failed = 0;
    for (n, desc, r) in &results {
        match r {
            Ok(()) => println!("criterion {n}: PASS - {desc}"),
            Err(e) => {
                failed += 1;
                println!("criterion {n}: FAIL - {desc}: {e}");
            }
        }
    }
    println!("{} of {} criteria passed in {:.2?}", results.len() - failed, results.len(), started.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
