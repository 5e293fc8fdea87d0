use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hqrel::corpus::Document;
use hqrel::dataset::estimate_cost;
use hqrel::eval::{parse_result_matrix, pearson_matrix, render_matrix};
use hqrel::io::{read_jsonl, write_atomic};
use hqrel::pipeline::{validate_config, Pipeline, PipelineError, Stage, StageReport, StageStatus, ARTIFACTS_DIR};
use hqrel::synth::{render_input_jsonl, synthetic_corpus};
use hqrel::text::char_len;

/// Builds a hierarchical passage-retrieval dataset from a document corpus.
///
/// Backend URLs can be overridden with BACKEND_CHAT_URL, BACKEND_CLASSIFY_URL,
/// BACKEND_EMBED_URL, BACKEND_RERANK_URL, BACKEND_QUALITY_URL and
/// BACKEND_API_KEY. Exit codes: 0 ok, 2 config error, 3 upstream stage
/// missing, 4 backend failure.
#[derive(Parser)]
#[command(name = "pipeline", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML config file.
    #[arg(long, short)]
    config: PathBuf,
    /// Directory holding artifacts/ and manifests/.
    #[arg(long, default_value = ".")]
    workdir: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the corpus JSONL.
    Ingest(RunArgs),
    /// Split documents into passages and sentence chunks.
    Chunk(RunArgs),
    /// Drop low-quality passages.
    Clean(RunArgs),
    /// Generate sentence and passage queries.
    #[command(name = "gen-bottomup")]
    GenBottomUp(RunArgs),
    /// Cluster titles into a topic tree.
    Cluster(RunArgs),
    /// Generate topic intents and subqueries.
    #[command(name = "gen-topdown")]
    GenTopDown(RunArgs),
    /// Direct labels plus reranker-mined positives.
    Mine(RunArgs),
    /// Write corpus, queries, qrels and stats.
    Emit(RunArgs),
    /// Judge sampled mined pairs and estimate FP/FN rates.
    Audit(RunArgs),
    /// Recall@k and NDCG@k of the configured embedder.
    Eval(RunArgs),
    /// Every stage in order; up-to-date stages are skipped.
    All(RunArgs),
    /// Print the inference-cost model.
    EstimateCost(CostArgs),
    /// Pearson correlation between two model-by-subset score matrices.
    Correlate(CorrelateArgs),
    /// Write a synthetic corpus in the input format.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CostArgs {
    /// Number of documents; read from the ingested corpus when omitted.
    #[arg(long)]
    n: Option<f64>,
    /// Mean document length; read from the ingested corpus when omitted.
    #[arg(long)]
    t: Option<f64>,
    /// Cluster count (default sqrt(n)).
    #[arg(long)]
    m: Option<f64>,
    /// Tokens per title (default 20).
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long, default_value = ".")]
    workdir: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    /// TSV: header `model<TAB>subset...`, one row per model.
    a: PathBuf,
    b: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 30)]
    docs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn pipeline(args: &RunArgs) -> Result<Pipeline, Failure> {
    let mut cfg = validate_config(&args.config).map_err(PipelineError::from)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.backends.apply_env();
    Ok(Pipeline::new(cfg, &args.workdir))
}

fn print_reports(reports: &[StageReport]) {
    for r in reports {
        let status = match r.status {
            StageStatus::Ran => "ran",
            StageStatus::UpToDate => "up-to-date",
        };
        println!("{}\t{status}", r.stage);
    }
}

fn corpus_size(workdir: &Path) -> Result<(f64, f64), Failure> {
    let path = workdir.join(ARTIFACTS_DIR).join("documents.jsonl");
    let docs: Vec<Document> = read_jsonl(&path).map_err(|e| {
        fail(3, format!("--n/--t not given and {} unreadable ({e}); run ingest first", path.display()))
    })?;
    let n = docs.len() as f64;
    let t = if docs.is_empty() {
        0.0
    } else {
        docs.iter().map(|d| char_len(&d.text) as f64).sum::<f64>() / n
    };
    Ok((n, t))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let stage = |s: Stage, a: &RunArgs| -> Result<(), Failure> {
        print_reports(&[pipeline(a)?.run_stage(s)?]);
        Ok(())
    };
    match cli.command {
        Command::Ingest(a) => stage(Stage::Ingest, &a),
        Command::Chunk(a) => stage(Stage::Chunk, &a),
        Command::Clean(a) => stage(Stage::Clean, &a),
        Command::GenBottomUp(a) => stage(Stage::GenBottomUp, &a),
        Command::Cluster(a) => stage(Stage::Cluster, &a),
        Command::GenTopDown(a) => stage(Stage::GenTopDown, &a),
        Command::Mine(a) => stage(Stage::Mine, &a),
        Command::Emit(a) => stage(Stage::Emit, &a),
        Command::Audit(a) => stage(Stage::Audit, &a),
        Command::Eval(a) => stage(Stage::Eval, &a),
        Command::All(a) => {
            let p = pipeline(&a)?;
            // report stages as they finish so a failure still shows progress
            for s in Stage::ALL {
                print_reports(&[p.run_stage(s)?]);
            }
            Ok(())
        }
        Command::EstimateCost(a) => {
            let (n, t) = match (a.n, a.t) {
                (Some(n), Some(t)) => (n, t),
                (n, t) => {
                    let (cn, ct) = corpus_size(&a.workdir)?;
                    (n.unwrap_or(cn), t.unwrap_or(ct))
                }
            };
            if !(n >= 0.0 && t >= 0.0) || a.m.is_some_and(|m| m <= 0.0) {
                return Err(fail(2, "n and t must be >= 0 and m > 0"));
            }
            print!("{}", estimate_cost(n, t, a.m, a.l2).to_tsv());
            Ok(())
        }
        Command::Correlate(a) => {
            let read = |p: &Path| {
                std::fs::read_to_string(p)
                    .map_err(|e| fail(1, format!("{}: {e}", p.display())))
                    .and_then(|s| parse_result_matrix(&s).map_err(|e| fail(1, format!("{}: {e}", p.display()))))
            };
            let m = pearson_matrix(&read(&a.a)?, &read(&a.b)?).map_err(|e| fail(1, e.to_string()))?;
            let text = render_matrix(&m);
            match a.out {
                Some(out) => write_atomic(&out, text.as_bytes()).map_err(|e| fail(1, e.to_string()))?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Synth(a) => {
            let text = render_input_jsonl(&synthetic_corpus(a.docs, a.seed));
            write_atomic(&a.out, text.as_bytes()).map_err(|e| fail(1, e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
