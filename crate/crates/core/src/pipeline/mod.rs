//! Stage-wise driver with content-addressed checkpoints.
//!
//! Each stage reads artifacts under `<workdir>/artifacts`, writes its own
//! outputs there atomically, and records a manifest under
//! `<workdir>/manifests/<stage>.json`. A stage re-runs iff an input digest
//! or its config digest changed, or one of its outputs is missing or was
//! modified.

mod config;
mod stages;

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{
    parse_config, validate_config, AuditSection, BackendsSection, ChunkSection, CleanSection, ClusterSection,
    ConfigError, Endpoint, EvalSection, InputSection, LlmSection, PipelineConfig, TemporalSection,
};

use crate::gateway::{BackendError, Backends};
use crate::text::fnv1a64;

pub const ARTIFACTS_DIR: &str = "artifacts";
pub const MANIFESTS_DIR: &str = "manifests";
/// Manifest input key for the external corpus file.
pub const CORPUS_INPUT: &str = "input:corpus";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Chunk,
    Clean,
    GenBottomUp,
    Cluster,
    GenTopDown,
    Mine,
    Emit,
    Audit,
    Eval,
}

impl Stage {
    /// Topological order.
    pub const ALL: [Stage; 10] = [
        Stage::Ingest,
        Stage::Chunk,
        Stage::Clean,
        Stage::GenBottomUp,
        Stage::Cluster,
        Stage::GenTopDown,
        Stage::Mine,
        Stage::Emit,
        Stage::Audit,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Chunk => "chunk",
            Stage::Clean => "clean",
            Stage::GenBottomUp => "gen-bottomup",
            Stage::Cluster => "cluster",
            Stage::GenTopDown => "gen-topdown",
            Stage::Mine => "mine",
            Stage::Emit => "emit",
            Stage::Audit => "audit",
            Stage::Eval => "eval",
        }
    }

    pub fn parse(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Stages whose outputs this one reads.
    pub fn upstream(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            Ingest => &[],
            Chunk => &[Ingest],
            Clean => &[Chunk],
            GenBottomUp => &[Ingest, Clean],
            Cluster => &[Ingest],
            GenTopDown => &[Cluster],
            Mine => &[GenBottomUp, Cluster, GenTopDown],
            Emit => &[Ingest, Clean, GenBottomUp, GenTopDown, Mine],
            Audit => &[Mine],
            Eval => &[Emit],
        }
    }

    /// Seed for everything random inside this stage.
    pub fn seed(self, base: u64) -> u64 {
        base ^ fnv1a64(self.name().as_bytes())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage} needs {missing}, which has not run (run `{missing}` first)")]
    UpstreamMissing { stage: Stage, missing: Stage },
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl PipelineError {
    /// 2 config, 3 upstream missing, 4 backend, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::UpstreamMissing { .. } => 3,
            PipelineError::Backend(_) => 4,
            PipelineError::Input(_) | PipelineError::Io(_) => 1,
        }
    }
}

impl From<crate::corpus::IngestError> for PipelineError {
    fn from(e: crate::corpus::IngestError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<crate::dataset::EmitError> for PipelineError {
    fn from(e: crate::dataset::EmitError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<crate::eval::EvalError> for PipelineError {
    fn from(e: crate::eval::EvalError) -> Self {
        match e {
            crate::eval::EvalError::Backend(b) => PipelineError::Backend(b),
            other => PipelineError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    /// Path relative to the workdir (or [`CORPUS_INPUT`]) -> SHA-256 hex.
    pub inputs: BTreeMap<String, String>,
    pub config_digest: String,
    pub outputs: BTreeMap<String, String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

pub fn file_digest(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    UpToDate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageReport {
    pub stage: Stage,
    pub status: StageStatus,
    /// A previous manifest existed but no longer matched.
    pub stale: bool,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub workdir: PathBuf,
    backends: Box<dyn Fn(u64) -> Backends + Send + Sync>,
}

impl Pipeline {
    /// Backends come from `config.backends`; anything without a URL is mocked.
    pub fn new(config: PipelineConfig, workdir: impl Into<PathBuf>) -> Self {
        let settings = config.backends.settings();
        let retries = config.llm.retries;
        Self {
            config,
            workdir: workdir.into(),
            backends: Box::new(move |seed| Backends::from_settings(&settings, seed, retries)),
        }
    }

    /// Replaces backend construction; the closure receives the run seed.
    pub fn with_backends(mut self, f: impl Fn(u64) -> Backends + Send + Sync + 'static) -> Self {
        self.backends = Box::new(f);
        self
    }

    pub fn artifacts(&self) -> PathBuf {
        self.workdir.join(ARTIFACTS_DIR)
    }

    fn manifest_path(&self, stage: Stage) -> PathBuf {
        self.workdir.join(MANIFESTS_DIR).join(format!("{}.json", stage.name()))
    }

    pub fn manifest(&self, stage: Stage) -> Option<StageManifest> {
        crate::io::read_json(&self.manifest_path(stage)).ok()
    }

    fn outputs_intact(&self, m: &StageManifest) -> bool {
        m.outputs
            .iter()
            .all(|(rel, d)| file_digest(&self.workdir.join(rel)).is_ok_and(|cur| &cur == d))
    }

    fn input_digests(&self, stage: Stage) -> Result<BTreeMap<String, String>, PipelineError> {
        let mut inputs = BTreeMap::new();
        if stage == Stage::Ingest {
            let p = &self.config.input.corpus;
            let d = file_digest(p).map_err(|e| PipelineError::Input(format!("corpus {}: {e}", p.display())))?;
            inputs.insert(CORPUS_INPUT.to_string(), d);
        }
        for &up in stage.upstream() {
            let m = self
                .manifest(up)
                .filter(|m| m.outputs.keys().all(|rel| self.workdir.join(rel).exists()))
                .ok_or(PipelineError::UpstreamMissing { stage, missing: up })?;
            for rel in m.outputs.keys() {
                inputs.insert(rel.clone(), file_digest(&self.workdir.join(rel))?);
            }
        }
        Ok(inputs)
    }

    /// Digest of the config values this stage reads, plus its seed.
    pub fn config_digest(&self, stage: Stage) -> String {
        let value = stages::config_subset(&self.config, stage);
        let bytes = serde_json::to_vec(&value).expect("config serializes");
        sha256_hex(&bytes)
    }

    /// Runs `stage` unless its manifest shows it is up to date.
    pub fn run_stage(&self, stage: Stage) -> Result<StageReport, PipelineError> {
        let inputs = self.input_digests(stage)?;
        let config_digest = self.config_digest(stage);
        let previous = self.manifest(stage);
        if let Some(m) = &previous {
            if m.inputs == inputs && m.config_digest == config_digest && self.outputs_intact(m) {
                log::info!("{stage}: up to date");
                return Ok(StageReport { stage, status: StageStatus::UpToDate, stale: false });
            }
            log::warn!("{stage}: stale checkpoint, re-running");
        }
        let started_at = Utc::now();
        log::info!("{stage}: running");
        let seed = stage.seed(self.config.seed);
        let ctx = stages::Ctx {
            cfg: &self.config,
            art: self.artifacts(),
            // the models are the same for every stage; only sampling uses the stage seed
            backends: (self.backends)(self.config.seed),
            seed,
        };
        let written = stages::run(stage, &ctx)?;
        let mut outputs = BTreeMap::new();
        for rel in written {
            let d = file_digest(&self.workdir.join(&rel))?;
            outputs.insert(rel, d);
        }
        let manifest = StageManifest {
            stage: stage.name().to_string(),
            inputs,
            config_digest,
            outputs,
            started_at,
            finished_at: Utc::now(),
        };
        crate::io::write_json(&self.manifest_path(stage), &manifest)?;
        Ok(StageReport {
            stage,
            status: StageStatus::Ran,
            stale: previous.is_some(),
        })
    }

    /// Every stage in topological order.
    pub fn run_all(&self) -> Result<Vec<StageReport>, PipelineError> {
        Stage::ALL.iter().map(|&s| self.run_stage(s)).collect()
    }
}
