//! Run configuration files and the embedding sources they name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tango_core::embed::{desk_base_table, desk_table, retrofit, EmbeddingTable, DESK_DIM};
use tango_core::harness::{DataSpec, TrainSpec};
use tango_core::policy::PolicyConfig;

use crate::error::{Error, Result};
use crate::loaders::{read_graph, read_vectors};
use crate::records::read_text;

/// Environment variable that overrides every seed of a run.
pub const SEED_ENV: &str = "TANGO_SEED";

/// Layer width used for desk-scale runs.
pub const DESK_HIDDEN: usize = 32;

/// Where word vectors come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// The built-in desk vocabulary and graph.
    Desk { dim: usize, seed: u64 },
    /// A word-vector text file and an optional knowledge-graph file.
    Files {
        vectors: PathBuf,
        #[serde(default)]
        graph: Option<PathBuf>,
        #[serde(default = "default_iterations")]
        iterations: usize,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
}

fn default_iterations() -> usize {
    10
}

fn default_lambda() -> f64 {
    1.0
}

impl Default for EmbeddingSource {
    fn default() -> Self {
        EmbeddingSource::Desk { dim: DESK_DIM, seed: 0 }
    }
}

impl EmbeddingSource {
    pub fn dim(&self) -> Result<usize> {
        match self {
            EmbeddingSource::Desk { dim, .. } => Ok(*dim),
            EmbeddingSource::Files { vectors, .. } => Ok(read_vectors(vectors)?.dim),
        }
    }

    /// Retrofitted and base tables.
    pub fn tables(&self) -> Result<(EmbeddingTable, EmbeddingTable)> {
        match self {
            EmbeddingSource::Desk { dim, seed } => Ok((desk_table(*dim, *seed), desk_base_table(*dim, *seed))),
            EmbeddingSource::Files { vectors, graph, iterations, lambda } => {
                let mut base = read_vectors(vectors)?;
                let Some(graph) = graph else { return Ok((base.clone(), base)) };
                let kg = read_graph(graph)?;
                base.attach_graph(&kg);
                Ok((retrofit(&base, &kg, *iterations, *lambda)?, base))
            }
        }
    }

    pub fn set_seed(&mut self, s: u64) {
        if let EmbeddingSource::Desk { seed, .. } = self {
            *seed = s;
        }
    }
}

/// Configuration of `tango train`, `tango eval` and `tango ablate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataSpec,
    pub train: TrainSpec,
    pub embeddings: EmbeddingSource,
    /// Ablation rows to run; empty means all of them.
    pub rows: Vec<String>,
    /// Simulator episodes per evaluation case.
    pub episodes_per_case: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            train: TrainSpec { policy: PolicyConfig { hidden: DESK_HIDDEN, ..PolicyConfig::default() }, ..TrainSpec::default() },
            embeddings: EmbeddingSource::default(),
            rows: Vec::new(),
            episodes_per_case: 1,
        }
    }
}

impl RunConfig {
    /// Parses a config file. Objects in the file are merged key by key onto
    /// [`RunConfig::default`], so a file only lists what it changes.
    pub fn from_json(text: &str) -> Result<Self> {
        let given: Value = serde_json::from_str(text).map_err(|e| Error::parse("run config", e.line(), e.column(), "", e))?;
        let mut merged = serde_json::to_value(RunConfig::default()).expect("config serializes");
        merge(&mut merged, given);
        serde_path_to_error::deserialize(merged).map_err(|e| {
            let field = e.path().to_string();
            Error::parse("run config", 0, 0, field, e.into_inner())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }

    /// Every seed of the run set to `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.data.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let dim = self.embeddings.dim()?;
        if dim != self.train.policy.embed_dim {
            return Err(Error::Core(tango_core::Error::Config(format!(
                "embedding width {dim} differs from policy embed_dim {}",
                self.train.policy.embed_dim
            ))));
        }
        Ok(())
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Seed from [`SEED_ENV`], if set.
pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Core(tango_core::Error::Config(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))),
        Err(_) => Ok(None),
    }
}
