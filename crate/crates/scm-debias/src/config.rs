//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::debias::{ConcatMode, DebiasSpec, Operator, Smoothing};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingSource {
    pub name: String,
    pub path: PathBuf,
    /// "glove-text" or "word2vec-text"
    pub format: String,
}

/// One evaluation condition: what set of identity vectors is debiased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Summed,
    Concatenated,
    RaceOnly,
    GenderOnly,
}

impl Target {
    pub const ALL: [Target; 4] = [
        Target::RaceOnly,
        Target::GenderOnly,
        Target::Summed,
        Target::Concatenated,
    ];

    pub fn column_name(&self) -> &'static str {
        match self {
            Target::RaceOnly => "Race",
            Target::GenderOnly => "Gender",
            Target::Summed => "Summed",
            Target::Concatenated => "Concatenated",
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Summed => write!(f, "summed"),
            Target::Concatenated => write!(f, "concatenated"),
            Target::RaceOnly => write!(f, "race_only"),
            Target::GenderOnly => write!(f, "gender_only"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub operator: Operator,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub smoothing: Smoothing,
    #[serde(default)]
    pub concat_mode: ConcatMode,
}

fn default_beta() -> f64 {
    1.0
}

impl OperatorConfig {
    pub fn to_spec(&self) -> DebiasSpec {
        DebiasSpec {
            operator: self.operator,
            beta: self.beta,
            smoothing: self.smoothing,
            concat_mode: self.concat_mode,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub embeddings: Vec<EmbeddingSource>,
    pub gender_terms: PathBuf,
    pub race_terms: PathBuf,
    pub warmth_pairs: PathBuf,
    pub competence_pairs: PathBuf,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_constructions")]
    pub constructions: Vec<Target>,
    pub operators: Vec<OperatorConfig>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub lexicon: Option<PathBuf>,
    pub replacements: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub center: bool,
    /// Per-attribute-averaged ECT variant instead of one global ranking.
    #[serde(default)]
    pub ect_per_attribute: bool,
    /// Retrieve EQT completions from the full vocabulary for single-group
    /// targets instead of the restricted identity pool.
    #[serde(default)]
    pub eqt_full_vocab: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_top_k() -> usize {
    15
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_constructions() -> Vec<Target> {
    vec![Target::Summed, Target::Concatenated]
}

fn default_true() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // paths in the config are relative to the config file
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for src in &mut self.embeddings {
            fix(&mut src.path);
        }
        fix(&mut self.gender_terms);
        fix(&mut self.race_terms);
        fix(&mut self.warmth_pairs);
        fix(&mut self.competence_pairs);
        if let Some(p) = &mut self.lexicon {
            fix(p);
        }
        if let Some(p) = &mut self.replacements {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        if self.embeddings.is_empty() {
            return Err(Error::Config("no embedding sources configured".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        if self.constructions.is_empty() {
            return Err(Error::Config("at least one construction required".into()));
        }
        if self.operators.is_empty() {
            return Err(Error::Config("at least one operator required".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be positive".into()));
        }
        for op in &self.operators {
            op.smoothing.validate()?;
            if op.beta < 0.0 {
                return Err(Error::Config(format!("beta must be >= 0, got {}", op.beta)));
            }
        }
        for src in &self.embeddings {
            src.format.parse::<crate::embedding::EmbeddingFormat>()?;
        }
        Ok(())
    }
}
