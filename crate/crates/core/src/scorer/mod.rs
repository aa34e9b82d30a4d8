//! Entailment scoring backends.
//!
//! Every backend implements [`EntailmentScorer`]. The lookup backend serves
//! fixed scores from a table and is what tests and oracles use; the model
//! backend runs a trained encoder loaded from a checkpoint directory.

mod lookup;
mod model;

pub use lookup::LookupTable;
pub use model::ModelScorer;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TextPair;
use crate::model::ModelError;
use crate::nli::EntailmentScore;

pub const DEFAULT_MAX_LEN: usize = 128;
pub const MIN_SCORER_MAX_LEN: usize = 8;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("cannot construct scorer: {0}")]
    Construction(String),
    #[error("invalid scorer config: {0}")]
    Config(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<crate::encoding::EncodeError> for ScoreError {
    fn from(e: crate::encoding::EncodeError) -> Self {
        ScoreError::Model(e.into())
    }
}

pub trait EntailmentScorer: Sync {
    fn score_pair(&self, premise: &str, hypothesis: &str) -> Result<EntailmentScore, ScoreError>;

    /// Scores in input order. Must agree element-wise with
    /// [`EntailmentScorer::score_pair`].
    fn score_batch(&self, pairs: &[TextPair<'_>]) -> Result<Vec<EntailmentScore>, ScoreError> {
        if pairs.is_empty() {
            return Err(ScoreError::EmptyBatch);
        }
        pairs.iter().map(|p| self.score_pair(p.premise, p.hypothesis)).collect()
    }

    /// Short provenance string recorded in reports.
    fn label(&self) -> String;
}

impl<S: EntailmentScorer + ?Sized> EntailmentScorer for Box<S> {
    fn score_pair(&self, premise: &str, hypothesis: &str) -> Result<EntailmentScore, ScoreError> {
        (**self).score_pair(premise, hypothesis)
    }

    fn score_batch(&self, pairs: &[TextPair<'_>]) -> Result<Vec<EntailmentScore>, ScoreError> {
        (**self).score_batch(pairs)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Lookup,
    Model,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Lookup => "lookup",
            Backend::Model => "model",
        })
    }
}

impl FromStr for Backend {
    type Err = ScoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lookup" => Ok(Backend::Lookup),
            "model" => Ok(Backend::Model),
            other => Err(ScoreError::Config(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub backend: Backend,
    /// Checkpoint directory for the model backend.
    pub checkpoint_ref: Option<PathBuf>,
    /// Score table for the lookup backend; empty table when absent.
    pub table: Option<PathBuf>,
    pub max_len: usize,
    pub batch_size: usize,
    /// Ask the model backend to also write per-pair attention exports.
    pub emit_attentions: bool,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Lookup,
            checkpoint_ref: None,
            table: None,
            max_len: DEFAULT_MAX_LEN,
            batch_size: 32,
            emit_attentions: false,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.max_len < MIN_SCORER_MAX_LEN {
            return Err(ScoreError::Config(format!(
                "max_len must be at least {MIN_SCORER_MAX_LEN}, got {}",
                self.max_len
            )));
        }
        if self.batch_size == 0 {
            return Err(ScoreError::Config("batch_size must be at least 1".into()));
        }
        if self.emit_attentions && self.backend != Backend::Model {
            return Err(ScoreError::Config("attention export needs the model backend".into()));
        }
        Ok(())
    }
}

/// A constructed scorer of either backend.
#[derive(Debug, Clone)]
pub enum Scorer {
    Lookup(LookupTable),
    Model(Box<ModelScorer>),
}

impl Scorer {
    /// Builds a scorer, failing here rather than per call when a checkpoint
    /// or table cannot be loaded.
    pub fn from_config(config: &ScorerConfig) -> Result<Self, ScoreError> {
        config.validate()?;
        match config.backend {
            Backend::Lookup => {
                let table = match &config.table {
                    Some(path) => LookupTable::read(path)?,
                    None => LookupTable::default(),
                };
                Ok(Scorer::Lookup(table))
            }
            Backend::Model => {
                let dir = config
                    .checkpoint_ref
                    .as_ref()
                    .ok_or_else(|| ScoreError::Config("model backend needs a checkpoint".into()))?;
                Ok(Scorer::Model(Box::new(ModelScorer::load(
                    dir,
                    config.max_len,
                    config.batch_size,
                )?)))
            }
        }
    }

    fn inner(&self) -> &dyn EntailmentScorer {
        match self {
            Scorer::Lookup(t) => t,
            Scorer::Model(m) => m.as_ref(),
        }
    }
}

impl EntailmentScorer for Scorer {
    fn score_pair(&self, premise: &str, hypothesis: &str) -> Result<EntailmentScore, ScoreError> {
        self.inner().score_pair(premise, hypothesis)
    }

    fn score_batch(&self, pairs: &[TextPair<'_>]) -> Result<Vec<EntailmentScore>, ScoreError> {
        self.inner().score_batch(pairs)
    }

    fn label(&self) -> String {
        self.inner().label()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NliEncoder, TinyEncoderSpec};

    fn tiny_model() -> ModelScorer {
        let spec = TinyEncoderSpec {
            hidden: 16,
            ff: 32,
            layers: 2,
            ..Default::default()
        };
        let model = NliEncoder::init(&spec, ["the cat sat on the mat .", "a dog ran"], 9).unwrap();
        ModelScorer::new(model, 128, 3, "tiny")
    }

    #[test]
    fn config_validation() {
        let mut cfg = ScorerConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.max_len = 7;
        assert!(cfg.validate().is_err());
        cfg.max_len = 128;
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        cfg.batch_size = 1;
        cfg.emit_attentions = true;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unloadable_checkpoint_fails_at_construction() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScorerConfig {
            backend: Backend::Model,
            checkpoint_ref: Some(dir.path().join("missing")),
            ..Default::default()
        };
        assert!(matches!(Scorer::from_config(&cfg), Err(ScoreError::Construction(_))));
    }

    #[test]
    fn model_scores_are_deterministic_and_batch_invariant() {
        let scorer = tiny_model();
        let a = scorer.score_pair("the cat sat on the mat .", "the cat sat").unwrap();
        let b = scorer.score_pair("the cat sat on the mat .", "the cat sat").unwrap();
        assert_eq!(a.as_array().map(f64::to_bits), b.as_array().map(f64::to_bits));

        let pairs = [
            TextPair {
                premise: "the cat sat",
                hypothesis: "a dog ran",
            },
            TextPair {
                premise: "a dog ran",
                hypothesis: "the mat",
            },
            TextPair {
                premise: "the cat",
                hypothesis: "the cat sat on the mat .",
            },
            TextPair {
                premise: "unknown words",
                hypothesis: "here",
            },
        ];
        let batch = scorer.score_batch(&pairs).unwrap();
        for (p, s) in pairs.iter().zip(&batch) {
            assert_eq!(*s, scorer.score_pair(p.premise, p.hypothesis).unwrap());
        }
        assert!(matches!(scorer.score_batch(&[]), Err(ScoreError::EmptyBatch)));
    }

    #[test]
    fn attention_export_is_consistent() {
        let scorer = tiny_model();
        let export = scorer
            .attention_export("the cat sat on the mat .", "a dog ran")
            .unwrap();
        assert_eq!(export.tokens.len(), export.segments.len());
        assert_eq!(export.tokens[0], "[CLS]");
        assert_eq!(export.attention.dims(), (2, 2, export.tokens.len()));
    }
}
