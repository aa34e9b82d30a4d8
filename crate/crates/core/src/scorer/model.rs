use std::path::Path;

use rayon::prelude::*;

use super::{EntailmentScorer, ScoreError};
use crate::attention::{segment_tokens, AttentionExport};
use crate::data::TextPair;
use crate::model::NliEncoder;
use crate::nli::EntailmentScore;

/// Scores pairs with a trained [`NliEncoder`]. Inference has no dropout or
/// other randomness, and each pair is encoded on its own, so scores do not
/// depend on batching.
#[derive(Debug, Clone)]
pub struct ModelScorer {
    model: NliEncoder,
    max_len: usize,
    batch_size: usize,
    label: String,
}

impl ModelScorer {
    pub fn new(model: NliEncoder, max_len: usize, batch_size: usize, label: impl Into<String>) -> Self {
        Self {
            model,
            max_len,
            batch_size: batch_size.max(1),
            label: label.into(),
        }
    }

    /// Loads the weights stored in a checkpoint directory.
    pub fn load(checkpoint_dir: &Path, max_len: usize, batch_size: usize) -> Result<Self, ScoreError> {
        let model = NliEncoder::load(checkpoint_dir).map_err(|e| ScoreError::Construction(e.to_string()))?;
        let label = checkpoint_dir
            .file_name()
            .and_then(|n| n.to_str())
            .map_or_else(|| "model".to_string(), |n| format!("model:{n}"));
        Ok(Self::new(model, max_len, batch_size, label))
    }

    pub fn model(&self) -> &NliEncoder {
        &self.model
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Encodes a pair and records the attention of every layer and head.
    pub fn attention_export(&self, premise: &str, hypothesis: &str) -> Result<AttentionExport, ScoreError> {
        let enc = self.model.encode(premise, hypothesis, self.max_len)?;
        Ok(AttentionExport {
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
            tokens: self.model.tokens(&enc),
            segments: segment_tokens(&enc),
            attention: self.model.attention(&enc),
        })
    }
}

impl EntailmentScorer for ModelScorer {
    fn score_pair(&self, premise: &str, hypothesis: &str) -> Result<EntailmentScore, ScoreError> {
        let enc = self.model.encode(premise, hypothesis, self.max_len)?;
        Ok(self.model.score(&enc)?)
    }

    fn score_batch(&self, pairs: &[TextPair<'_>]) -> Result<Vec<EntailmentScore>, ScoreError> {
        if pairs.is_empty() {
            return Err(ScoreError::EmptyBatch);
        }
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(self.batch_size) {
            let scored: Result<Vec<_>, _> = chunk
                .par_iter()
                .map(|p| self.score_pair(p.premise, p.hypothesis))
                .collect();
            out.extend(scored?);
        }
        Ok(out)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}
