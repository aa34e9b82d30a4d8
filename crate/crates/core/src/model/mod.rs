//! The built-in NLI encoder: a word vocabulary plus a small transformer
//! classifier, saved as a single JSON document.

mod adam;
mod encoder;

pub use adam::Adam;
pub use encoder::{cross_entropy, EncoderConfig, EncoderParams, ForwardCache};

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::AttentionTensor;
use crate::encoding::{encode_pair, EncodeError, PairEncoding};
use crate::nli::{EntailmentScore, NliError};
use crate::tokenize::{Tokenizer, WordVocab};

pub const WEIGHTS_FILE: &str = "model.json";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot access model weights at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid model weights at {path}: {message}")]
    Invalid { path: String, message: String },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("encoding of length {len} exceeds the model's {max} positions")]
    TooLong { len: usize, max: usize },
    #[error("model produced a non-finite distribution: {0}")]
    NonFinite(#[from] NliError),
}

/// Architecture knobs for a freshly initialized encoder. The vocabulary
/// size comes from the training corpora.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TinyEncoderSpec {
    pub hidden: usize,
    pub heads: usize,
    pub ff: usize,
    pub layers: usize,
    pub max_positions: usize,
    pub max_vocab: Option<usize>,
}

impl Default for TinyEncoderSpec {
    fn default() -> Self {
        Self {
            hidden: 32,
            heads: 2,
            ff: 64,
            layers: 2,
            max_positions: 128,
            max_vocab: Some(8000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliEncoder {
    pub config: EncoderConfig,
    pub vocab: WordVocab,
    pub params: EncoderParams,
}

impl NliEncoder {
    /// Random initialization, deterministic in `seed`.
    pub fn init<'a>(
        spec: &TinyEncoderSpec,
        texts: impl IntoIterator<Item = &'a str>,
        seed: u64,
    ) -> Result<Self, String> {
        let vocab = WordVocab::build(texts, spec.max_vocab);
        let config = EncoderConfig {
            vocab_size: vocab.len(),
            hidden: spec.hidden,
            heads: spec.heads,
            ff: spec.ff,
            layers: spec.layers,
            max_positions: spec.max_positions,
        };
        config.validate()?;
        let params = EncoderParams::init(&config, &mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self { config, vocab, params })
    }

    pub fn encode(&self, premise: &str, hypothesis: &str, max_len: usize) -> Result<PairEncoding, ModelError> {
        let enc = encode_pair(premise, hypothesis, max_len, &self.vocab)?;
        if enc.len() > self.config.max_positions {
            return Err(ModelError::TooLong {
                len: enc.len(),
                max: self.config.max_positions,
            });
        }
        Ok(enc)
    }

    pub fn logits(&self, enc: &PairEncoding) -> ([f64; 3], ForwardCache) {
        self.params.forward(&self.config, &enc.token_ids, &enc.type_ids())
    }

    pub fn score(&self, enc: &PairEncoding) -> Result<EntailmentScore, ModelError> {
        Ok(EntailmentScore::from_logits(self.logits(enc).0)?)
    }

    /// Attention probabilities of every layer and head for one encoding.
    pub fn attention(&self, enc: &PairEncoding) -> AttentionTensor {
        let (_, cache) = self.logits(enc);
        AttentionTensor::from_matrices(&cache.attention()).expect("softmax rows are distributions")
    }

    pub fn tokens(&self, enc: &PairEncoding) -> Vec<String> {
        enc.token_ids
            .iter()
            .map(|&id| self.vocab.token(id).unwrap_or("[UNK]").to_string())
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        let path = dir.join(WEIGHTS_FILE);
        let json = serde_json::to_string(self).map_err(|e| ModelError::Invalid {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        fs::write(&path, json).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let path = dir.join(WEIGHTS_FILE);
        let shown = path.display().to_string();
        let text = fs::read_to_string(&path).map_err(|source| ModelError::Io {
            path: shown.clone(),
            source,
        })?;
        let invalid = |message: String| ModelError::Invalid {
            path: shown.clone(),
            message,
        };
        let model: NliEncoder = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        model.config.validate().map_err(&invalid)?;
        if model.vocab.len() != model.config.vocab_size {
            return Err(invalid("vocabulary size disagrees with config".into()));
        }
        if !model.params.shape_matches(&model.config) {
            return Err(invalid("tensor shapes disagree with config".into()));
        }
        Ok(model)
    }
}
