//! Premise/hypothesis pair encoding with a hard length limit.
//!
//! Layout is `[CLS] premise [SEP] hypothesis [SEP]`. When the pair does not
//! fit, tokens are removed from the tail of whichever segment is currently
//! longer (the hypothesis on ties) until it does.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenize::Tokenizer;

/// Number of special positions in a pair encoding.
pub const SPECIAL_POSITIONS: usize = 3;

/// Smallest `max_len` that keeps one token of each segment.
pub const MIN_MAX_LEN: usize = SPECIAL_POSITIONS + 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("max_len {max_len} cannot hold {SPECIAL_POSITIONS} special positions and one token per segment")]
    MaxLenTooSmall { max_len: usize },
    #[error("{segment} produced no tokens")]
    EmptySegment { segment: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairEncoding {
    pub token_ids: Vec<u32>,
    pub premise_span: Range<usize>,
    pub hypothesis_span: Range<usize>,
    pub special_positions: Vec<usize>,
}

impl PairEncoding {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Segment ids: 0 up to and including the first `[SEP]`, 1 after it.
    pub fn type_ids(&self) -> Vec<u32> {
        (0..self.len())
            .map(|i| u32::from(i >= self.hypothesis_span.start))
            .collect()
    }

    pub fn premise_len(&self) -> usize {
        self.premise_span.len()
    }

    pub fn hypothesis_len(&self) -> usize {
        self.hypothesis_span.len()
    }
}

/// Segment lengths after longest-first truncation to `budget` content tokens.
pub fn truncated_lengths(premise: usize, hypothesis: usize, budget: usize) -> (usize, usize) {
    if premise + hypothesis <= budget {
        return (premise, hypothesis);
    }
    let short = premise.min(hypothesis);
    if 2 * short >= budget {
        // both segments end up at the halfway point; ties shave the hypothesis
        (budget.div_ceil(2), budget / 2)
    } else if premise > hypothesis {
        (budget - hypothesis, hypothesis)
    } else {
        (premise, budget - premise)
    }
}

/// Assembles an encoding from already-tokenized segments.
pub fn encode_token_pair(
    premise: &[u32],
    hypothesis: &[u32],
    max_len: usize,
    cls_id: u32,
    sep_id: u32,
) -> Result<PairEncoding, EncodeError> {
    if max_len < MIN_MAX_LEN {
        return Err(EncodeError::MaxLenTooSmall { max_len });
    }
    if premise.is_empty() {
        return Err(EncodeError::EmptySegment { segment: "premise" });
    }
    if hypothesis.is_empty() {
        return Err(EncodeError::EmptySegment { segment: "hypothesis" });
    }
    let (np, nh) = truncated_lengths(premise.len(), hypothesis.len(), max_len - SPECIAL_POSITIONS);

    let mut token_ids = Vec::with_capacity(np + nh + SPECIAL_POSITIONS);
    token_ids.push(cls_id);
    token_ids.extend_from_slice(&premise[..np]);
    token_ids.push(sep_id);
    token_ids.extend_from_slice(&hypothesis[..nh]);
    token_ids.push(sep_id);

    Ok(PairEncoding {
        token_ids,
        premise_span: 1..1 + np,
        hypothesis_span: 2 + np..2 + np + nh,
        special_positions: vec![0, 1 + np, 2 + np + nh],
    })
}

pub fn encode_pair(
    premise: &str,
    hypothesis: &str,
    max_len: usize,
    tokenizer: &dyn Tokenizer,
) -> Result<PairEncoding, EncodeError> {
    encode_token_pair(
        &tokenizer.tokenize(premise),
        &tokenizer.tokenize(hypothesis),
        max_len,
        tokenizer.cls_id(),
        tokenizer.sep_id(),
    )
}
