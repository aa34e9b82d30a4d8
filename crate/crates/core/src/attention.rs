//! Cross-segment attention statistics.
//!
//! For an encoded premise/hypothesis pair, the cross fraction of a head is
//! the share of attention mass (between non-special tokens) that flows from
//! premise queries to hypothesis keys or from hypothesis queries to premise
//! keys. Special positions are left out of numerator and denominator.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::PairEncoding;

/// Row-sum tolerance for attention distributions.
pub const ROW_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttnError {
    #[error("attention shape ({n_layers}, {n_heads}, {seq_len}) does not match {len} weights")]
    Shape {
        n_layers: usize,
        n_heads: usize,
        seq_len: usize,
        len: usize,
    },
    #[error("attention row (layer {layer}, head {head}, query {query}) is not a distribution: {reason}")]
    BadRow {
        layer: usize,
        head: usize,
        query: usize,
        reason: String,
    },
    #[error("segment map covers {segments} positions but attention has {seq_len}")]
    LengthMismatch { segments: usize, seq_len: usize },
    #[error("{what} index {index} out of range 0..{bound}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("layer trend needs at least 2 layers, got {0}")]
    TooFewLayers(usize),
    #[error("no defined cross fraction in the {0} half of the layers")]
    Undefined(&'static str),
    #[error("cannot read attention export {path}: {message}")]
    Read { path: String, message: String },
}

/// Attention weights indexed `[layer][head][query][key]`, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct AttentionTensor {
    n_layers: usize,
    n_heads: usize,
    seq_len: usize,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTensor {
    n_layers: usize,
    n_heads: usize,
    seq_len: usize,
    weights: Vec<f64>,
}

impl TryFrom<RawTensor> for AttentionTensor {
    type Error = AttnError;

    fn try_from(raw: RawTensor) -> Result<Self, Self::Error> {
        AttentionTensor::new(raw.n_layers, raw.n_heads, raw.seq_len, raw.weights)
    }
}

impl AttentionTensor {
    pub fn new(n_layers: usize, n_heads: usize, seq_len: usize, weights: Vec<f64>) -> Result<Self, AttnError> {
        if weights.len() != n_layers * n_heads * seq_len * seq_len || n_layers == 0 || n_heads == 0 || seq_len == 0 {
            return Err(AttnError::Shape {
                n_layers,
                n_heads,
                seq_len,
                len: weights.len(),
            });
        }
        let tensor = Self {
            n_layers,
            n_heads,
            seq_len,
            weights,
        };
        for layer in 0..n_layers {
            for head in 0..n_heads {
                for query in 0..seq_len {
                    let row = tensor.row(layer, head, query);
                    let bad = |reason: String| AttnError::BadRow {
                        layer,
                        head,
                        query,
                        reason,
                    };
                    if let Some(w) = row.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                        return Err(bad(format!("weight {w}")));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_TOLERANCE {
                        return Err(bad(format!("sums to {sum}")));
                    }
                }
            }
        }
        Ok(tensor)
    }

    /// Builds a tensor from `[layer][head]` square matrices.
    pub fn from_matrices(layers: &[Vec<Array2<f64>>]) -> Result<Self, AttnError> {
        let n_layers = layers.len();
        let n_heads = layers.first().map_or(0, Vec::len);
        let seq_len = layers.first().and_then(|l| l.first()).map_or(0, |m| m.nrows());
        let mut weights = Vec::with_capacity(n_layers * n_heads * seq_len * seq_len);
        for layer in layers {
            for m in layer {
                if m.dim() != (seq_len, seq_len) || layer.len() != n_heads {
                    return Err(AttnError::Shape {
                        n_layers,
                        n_heads,
                        seq_len,
                        len: m.len(),
                    });
                }
                weights.extend(m.iter().copied());
            }
        }
        Self::new(n_layers, n_heads, seq_len, weights)
    }

    /// Same attention pattern in every layer and head.
    pub fn broadcast(n_layers: usize, n_heads: usize, pattern: &Array2<f64>) -> Result<Self, AttnError> {
        let layer = vec![pattern.clone(); n_heads];
        Self::from_matrices(&vec![layer; n_layers])
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_layers, self.n_heads, self.seq_len)
    }

    pub fn row(&self, layer: usize, head: usize, query: usize) -> &[f64] {
        let start = ((layer * self.n_heads + head) * self.seq_len + query) * self.seq_len;
        &self.weights[start..start + self.seq_len]
    }

    pub fn weight(&self, layer: usize, head: usize, query: usize, key: usize) -> f64 {
        self.row(layer, head, query)[key]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentClass {
    Premise,
    Hypothesis,
    Special,
}

/// Segment class of every position of an encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentMap(pub Vec<SegmentClass>);

impl SegmentMap {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, class: SegmentClass) -> usize {
        self.0.iter().filter(|c| **c == class).count()
    }
}

pub fn segment_tokens(encoding: &PairEncoding) -> SegmentMap {
    let mut classes = vec![SegmentClass::Special; encoding.len()];
    for i in encoding.premise_span.clone() {
        classes[i] = SegmentClass::Premise;
    }
    for i in encoding.hypothesis_span.clone() {
        classes[i] = SegmentClass::Hypothesis;
    }
    SegmentMap(classes)
}

/// Per-layer, per-head cross fractions. `None` marks a head with no
/// attention mass between non-special positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMassProfile {
    pub cross_fraction: Vec<Vec<Option<f64>>>,
    pub per_layer_mean: Vec<Option<f64>>,
}

fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn cross_attention_mass(attn: &AttentionTensor, segmap: &SegmentMap) -> Result<CrossMassProfile, AttnError> {
    let (n_layers, n_heads, seq_len) = attn.dims();
    if segmap.len() != seq_len {
        return Err(AttnError::LengthMismatch {
            segments: segmap.len(),
            seq_len,
        });
    }
    let classes = &segmap.0;
    let mut cross_fraction = Vec::with_capacity(n_layers);
    for layer in 0..n_layers {
        let mut heads = Vec::with_capacity(n_heads);
        for head in 0..n_heads {
            let (mut cross, mut total) = (0.0, 0.0);
            for (q, qc) in classes.iter().enumerate() {
                if *qc == SegmentClass::Special {
                    continue;
                }
                for (w, kc) in attn.row(layer, head, q).iter().zip(classes) {
                    if *kc == SegmentClass::Special {
                        continue;
                    }
                    total += w;
                    if kc != qc {
                        cross += w;
                    }
                }
            }
            heads.push((total > 0.0).then(|| (cross / total).clamp(0.0, 1.0)));
        }
        cross_fraction.push(heads);
    }
    let per_layer_mean = cross_fraction.iter().map(|h| mean_defined(h.iter().copied())).collect();
    Ok(CrossMassProfile {
        cross_fraction,
        per_layer_mean,
    })
}

/// Head-averaged attention row of `query_position` at `layer`, strongest
/// keys first (equal weights keep key order).
pub fn token_attention_slice(
    attn: &AttentionTensor,
    layer: usize,
    query_position: usize,
) -> Result<Vec<(usize, f64)>, AttnError> {
    let (n_layers, n_heads, seq_len) = attn.dims();
    if layer >= n_layers {
        return Err(AttnError::OutOfRange {
            what: "layer",
            index: layer,
            bound: n_layers,
        });
    }
    if query_position >= seq_len {
        return Err(AttnError::OutOfRange {
            what: "query position",
            index: query_position,
            bound: seq_len,
        });
    }
    let mut averaged = vec![0.0; seq_len];
    for head in 0..n_heads {
        for (acc, w) in averaged.iter_mut().zip(attn.row(layer, head, query_position)) {
            *acc += w;
        }
    }
    let mut slice: Vec<(usize, f64)> = averaged.into_iter().map(|w| w / n_heads as f64).enumerate().collect();
    slice.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(slice)
}

/// Mean cross fraction over the first and second half of the layers. With
/// an odd layer count the middle layer counts as early.
pub fn layer_trend(profile: &CrossMassProfile) -> Result<(f64, f64), AttnError> {
    let n = profile.per_layer_mean.len();
    if n < 2 {
        return Err(AttnError::TooFewLayers(n));
    }
    let split = n.div_ceil(2);
    let early = mean_defined(profile.per_layer_mean[..split].iter().copied()).ok_or(AttnError::Undefined("early"))?;
    let late = mean_defined(profile.per_layer_mean[split..].iter().copied()).ok_or(AttnError::Undefined("late"))?;
    Ok((early, late))
}

/// Attention of one encoded pair as written by the model backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionExport {
    pub premise: String,
    pub hypothesis: String,
    pub tokens: Vec<String>,
    pub segments: SegmentMap,
    pub attention: AttentionTensor,
}

impl AttentionExport {
    pub fn read(path: &Path) -> Result<Self, AttnError> {
        let read_err = |message: String| AttnError::Read {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        let export: AttentionExport = serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))?;
        if export.segments.len() != export.attention.seq_len || export.tokens.len() != export.attention.seq_len {
            return Err(AttnError::LengthMismatch {
                segments: export.segments.len(),
                seq_len: export.attention.seq_len,
            });
        }
        Ok(export)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"))
}

/// `layer\thead\tcross_fraction` table.
pub fn cross_fraction_table(profile: &CrossMassProfile) -> String {
    let mut out = String::from("layer\thead\tcross_fraction\n");
    for (layer, heads) in profile.cross_fraction.iter().enumerate() {
        for (head, v) in heads.iter().enumerate() {
            writeln!(out, "{layer}\t{head}\t{}", fmt_opt(*v)).unwrap();
        }
    }
    out
}

/// `layer\tper_layer_mean` table.
pub fn layer_mean_table(profile: &CrossMassProfile) -> String {
    let mut out = String::from("layer\tper_layer_mean\n");
    for (layer, v) in profile.per_layer_mean.iter().enumerate() {
        writeln!(out, "{layer}\t{}", fmt_opt(*v)).unwrap();
    }
    out
}
