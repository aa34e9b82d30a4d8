//! Rank candidate summaries by NLI entailment probability and measure how
//! well an NLI scorer separates correct from incorrect summaries.
//!
//! A summary-correctness triple `(d, s+, s-)` counts as correct when the
//! scorer gives the correct summary a strictly higher entailment
//! probability than the incorrect one. The crate also carries a small
//! transformer encoder that can be fine-tuned in stages (MNLI, then ANLI)
//! and whose attention can be inspected per layer and head.
//!
//! Runnable examples live in `examples/`:
//!
//! - `rank_summaries`: pick the most entailed candidate for a document
//! - `evaluate_sc`: pairwise accuracy on a triple dataset
//! - `ratio_analysis`: ratio histogram and failure mining
//! - `convert_corpora`: MNLI / ANLI / triple release to canonical JSONL
//! - `encode_pairs`: pair encoding and truncation
//! - `train_pipeline`: two-stage fine-tuning of the tiny encoder
//! - `attention_analysis`: cross-segment attention mass per layer

pub mod attention;
pub mod cli;
pub mod data;
pub mod encoding;
pub mod finetune;
pub mod model;
pub mod nli;
pub mod rank_eval;
pub mod scorer;
pub mod synth;
pub mod tokenize;

pub use data::{CorpusDescriptor, CorpusFormat, TextPair, TripleDataset};
pub use nli::{EntailmentScore, NliExample, NliLabel, SummaryTriple};
pub use rank_eval::{evaluate_sc, rank_candidates, EvalReport, TripleOutcome};
pub use scorer::{EntailmentScorer, Scorer, ScorerConfig};
